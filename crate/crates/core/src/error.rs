use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unsupported format version {found} in {} (expected {expected})", path.display())]
    Version {
        path: PathBuf,
        found: u64,
        expected: u64,
    },

    #[error("{field} mismatch: manifest says {expected}, found {actual}")]
    CountMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("event {id} is invalid: {}", violations.join("; "))]
    InvalidEvent { id: String, violations: Vec<String> },

    #[error("{} invalid events:{}", .0.len(), list_events(.0))]
    InvalidEvents(Vec<(String, Vec<String>)>),

    #[error("duplicate event id {0}")]
    DuplicateId(String),

    #[error("rate undefined: {0}")]
    UndefinedRate(&'static str),

    #[error("both classes are required, got {positives} positive and {negatives} negative")]
    SingleClass { positives: usize, negatives: usize },

    #[error("cannot stratify: {0}")]
    Stratification(String),

    #[error("event generation failed: {0}")]
    Generation(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("model format error: {0}")]
    Model(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn list_events(events: &[(String, Vec<String>)]) -> String {
    events
        .iter()
        .map(|(id, v)| format!("\n  {id}: {}", v.join("; ")))
        .collect()
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

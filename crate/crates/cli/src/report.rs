//! Serializable run reports and the CSV tables derived from them.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use nuecls_core::descriptor::DescriptorConfig;
use nuecls_core::eval::{Aggregation, CvRun, RocCurve, SliceMetrics, Summary, DEFAULT_THRESHOLD};
use nuecls_core::event_model::Dataset;
use serde::{Deserialize, Serialize};

use crate::config::{CvSettings, ExperimentConfig, ForestSettings, Seeds};

pub const REPORT_FORMAT: &str = "nuecls-cv-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// `repetition` or `fold`.
    pub unit: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (divisor n - 1); absent with one value.
    pub std: Option<f64>,
}

impl MetricReport {
    pub fn new(s: &Summary, aggregation: Aggregation) -> Self {
        MetricReport {
            unit: match aggregation {
                Aggregation::Repetition => "repetition",
                Aggregation::Fold => "fold",
            }
            .into(),
            values: s.values.clone(),
            mean: s.mean,
            std: s.std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub fpr: f64,
    pub tpr: f64,
    /// `None` for the leading point, whose threshold is +infinity.
    pub threshold: Option<f64>,
}

pub fn roc_rows(roc: &RocCurve) -> Vec<RocRow> {
    roc.points
        .iter()
        .map(|p| RocRow {
            fpr: p.fpr,
            tpr: p.tpr,
            threshold: p.threshold.is_finite().then_some(p.threshold),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    /// Directory the dataset was read from, or `generated`.
    pub source: String,
    pub n_events: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub generator_seed: u64,
}

impl DatasetInfo {
    pub fn new(d: &Dataset, source: &str) -> Self {
        let (p, n) = d.class_counts();
        DatasetInfo {
            source: source.into(),
            n_events: d.events.len(),
            n_positive: p,
            n_negative: n,
            generator_seed: d.manifest.seed,
        }
    }
}

/// Everything one cross-validation run reports. Contains no timestamps,
/// paths of outputs or thread counts, so equal configs give equal bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub format: String,
    pub version: u32,
    pub dataset: DatasetInfo,
    pub descriptor: DescriptorConfig,
    pub feature_len: usize,
    pub forest: ForestSettings,
    pub cv: CvSettings,
    pub seeds: Seeds,
    pub labels_shuffled: bool,
    pub piv_noise_level: Option<u32>,
    pub accuracy_threshold: f64,
    pub auc: MetricReport,
    pub accuracy: MetricReport,
    /// ROC of all repetitions' out-of-fold scores pooled.
    pub roc: Vec<RocRow>,
}

impl CvReport {
    pub fn new(
        cfg: &ExperimentConfig,
        descriptor: &DescriptorConfig,
        forest: ForestSettings,
        dataset: DatasetInfo,
        run: &CvRun,
    ) -> Result<Self> {
        let agg = run.config.aggregation;
        Ok(CvReport {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            dataset,
            descriptor: *descriptor,
            feature_len: descriptor.feature_len(),
            forest,
            cv: cfg.cv,
            seeds: cfg.seeds,
            labels_shuffled: cfg.shuffle_labels,
            piv_noise_level: None,
            accuracy_threshold: DEFAULT_THRESHOLD,
            auc: MetricReport::new(&run.auc, agg),
            accuracy: MetricReport::new(&run.accuracy, agg),
            roc: roc_rows(&run.pooled_roc()?),
        })
    }

    pub fn summary_line(&self) -> String {
        summary_line(&self.auc, &self.accuracy)
    }
}

fn pm(m: &MetricReport) -> String {
    match m.std {
        Some(s) => format!("{:.4}±{:.4}", m.mean, s),
        None => format!("{:.4}±n/a", m.mean),
    }
}

/// `AUC mean±std, ACC mean±std` with a note on what the spread is.
pub fn summary_line(auc: &MetricReport, acc: &MetricReport) -> String {
    let note = match auc.std {
        Some(_) => format!("sample std over {} {}s", auc.values.len(), auc.unit),
        None => format!("single {}, std undefined", auc.unit),
    };
    format!("AUC {}, ACC {} ({note})", pm(auc), pm(acc))
}

/// One row of a per-slice table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub slice: String,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
    pub acc_mean: Option<f64>,
    pub acc_std: Option<f64>,
}

impl SliceRow {
    pub fn from_metrics(slice: String, auc: &MetricReport, acc: &MetricReport) -> Self {
        SliceRow {
            slice,
            auc_mean: Some(auc.mean),
            auc_std: auc.std,
            acc_mean: Some(acc.mean),
            acc_std: acc.std,
        }
    }

    pub fn absent(slice: String) -> Self {
        SliceRow {
            slice,
            auc_mean: None,
            auc_std: None,
            acc_mean: None,
            acc_std: None,
        }
    }
}

/// Metrics of one energy bin, `None` fields when the bin lacks a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub slice: String,
    pub lo: f64,
    pub hi: f64,
    pub closed: bool,
    pub n_samples: usize,
    pub n_positive: usize,
    pub auc: Option<MetricReport>,
    pub accuracy: Option<MetricReport>,
    pub roc: Option<Vec<RocRow>>,
}

impl BinReport {
    pub fn from_slice(
        bin: &nuecls_core::eval::EnergyBin,
        n_samples: usize,
        n_positive: usize,
        m: Option<&SliceMetrics>,
        aggregation: Aggregation,
    ) -> Self {
        BinReport {
            slice: bin.label(),
            lo: bin.lo,
            hi: bin.hi,
            closed: bin.closed,
            n_samples,
            n_positive,
            auc: m.map(|m| MetricReport::new(&m.auc, aggregation)),
            accuracy: m.map(|m| MetricReport::new(&m.accuracy, aggregation)),
            roc: m.map(|m| roc_rows(&m.roc)),
        }
    }

    pub fn row(&self) -> SliceRow {
        match (&self.auc, &self.accuracy) {
            (Some(a), Some(c)) => SliceRow::from_metrics(self.slice.clone(), a, c),
            _ => SliceRow::absent(self.slice.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub format: String,
    pub version: u32,
    /// `slice` (global CV, scores restricted per bin) or `retrain` (CV per bin).
    pub mode: String,
    pub global: Option<CvReport>,
    pub bins: Vec<BinReport>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_roc_csv(path: &Path, rows: &[RocRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["fpr", "tpr", "threshold"])?;
    for r in rows {
        let t = r.threshold.map_or_else(|| "inf".to_string(), |t| t.to_string());
        w.write_record([r.fpr.to_string(), r.tpr.to_string(), t])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slice_csv(path: &Path, rows: &[SliceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["slice", "auc_mean", "auc_std", "acc_mean", "acc_std"])?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows to a CSV table, writing the header only for a new file.
pub struct Appender {
    writer: csv::Writer<fs::File>,
}

impl Appender {
    pub fn open(path: &Path, header: &[&str], fresh: bool) -> Result<Self> {
        let existed = !fresh && path.exists() && fs::metadata(path)?.len() > 0;
        let file = fs::OpenOptions::new()
            .create(true)
            .append(!fresh)
            .write(true)
            .truncate(fresh)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if !existed {
            writer.write_record(header)?;
            writer.flush()?;
        }
        Ok(Appender { writer })
    }

    pub fn push<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Rows of an existing CSV table, or nothing when the file is absent.
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

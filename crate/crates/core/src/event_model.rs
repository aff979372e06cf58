//! Event images and the on-disk dataset format.
//!
//! A view is a dense row-major grid of non-negative charge. Rows run along
//! the drift-time axis (y, downwards), columns along the wire axis (x), with
//! the origin at the top-left pixel.
//!
//! A dataset directory holds `manifest.json` and `events.jsonl`. Each line of
//! `events.jsonl` is one event:
//!
//! ```text
//! {"id":"evt000000","label":"sig","energy_gev":0.53,
//!  "views":{"ind2":{"piv":[50,50],"pixels":[[r,c,q],...]},"coll":{...}}}
//! ```
//!
//! Pixels are listed in (row, col) order and zero pixels are omitted.
//! Charges are written in shortest round-trip decimal form, so a save/load
//! cycle reproduces every value bit for bit.

use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wires (columns) in a chunk centred on the PIV.
pub const CHUNK_WIRES: usize = 101;
/// Drift samples (rows) in a raw chunk before downsampling.
pub const RAW_SAMPLES: usize = 505;
/// Drift samples merged into one pixel row.
pub const SAMPLES_PER_PIXEL: usize = 5;
/// Side of a downsampled view.
pub const VIEW_SIZE: usize = 101;

pub const FORMAT_VERSION: u64 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub row: i64,
    pub col: i64,
}

impl Pixel {
    pub fn new(row: i64, col: i64) -> Self {
        Pixel { row, col }
    }
}

/// One detector view: a charge grid plus the PIV projected into it.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewImage {
    pub width: usize,
    pub height: usize,
    pub charge: Vec<f64>,
    pub piv: Pixel,
}

impl ViewImage {
    pub fn zeros(width: usize, height: usize, piv: Pixel) -> Self {
        ViewImage {
            width,
            height,
            charge: vec![0.0; width * height],
            piv,
        }
    }

    #[inline]
    pub fn contains(&self, p: Pixel) -> bool {
        p.row >= 0 && p.col >= 0 && (p.row as usize) < self.height && (p.col as usize) < self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.charge[row * self.width + col]
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, q: f64) {
        self.charge[row * self.width + col] += q;
    }

    pub fn total_charge(&self) -> f64 {
        self.charge.iter().sum()
    }

    /// Invariant violations of this view, empty when valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.charge.len() != self.width * self.height {
            out.push(Violation::GridSize {
                expected: self.width * self.height,
                actual: self.charge.len(),
            });
        }
        if !self.contains(self.piv) {
            out.push(Violation::PivOutOfBounds(self.piv));
        }
        if self.charge.iter().any(|q| !q.is_finite()) {
            out.push(Violation::NonFiniteCharge);
        }
        if self.charge.iter().any(|&q| q < 0.0) {
            out.push(Violation::NegativeCharge);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Electron-neutrino interaction.
    #[serde(rename = "sig")]
    Positive,
    /// Cosmogenic photon-induced cascade.
    #[serde(rename = "bkg")]
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// 1 for signal, 0 for background.
    pub fn as_u8(self) -> u8 {
        self.is_positive() as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    Ind2,
    Coll,
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewKind::Ind2 => "ind2",
            ViewKind::Coll => "coll",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: String,
    pub label: Label,
    pub energy_gev: f64,
    pub ind2: ViewImage,
    pub coll: ViewImage,
}

impl Event {
    pub fn views(&self) -> [(ViewKind, &ViewImage); 2] {
        [(ViewKind::Ind2, &self.ind2), (ViewKind::Coll, &self.coll)]
    }
}

/// A broken event invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyId,
    Energy(f64),
    GridSize { expected: usize, actual: usize },
    PivOutOfBounds(Pixel),
    NonFiniteCharge,
    NegativeCharge,
    InView(ViewKind, Box<Violation>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "empty id"),
            Violation::Energy(e) => write!(f, "energy {e} GeV is not a positive finite value"),
            Violation::GridSize { expected, actual } => {
                write!(f, "charge grid has {actual} values, expected {expected}")
            }
            Violation::PivOutOfBounds(p) => write!(f, "piv out of bounds at ({}, {})", p.row, p.col),
            Violation::NonFiniteCharge => write!(f, "non-finite charge"),
            Violation::NegativeCharge => write!(f, "negative charge"),
            Violation::InView(kind, v) => write!(f, "{kind}: {v}"),
        }
    }
}

/// Checks every event invariant. Both views always exist in [`Event`]; a
/// missing view can only occur on disk and is reported by [`load_dataset`].
pub fn validate_event(e: &Event) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if e.id.is_empty() {
        out.push(Violation::EmptyId);
    }
    if !(e.energy_gev.is_finite() && e.energy_gev > 0.0) {
        out.push(Violation::Energy(e.energy_gev));
    }
    for (kind, view) in e.views() {
        out.extend(
            view.violations()
                .into_iter()
                .map(|v| Violation::InView(kind, Box::new(v))),
        );
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

pub(crate) fn ensure_valid(e: &Event) -> Result<()> {
    validate_event(e).map_err(|v| Error::InvalidEvent {
        id: e.id.clone(),
        violations: v.iter().map(ToString::to_string).collect(),
    })
}

/// Merges `factor` consecutive rows into one by summation, top to bottom.
pub fn downsample_rows(raw: &[f64], rows: usize, cols: usize, factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || rows % factor != 0 {
        return Err(Error::InvalidInput(format!(
            "{rows} rows cannot be merged in groups of {factor}"
        )));
    }
    if raw.len() != rows * cols {
        return Err(Error::InvalidInput(format!(
            "grid has {} values, expected {rows}x{cols}",
            raw.len()
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite raw charge".into()));
    }
    let mut out = vec![0.0; rows / factor * cols];
    for (r, row) in raw.chunks_exact(cols).enumerate() {
        let dst = &mut out[(r / factor) * cols..(r / factor + 1) * cols];
        for (d, &v) in dst.iter_mut().zip(row) {
            *d += v;
        }
    }
    Ok(out)
}

/// Downsamples a raw 505-sample x 101-wire chunk to a 101x101 view grid.
pub fn downsample_view(raw: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if rows != RAW_SAMPLES || cols != CHUNK_WIRES {
        return Err(Error::InvalidInput(format!(
            "raw chunk must be {RAW_SAMPLES} samples x {CHUNK_WIRES} wires, got {rows}x{cols}"
        )));
    }
    downsample_rows(raw, rows, cols, SAMPLES_PER_PIXEL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
}

impl Default for GridShape {
    fn default() -> Self {
        GridShape {
            height: VIEW_SIZE,
            width: VIEW_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u64,
    pub seed: u64,
    pub n_events: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    #[serde(default)]
    pub grid: GridShape,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub events: Vec<Event>,
    pub manifest: Manifest,
}

impl Dataset {
    /// Builds a dataset whose manifest counts match `events`.
    pub fn new(events: Vec<Event>, seed: u64, params: serde_json::Value, note: Option<String>) -> Self {
        let n_positive = events.iter().filter(|e| e.label.is_positive()).count();
        let grid = events
            .first()
            .map(|e| GridShape {
                height: e.ind2.height,
                width: e.ind2.width,
            })
            .unwrap_or_default();
        let manifest = Manifest {
            version: FORMAT_VERSION,
            seed,
            n_events: events.len(),
            n_positive,
            n_negative: events.len() - n_positive,
            grid,
            params,
            note,
        };
        Dataset { events, manifest }
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let p = self.events.iter().filter(|e| e.label.is_positive()).count();
        (p, self.events.len() - p)
    }

    /// Checks manifest consistency, id uniqueness and every event.
    pub fn validate(&self) -> Result<()> {
        let (p, n) = self.class_counts();
        check_count("n_events", self.manifest.n_events, self.events.len())?;
        check_count("n_positive", self.manifest.n_positive, p)?;
        check_count("n_negative", self.manifest.n_negative, n)?;
        let mut seen = HashSet::with_capacity(self.events.len());
        let mut invalid = Vec::new();
        for e in &self.events {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            let mut problems: Vec<String> = match validate_event(e) {
                Ok(()) => Vec::new(),
                Err(v) => v.iter().map(ToString::to_string).collect(),
            };
            for (kind, v) in e.views() {
                if v.height != self.manifest.grid.height || v.width != self.manifest.grid.width {
                    problems.push(format!(
                        "{kind}: grid {}x{} differs from manifest {}x{}",
                        v.height, v.width, self.manifest.grid.height, self.manifest.grid.width
                    ));
                }
            }
            if !problems.is_empty() {
                invalid.push((e.id.clone(), problems));
            }
        }
        match invalid.len() {
            0 => Ok(()),
            1 => {
                let (id, violations) = invalid.pop().unwrap();
                Err(Error::InvalidEvent { id, violations })
            }
            _ => Err(Error::InvalidEvents(invalid)),
        }
    }
}

fn check_count(field: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::CountMismatch {
            field,
            expected,
            actual,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ViewRecord {
    piv: [i64; 2],
    pixels: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct Views {
    ind2: ViewRecord,
    coll: ViewRecord,
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    id: String,
    label: Label,
    energy_gev: f64,
    views: Views,
}

impl ViewRecord {
    fn from_view(v: &ViewImage) -> Self {
        let pixels = v
            .charge
            .iter()
            .enumerate()
            .filter(|(_, &q)| q != 0.0)
            .map(|(i, &q)| (i / v.width, i % v.width, q))
            .collect();
        ViewRecord {
            piv: [v.piv.row, v.piv.col],
            pixels,
        }
    }

    fn into_view(self, shape: GridShape) -> std::result::Result<ViewImage, String> {
        let mut view = ViewImage::zeros(shape.width, shape.height, Pixel::new(self.piv[0], self.piv[1]));
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, q) in self.pixels {
            if r >= shape.height || c >= shape.width {
                return Err(format!("pixel ({r}, {c}) outside {}x{} grid", shape.height, shape.width));
            }
            if prev.is_some_and(|p| p >= (r, c)) {
                return Err(format!("pixel ({r}, {c}) out of (row, col) order"));
            }
            prev = Some((r, c));
            view.charge[r * shape.width + c] = q;
        }
        Ok(view)
    }
}

/// Writes `d` as a dataset directory, creating it if needed.
pub fn save_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    d.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = serde_json::to_string_pretty(&d.manifest).expect("manifest serializes");
    manifest.push('\n');
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;

    let events_path = dir.join(EVENTS_FILE);
    let file = File::create(&events_path).map_err(|e| Error::io(&events_path, e))?;
    let mut w = BufWriter::new(file);
    for e in &d.events {
        let rec = EventRecord {
            id: e.id.clone(),
            label: e.label,
            energy_gev: e.energy_gev,
            views: Views {
                ind2: ViewRecord::from_view(&e.ind2),
                coll: ViewRecord::from_view(&e.coll),
            },
        };
        serde_json::to_writer(&mut w, &rec).expect("event serializes");
        w.write_all(b"\n").map_err(|e| Error::io(&events_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&events_path, e))
}

/// Reads and validates a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let found = raw.get("version").and_then(serde_json::Value::as_u64).unwrap_or(0);
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            path: manifest_path,
            found,
            expected: FORMAT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(raw).map_err(|e| Error::Parse {
        path: manifest_path.clone(),
        line: 0,
        msg: e.to_string(),
    })?;

    let events_path = dir.join(EVENTS_FILE);
    let file = File::open(&events_path).map_err(|e| Error::io(&events_path, e))?;
    let mut events = Vec::with_capacity(manifest.n_events);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&events_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: events_path.clone(),
            line: i + 1,
            msg,
        };
        let rec: EventRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let ind2 = rec.views.ind2.into_view(manifest.grid).map_err(|m| parse_err(format!("ind2: {m}")))?;
        let coll = rec.views.coll.into_view(manifest.grid).map_err(|m| parse_err(format!("coll: {m}")))?;
        events.push(Event {
            id: rec.id,
            label: rec.label,
            energy_gev: rec.energy_gev,
            ind2,
            coll,
        });
    }
    let d = Dataset { events, manifest };
    d.validate()?;
    Ok(d)
}

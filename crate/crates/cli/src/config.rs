//! Command-line flags and their resolution into an [`ExperimentConfig`].
//!
//! Precedence, lowest first: built-in defaults, `--quick` scaling, the JSON
//! file given by `--config`, then explicit flags.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nuecls_core::descriptor::{DescriptorConfig, SWEEP_BINS, SWEEP_RADII};
use nuecls_core::eval::{energy_bins, Aggregation, CvConfig, DEFAULT_ENERGY_EDGES, DEFAULT_NOISE_LEVELS};
use nuecls_core::forest::ForestConfig;
use nuecls_core::synthgen::GenParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::UsageError;

pub const QUICK_EVENTS: usize = 700;
pub const QUICK_TREES: usize = 200;
pub const QUICK_REPEATS: usize = 3;
pub const DEFAULT_TREE_COUNTS: [usize; 6] = [10, 50, 100, 500, 1000, 2000];

#[derive(Debug, Parser)]
#[command(name = "nuecls", version, about = "Electron-neutrino vs cosmogenic background classification experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON file with any subset of the resolved configuration fields.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Master seed for generation, fold assignment, forests and noise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (the dataset directory for `generate`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Scale events, trees and repeats down for a fast run.
    #[arg(long, global = true)]
    pub quick: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Generate {
        #[arg(long)]
        n_events: Option<usize>,
    },
    /// Compute feature vectors for every event and write them as CSV.
    Extract {
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
        #[command(flatten)]
        descriptor: DescriptorArgs,
    },
    /// Repeated stratified cross-validation of one configuration.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        descriptor: DescriptorArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Permute labels before CV (null check).
        #[arg(long)]
        shuffle_labels: bool,
    },
    /// Cross-validate every (bins, radius, stats) combination of a grid.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "bins-grid", value_delimiter = ',', value_name = "B,...")]
        bins_grid: Option<Vec<usize>>,
        #[arg(long = "radius-grid", value_delimiter = ',', value_name = "R,...")]
        radius_grid: Option<Vec<f64>>,
        #[arg(long = "stats-grid", value_delimiter = ',', value_name = "on|off,...")]
        stats_grid: Option<Vec<Toggle>>,
        /// Keep rows already present in the output table.
        #[arg(long)]
        skip_existing: bool,
    },
    /// Cross-validate at several forest sizes.
    TreeSweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        descriptor: DescriptorArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', value_name = "N,...")]
        counts: Option<Vec<usize>>,
        #[arg(long)]
        skip_existing: bool,
    },
    /// Re-run CV with the vertex shifted by up to k pixels.
    NoiseSweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        descriptor: DescriptorArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', value_name = "K,...")]
        levels: Option<Vec<u32>>,
        /// Apply one offset to both views instead of one per view.
        #[arg(long)]
        shared_offset: bool,
        #[arg(long)]
        skip_existing: bool,
    },
    /// Per-energy-bin metrics from one global CV run.
    EnergyEval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        descriptor: DescriptorArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', value_name = "E,...")]
        edges: Option<Vec<f64>>,
        /// Run a separate CV inside each bin instead of slicing global scores.
        #[arg(long)]
        retrain_per_bin: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateArg {
    Repetition,
    Fold,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory; a synthetic dataset is generated in memory when absent.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Events to generate when no dataset is given.
    #[arg(long)]
    pub n_events: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DescriptorArgs {
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Append the five histogram statistics per view.
    #[arg(long, value_name = "on|off")]
    pub stats: Option<Toggle>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_samples_split: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Unit over which mean and std are taken.
    #[arg(long)]
    pub aggregate: Option<AggregateArg>,
}

/// Forest settings without a seed; per-fold seeds are derived from the CV seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestSettings {
    fn default() -> Self {
        let f = ForestConfig::default();
        ForestSettings {
            n_trees: f.n_trees,
            max_features: f.max_features,
            min_samples_split: f.min_samples_split,
            max_depth: f.max_depth,
        }
    }
}

impl ForestSettings {
    pub fn with_trees(self, n_trees: usize) -> ForestConfig {
        ForestConfig {
            n_trees,
            ..self.config()
        }
    }

    pub fn config(self) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            max_features: self.max_features,
            min_samples_split: self.min_samples_split,
            max_depth: self.max_depth,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSettings {
    pub folds: usize,
    pub repeats: usize,
    pub aggregation: Aggregation,
}

impl Default for CvSettings {
    fn default() -> Self {
        let c = CvConfig::default();
        CvSettings {
            folds: c.folds,
            repeats: c.repeats,
            aggregation: c.aggregation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub bins: Vec<usize>,
    pub radii: Vec<f64>,
    pub stats: Vec<bool>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            bins: SWEEP_BINS.to_vec(),
            radii: SWEEP_RADII.to_vec(),
            stats: vec![true, false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    pub levels: Vec<u32>,
    pub shared_offset: bool,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            levels: DEFAULT_NOISE_LEVELS.to_vec(),
            shared_offset: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySettings {
    pub edges: Vec<f64>,
    pub retrain_per_bin: bool,
}

impl Default for EnergySettings {
    fn default() -> Self {
        EnergySettings {
            edges: DEFAULT_ENERGY_EDGES.to_vec(),
            retrain_per_bin: false,
        }
    }
}

/// Seeds actually used by a run. All are the master seed; each consumer
/// draws from its own tagged stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub generator: u64,
    pub cv: u64,
    pub piv_noise: u64,
    pub label_shuffle: u64,
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        Seeds {
            generator: seed,
            cv: seed,
            piv_noise: seed,
            label_shuffle: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    pub seed: u64,
    pub seeds: Seeds,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub quick: bool,
    pub dataset: Option<PathBuf>,
    pub generator: GenParams,
    pub descriptor: DescriptorConfig,
    pub forest: ForestSettings,
    pub cv: CvSettings,
    pub shuffle_labels: bool,
    pub sweep: SweepGrid,
    pub tree_counts: Vec<usize>,
    pub noise: NoiseSettings,
    pub energy: EnergySettings,
    pub skip_existing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: String::new(),
            seed: 0,
            seeds: Seeds::from_master(0),
            out: PathBuf::from("nuecls-out"),
            threads: None,
            quick: false,
            dataset: None,
            generator: GenParams::default(),
            descriptor: DescriptorConfig::default(),
            forest: ForestSettings::default(),
            cv: CvSettings::default(),
            shuffle_labels: false,
            sweep: SweepGrid::default(),
            tree_counts: DEFAULT_TREE_COUNTS.to_vec(),
            noise: NoiseSettings::default(),
            energy: EnergySettings::default(),
            skip_existing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.cv.folds,
            repeats: self.cv.repeats,
            seed: self.seeds.cv,
            aggregation: self.cv.aggregation,
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Extract { .. } => "extract",
            Command::Cv { .. } => "cv",
            Command::Sweep { .. } => "sweep",
            Command::TreeSweep { .. } => "tree-sweep",
            Command::NoiseSweep { .. } => "noise-sweep",
            Command::EnergyEval { .. } => "energy-eval",
        }
    }
}

/// Recursively overlays `patch` onto `base`; objects merge, anything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_config_file(path: &Path) -> Result<Value, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !v.is_object() {
        return Err(UsageError(format!("config {} must hold a JSON object", path.display())));
    }
    Ok(v)
}

fn apply_descriptor(cfg: &mut ExperimentConfig, d: &DescriptorArgs) {
    if let Some(b) = d.bins {
        cfg.descriptor.bins = b;
    }
    if let Some(r) = d.radius {
        cfg.descriptor.radius = r;
    }
    if let Some(s) = d.stats {
        cfg.descriptor.include_stats = s == Toggle::On;
    }
}

fn apply_model(cfg: &mut ExperimentConfig, m: &ModelArgs) {
    if let Some(n) = m.trees {
        cfg.forest.n_trees = n;
    }
    if m.max_features.is_some() {
        cfg.forest.max_features = m.max_features;
    }
    if m.max_depth.is_some() {
        cfg.forest.max_depth = m.max_depth;
    }
    if let Some(n) = m.min_samples_split {
        cfg.forest.min_samples_split = n;
    }
    if let Some(k) = m.folds {
        cfg.cv.folds = k;
    }
    if let Some(r) = m.repeats {
        cfg.cv.repeats = r;
    }
    if let Some(a) = m.aggregate {
        cfg.cv.aggregation = match a {
            AggregateArg::Repetition => Aggregation::Repetition,
            AggregateArg::Fold => Aggregation::Fold,
        };
    }
}

fn apply_data(cfg: &mut ExperimentConfig, d: &DataArgs) {
    if d.dataset.is_some() {
        cfg.dataset = d.dataset.clone();
    }
    if let Some(n) = d.n_events {
        cfg.generator.n_events = n;
    }
}

/// Builds the resolved configuration for `cli` and checks it.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, UsageError> {
    let name = cli.command.name();
    let mut base = ExperimentConfig {
        command: name.to_string(),
        out: PathBuf::from("nuecls-out").join(if name == "generate" { "dataset" } else { name }),
        ..ExperimentConfig::default()
    };
    if cli.common.quick {
        base.quick = true;
        base.generator.n_events = QUICK_EVENTS;
        base.forest.n_trees = QUICK_TREES;
        base.cv.repeats = QUICK_REPEATS;
    }
    let mut value = serde_json::to_value(&base).expect("config serializes");
    if let Some(path) = &cli.common.config {
        merge(&mut value, read_config_file(path)?);
    }
    let mut cfg: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| UsageError(format!("invalid config: {e}")))?;
    cfg.command = name.to_string();

    let c = &cli.common;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    cfg.quick |= c.quick;

    match &cli.command {
        Command::Generate { n_events } => {
            if let Some(n) = n_events {
                cfg.generator.n_events = *n;
            }
        }
        Command::Extract { dataset, descriptor } => {
            cfg.dataset = Some(dataset.clone());
            apply_descriptor(&mut cfg, descriptor);
        }
        Command::Cv {
            data,
            descriptor,
            model,
            shuffle_labels,
        } => {
            apply_data(&mut cfg, data);
            apply_descriptor(&mut cfg, descriptor);
            apply_model(&mut cfg, model);
            cfg.shuffle_labels |= shuffle_labels;
        }
        Command::Sweep {
            data,
            model,
            bins_grid,
            radius_grid,
            stats_grid,
            skip_existing,
        } => {
            apply_data(&mut cfg, data);
            apply_model(&mut cfg, model);
            if let Some(b) = bins_grid {
                cfg.sweep.bins = b.clone();
            }
            if let Some(r) = radius_grid {
                cfg.sweep.radii = r.clone();
            }
            if let Some(s) = stats_grid {
                cfg.sweep.stats = s.iter().map(|&t| t == Toggle::On).collect();
            }
            cfg.skip_existing |= skip_existing;
        }
        Command::TreeSweep {
            data,
            descriptor,
            model,
            counts,
            skip_existing,
        } => {
            apply_data(&mut cfg, data);
            apply_descriptor(&mut cfg, descriptor);
            apply_model(&mut cfg, model);
            if let Some(c) = counts {
                cfg.tree_counts = c.clone();
            }
            cfg.skip_existing |= skip_existing;
        }
        Command::NoiseSweep {
            data,
            descriptor,
            model,
            levels,
            shared_offset,
            skip_existing,
        } => {
            apply_data(&mut cfg, data);
            apply_descriptor(&mut cfg, descriptor);
            apply_model(&mut cfg, model);
            if let Some(l) = levels {
                cfg.noise.levels = l.clone();
            }
            cfg.noise.shared_offset |= shared_offset;
            cfg.skip_existing |= skip_existing;
        }
        Command::EnergyEval {
            data,
            descriptor,
            model,
            edges,
            retrain_per_bin,
        } => {
            apply_data(&mut cfg, data);
            apply_descriptor(&mut cfg, descriptor);
            apply_model(&mut cfg, model);
            if let Some(e) = edges {
                cfg.energy.edges = e.clone();
            }
            cfg.energy.retrain_per_bin |= retrain_per_bin;
        }
    }

    cfg.seeds = Seeds::from_master(cfg.seed);
    cfg.generator.seed = cfg.seeds.generator;
    check(&cfg)?;
    Ok(cfg)
}

fn check(cfg: &ExperimentConfig) -> Result<(), UsageError> {
    let bad = |e: nuecls_core::Error| UsageError(e.to_string());
    if cfg.threads == Some(0) {
        return Err(UsageError("--threads must be at least 1".into()));
    }
    cfg.generator.validate().map_err(bad)?;
    cfg.descriptor.validate().map_err(bad)?;
    if cfg.forest.n_trees == 0 {
        return Err(UsageError("n_trees must be at least 1".into()));
    }
    if cfg.forest.min_samples_split < 2 {
        return Err(UsageError("min_samples_split must be at least 2".into()));
    }
    if cfg.forest.max_features == Some(0) {
        return Err(UsageError("max_features must be at least 1".into()));
    }
    if cfg.cv.folds < 2 {
        return Err(UsageError("folds must be at least 2".into()));
    }
    if cfg.cv.repeats == 0 {
        return Err(UsageError("repeats must be at least 1".into()));
    }
    match cfg.command.as_str() {
        "sweep" => {
            let g = &cfg.sweep;
            if g.bins.is_empty() || g.radii.is_empty() || g.stats.is_empty() {
                return Err(UsageError("sweep grids must be non-empty".into()));
            }
            for &b in &g.bins {
                for &r in &g.radii {
                    DescriptorConfig::new(b, r, true).map_err(bad)?;
                }
            }
        }
        "tree-sweep" => {
            if cfg.tree_counts.is_empty() || cfg.tree_counts.contains(&0) {
                return Err(UsageError("tree counts must be non-empty and positive".into()));
            }
        }
        "noise-sweep" if cfg.noise.levels.is_empty() => {
            return Err(UsageError("noise levels must be non-empty".into()));
        }
        "energy-eval" => {
            energy_bins(&cfg.energy.edges).map_err(bad)?;
        }
        _ => {}
    }
    Ok(())
}

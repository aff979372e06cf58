use std::fs;
use std::path::Path;

use anyhow::Context;
use nuecls_core::descriptor::{build_all, write_features_csv, DescriptorConfig, FeatureVector};
use nuecls_core::eval::{
    cross_validate_features, energy_bins, shuffle_labels, slice_by_energy, CvRun, EnergyBin,
};
use nuecls_core::event_model::{load_dataset, save_dataset, Dataset, Label};
use nuecls_core::synthgen::{generate_dataset, perturb_dataset};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ForestSettings};
use crate::report::{
    read_rows, roc_rows, summary_line, write_json, write_roc_csv, write_slice_csv, Appender, BinReport, CvReport,
    DatasetInfo, EnergyReport, MetricReport, SliceRow, REPORT_FORMAT, REPORT_VERSION,
};
use crate::svg::LineChart;
use crate::{CliError, UsageError, RESOLVED_CONFIG};

type CmdResult = Result<(), CliError>;

pub fn dispatch(cfg: &ExperimentConfig) -> CmdResult {
    prepare_out(cfg)?;
    match cfg.command.as_str() {
        "generate" => generate(cfg),
        "extract" => extract(cfg),
        "cv" => cv(cfg),
        "sweep" => sweep(cfg),
        "tree-sweep" => tree_sweep(cfg),
        "noise-sweep" => noise_sweep(cfg),
        "energy-eval" => energy_eval(cfg),
        other => Err(UsageError(format!("unknown command {other}")).into()),
    }
}

/// Creates the output directory and records the resolved configuration.
/// Failure here means the output location is unusable, a usage error.
fn prepare_out(cfg: &ExperimentConfig) -> Result<(), UsageError> {
    let unusable = |e: std::io::Error| UsageError(format!("cannot write to {}: {e}", cfg.out.display()));
    fs::create_dir_all(&cfg.out).map_err(unusable)?;
    let mut text = serde_json::to_string_pretty(cfg).expect("config serializes");
    text.push('\n');
    fs::write(cfg.out.join(RESOLVED_CONFIG), text).map_err(unusable)
}

fn load_or_generate(cfg: &ExperimentConfig) -> Result<(Dataset, String), CliError> {
    match &cfg.dataset {
        Some(dir) => {
            let d = load_dataset(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
            Ok((d, dir.display().to_string()))
        }
        None => Ok((generate_dataset(&cfg.generator)?, "generated".into())),
    }
}

fn features(cfg: &ExperimentConfig, events: &Dataset, desc: &DescriptorConfig) -> Result<Vec<FeatureVector>, CliError> {
    let mut feats = build_all(&events.events, desc)?;
    if cfg.shuffle_labels {
        let labels: Vec<bool> = feats.iter().map(|f| f.label.is_positive()).collect();
        for (f, l) in feats.iter_mut().zip(shuffle_labels(&labels, cfg.seeds.label_shuffle)) {
            f.label = if l { Label::Positive } else { Label::Negative };
        }
    }
    Ok(feats)
}

fn run_cv(cfg: &ExperimentConfig, feats: &[FeatureVector], forest: ForestSettings) -> Result<CvRun, CliError> {
    Ok(cross_validate_features(feats, &forest.config(), &cfg.cv_config())?)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn generate(cfg: &ExperimentConfig) -> CmdResult {
    let d = generate_dataset(&cfg.generator)?;
    save_dataset(&d, &cfg.out)?;
    let (p, n) = d.class_counts();
    println!(
        "generated {} events ({p} positive, {n} negative), seed {}, in {}",
        d.events.len(),
        cfg.generator.seed,
        cfg.out.display()
    );
    Ok(())
}

fn extract(cfg: &ExperimentConfig) -> CmdResult {
    let (d, _) = load_or_generate(cfg)?;
    let feats = features(cfg, &d, &cfg.descriptor)?;
    let path = cfg.out.join("features.csv");
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_features_csv(std::io::BufWriter::new(file), &cfg.descriptor, &feats)
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "wrote {} feature vectors of length {} to {}",
        feats.len(),
        cfg.descriptor.feature_len(),
        path.display()
    );
    Ok(())
}

fn cv(cfg: &ExperimentConfig) -> CmdResult {
    let (d, source) = load_or_generate(cfg)?;
    let feats = features(cfg, &d, &cfg.descriptor)?;
    let run = run_cv(cfg, &feats, cfg.forest)?;
    let report = CvReport::new(cfg, &cfg.descriptor, cfg.forest, DatasetInfo::new(&d, &source), &run)?;
    write_json(&cfg.out.join("report.json"), &report)?;
    write_roc_csv(&cfg.out.join("roc.csv"), &report.roc)?;
    let mut chart = LineChart::roc("Pooled out-of-fold ROC");
    chart.push(
        format!("AUC {:.4}", report.auc.mean),
        report.roc.iter().map(|r| (r.fpr, r.tpr)).collect(),
    );
    write_text(&cfg.out.join("roc.svg"), &chart.render())?;
    println!("{}", report.summary_line());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SweepRow {
    bins: usize,
    radius: f64,
    stats: String,
    auc_mean: f64,
    auc_std: Option<f64>,
    acc_mean: f64,
    acc_std: Option<f64>,
}

const SWEEP_HEADER: [&str; 7] = ["bins", "radius", "stats", "auc_mean", "auc_std", "acc_mean", "acc_std"];

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn sweep(cfg: &ExperimentConfig) -> CmdResult {
    let (d, source) = load_or_generate(cfg)?;
    let path = cfg.out.join("sweep.csv");
    let existing: Vec<SweepRow> = if cfg.skip_existing { read_rows(&path)? } else { Vec::new() };
    let mut table = Appender::open(&path, &SWEEP_HEADER, !cfg.skip_existing)?;
    let mut rows = Vec::new();
    for &bins in &cfg.sweep.bins {
        for &radius in &cfg.sweep.radii {
            for &stats in &cfg.sweep.stats {
                let found = existing
                    .iter()
                    .find(|r| r.bins == bins && r.radius == radius && r.stats == on_off(stats));
                if let Some(r) = found {
                    eprintln!("skipping B={bins} R={radius} stats={}: already in {}", r.stats, path.display());
                    rows.push(r.clone());
                    continue;
                }
                let desc = DescriptorConfig::new(bins, radius, stats)?;
                let feats = features(cfg, &d, &desc)?;
                let run = run_cv(cfg, &feats, cfg.forest)?;
                let report = CvReport::new(cfg, &desc, cfg.forest, DatasetInfo::new(&d, &source), &run)?;
                let row = SweepRow {
                    bins,
                    radius,
                    stats: on_off(stats).into(),
                    auc_mean: report.auc.mean,
                    auc_std: report.auc.std,
                    acc_mean: report.accuracy.mean,
                    acc_std: report.accuracy.std,
                };
                eprintln!("B={bins} R={radius} stats={}: {}", row.stats, report.summary_line());
                table.push(&row)?;
                rows.push(row);
            }
        }
    }

    let mut chart = LineChart::new("AUC by descriptor setting", "Radius (pixels)", "Mean AUC");
    chart.log_x = true;
    for &stats in &cfg.sweep.stats {
        for &bins in &cfg.sweep.bins {
            let pts = rows
                .iter()
                .filter(|r| r.bins == bins && r.stats == on_off(stats))
                .map(|r| (r.radius, r.auc_mean))
                .collect();
            chart.push(format!("B={bins}, stats {}", on_off(stats)), pts);
        }
    }
    write_text(&cfg.out.join("sweep.svg"), &chart.render())?;

    let best = rows
        .iter()
        .fold(None::<&SweepRow>, |b, r| match b {
            Some(b) if b.auc_mean >= r.auc_mean => Some(b),
            _ => Some(r),
        })
        .expect("grid is non-empty");
    println!(
        "best: bins={} radius={} stats={} AUC {:.4}±{} ACC {:.4}±{}",
        best.bins,
        best.radius,
        best.stats,
        best.auc_mean,
        fmt_opt(best.auc_std),
        best.acc_mean,
        fmt_opt(best.acc_std)
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TreeRow {
    n_trees: usize,
    auc_mean: f64,
    auc_std: Option<f64>,
    acc_mean: f64,
    acc_std: Option<f64>,
}

fn tree_sweep(cfg: &ExperimentConfig) -> CmdResult {
    let mut counts = cfg.tree_counts.clone();
    counts.sort_unstable();
    let before = counts.len();
    counts.dedup();
    if counts.len() < before {
        eprintln!(
            "warning: removed {} duplicate tree count(s); running {:?}",
            before - counts.len(),
            counts
        );
    }
    let (d, source) = load_or_generate(cfg)?;
    let feats = features(cfg, &d, &cfg.descriptor)?;
    let path = cfg.out.join("trees.csv");
    let existing: Vec<TreeRow> = if cfg.skip_existing { read_rows(&path)? } else { Vec::new() };
    let mut table = Appender::open(&path, &["n_trees", "auc_mean", "auc_std", "acc_mean", "acc_std"], !cfg.skip_existing)?;
    let mut rows = Vec::new();
    for &n in &counts {
        if let Some(r) = existing.iter().find(|r| r.n_trees == n) {
            eprintln!("skipping {n} trees: already in {}", path.display());
            rows.push(r.clone());
            continue;
        }
        let forest = ForestSettings { n_trees: n, ..cfg.forest };
        let run = run_cv(cfg, &feats, forest)?;
        let report = CvReport::new(cfg, &cfg.descriptor, forest, DatasetInfo::new(&d, &source), &run)?;
        eprintln!("{n} trees: {}", report.summary_line());
        let row = TreeRow {
            n_trees: n,
            auc_mean: report.auc.mean,
            auc_std: report.auc.std,
            acc_mean: report.accuracy.mean,
            acc_std: report.accuracy.std,
        };
        table.push(&row)?;
        rows.push(row);
    }
    let mut chart = LineChart::new("AUC by forest size", "Number of trees", "Mean AUC");
    chart.log_x = true;
    chart.push("AUC", rows.iter().map(|r| (r.n_trees as f64, r.auc_mean)).collect());
    write_text(&cfg.out.join("trees.svg"), &chart.render())?;
    for r in &rows {
        println!("{:>6} trees  AUC {:.4}±{}", r.n_trees, r.auc_mean, fmt_opt(r.auc_std));
    }
    Ok(())
}

fn noise_sweep(cfg: &ExperimentConfig) -> CmdResult {
    let (d, source) = load_or_generate(cfg)?;
    let mut reports = Vec::new();
    for &k in &cfg.noise.levels {
        let path = cfg.out.join(format!("noise_level_{k}.json"));
        if cfg.skip_existing && path.exists() {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let report: CvReport =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            eprintln!("skipping level {k}: {} exists", path.display());
            reports.push((k, report));
            continue;
        }
        let noisy = perturb_dataset(&d, k, cfg.seeds.piv_noise, cfg.noise.shared_offset);
        let feats = features(cfg, &noisy, &cfg.descriptor)?;
        let run = run_cv(cfg, &feats, cfg.forest)?;
        let mut report = CvReport::new(cfg, &cfg.descriptor, cfg.forest, DatasetInfo::new(&d, &source), &run)?;
        report.piv_noise_level = Some(k);
        write_json(&path, &report)?;
        eprintln!("level {k}: {}", report.summary_line());
        reports.push((k, report));
    }
    let rows: Vec<SliceRow> = reports
        .iter()
        .map(|(k, r)| SliceRow::from_metrics(k.to_string(), &r.auc, &r.accuracy))
        .collect();
    write_slice_csv(&cfg.out.join("noise.csv"), &rows)?;
    let mut chart = LineChart::roc("ROC by PIV noise level");
    for (k, r) in &reports {
        chart.push(
            format!("{k} px, AUC {:.4}", r.auc.mean),
            r.roc.iter().map(|p| (p.fpr, p.tpr)).collect(),
        );
    }
    write_text(&cfg.out.join("noise_roc.svg"), &chart.render())?;
    for (k, r) in &reports {
        println!("level {k}: {}", r.summary_line());
    }
    Ok(())
}

fn energy_eval(cfg: &ExperimentConfig) -> CmdResult {
    let bins = energy_bins(&cfg.energy.edges).map_err(|e| UsageError(e.to_string()))?;
    let (d, source) = load_or_generate(cfg)?;
    let feats = features(cfg, &d, &cfg.descriptor)?;
    let energies: Vec<f64> = feats.iter().map(|f| f.energy_gev).collect();
    let agg = cfg.cv.aggregation;
    let counts = |b: &EnergyBin| {
        let inside: Vec<&FeatureVector> = feats.iter().filter(|f| b.contains(f.energy_gev)).collect();
        let pos = inside.iter().filter(|f| f.label.is_positive()).count();
        (inside.len(), pos)
    };

    let (global, bin_reports) = if cfg.energy.retrain_per_bin {
        let mut out = Vec::new();
        for b in &bins {
            let (n, p) = counts(b);
            let subset: Vec<FeatureVector> = feats.iter().filter(|f| b.contains(f.energy_gev)).cloned().collect();
            let mut report = BinReport::from_slice(b, n, p, None, agg);
            if p >= cfg.cv.folds && n - p >= cfg.cv.folds {
                let run = run_cv(cfg, &subset, cfg.forest)?;
                report.auc = Some(MetricReport::new(&run.auc, agg));
                report.accuracy = Some(MetricReport::new(&run.accuracy, agg));
                report.roc = Some(roc_rows(&run.pooled_roc()?));
            } else {
                eprintln!("bin {}: too few events of one class for {} folds", b.label(), cfg.cv.folds);
            }
            out.push(report);
        }
        (None, out)
    } else {
        let run = run_cv(cfg, &feats, cfg.forest)?;
        let global = CvReport::new(cfg, &cfg.descriptor, cfg.forest, DatasetInfo::new(&d, &source), &run)?;
        let sliced = slice_by_energy(&run, &energies, &bins)?;
        let out = sliced
            .iter()
            .map(|(b, m)| {
                let (n, p) = counts(b);
                BinReport::from_slice(b, n, p, m.as_ref(), agg)
            })
            .collect();
        (Some(global), out)
    };

    let report = EnergyReport {
        format: format!("{REPORT_FORMAT}-energy"),
        version: REPORT_VERSION,
        mode: if cfg.energy.retrain_per_bin { "retrain" } else { "slice" }.into(),
        global,
        bins: bin_reports,
    };
    write_json(&cfg.out.join("energy_report.json"), &report)?;
    let rows: Vec<SliceRow> = report.bins.iter().map(BinReport::row).collect();
    write_slice_csv(&cfg.out.join("energy.csv"), &rows)?;

    let mut chart = LineChart::roc("ROC by energy bin");
    for b in &report.bins {
        if let (Some(roc), Some(auc)) = (&b.roc, &b.auc) {
            chart.push(
                format!("{} GeV, AUC {:.4}", b.slice, auc.mean),
                roc.iter().map(|p| (p.fpr, p.tpr)).collect(),
            );
        }
    }
    write_text(&cfg.out.join("energy_roc.svg"), &chart.render())?;

    if let Some(g) = &report.global {
        println!("global: {}", g.summary_line());
    }
    for b in &report.bins {
        match (&b.auc, &b.accuracy) {
            (Some(a), Some(c)) => println!("{} GeV ({} events): {}", b.slice, b.n_samples, summary_line(a, c)),
            _ => println!("{} GeV ({} events): absent", b.slice, b.n_samples),
        }
    }
    Ok(())
}

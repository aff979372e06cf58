//! ROC analysis and the repeated stratified cross-validation protocol.
//!
//! A sample is predicted positive when its score is `>= threshold`. The ROC
//! curve is swept over the distinct scores in descending order, starting from
//! a `+inf` sentinel at (0, 0); tied scores collapse into one point. The AUC is
//! the trapezoidal area under that curve, accumulated in integer counts so it
//! equals the Mann-Whitney statistic (ties counted half) up to one rounding.
//!
//! Cross-validation repeats a stratified k-fold partition `repeats` times.
//! Within a repetition every sample is scored exactly once, out of fold, and
//! the repetition's AUC and accuracy are computed on those pooled scores.
//! Reported spread is the sample standard deviation over repetitions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::descriptor::{build_all, DescriptorConfig, FeatureVector};
use crate::error::{Error, Result};
use crate::event_model::Dataset;
use crate::forest::{train_forest, ForestConfig, Matrix};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_pairs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    Ok(())
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let p = labels.iter().filter(|&&l| l).count();
    (p, labels.len() - p)
}

fn require_both_classes(labels: &[bool]) -> Result<(usize, usize)> {
    let (positives, negatives) = class_counts(labels);
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }
    Ok((positives, negatives))
}

pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// `(TP / (TP + FN), FP / (FP + TN))`.
pub fn tpr_fpr(c: &Confusion) -> Result<(f64, f64)> {
    if c.tp + c.fn_ == 0 {
        return Err(Error::UndefinedRate("no positive samples, TPR is 0/0"));
    }
    if c.fp + c.tn == 0 {
        return Err(Error::UndefinedRate("no negative samples, FPR is 0/0"));
    }
    Ok((
        c.tp as f64 / (c.tp + c.fn_) as f64,
        c.fp as f64 / (c.fp + c.tn) as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// `+inf` for the leading sentinel point.
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub positives: usize,
    pub negatives: usize,
    pub points: Vec<RocPoint>,
}

pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    check_pairs(scores, labels)?;
    let (positives, negatives) = require_both_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::with_capacity(scores.len() + 1);
    let point = |tp: usize, fp: usize, threshold: f64| RocPoint {
        fpr: fp as f64 / negatives as f64,
        tpr: tp as f64 / positives as f64,
        threshold,
        tp,
        fp,
    };
    points.push(point(0, 0, f64::INFINITY));
    let (mut tp, mut fp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(point(tp, fp, s));
    }
    Ok(RocCurve {
        positives,
        negatives,
        points,
    })
}

/// Exact rational AUC: `twice_area / (2 * P * N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AucRatio {
    pub twice_area: u128,
    pub twice_pairs: u128,
}

impl AucRatio {
    pub fn value(&self) -> f64 {
        self.twice_area as f64 / self.twice_pairs as f64
    }
}

impl RocCurve {
    /// Trapezoidal area in integer counts.
    pub fn area(&self) -> AucRatio {
        let twice_area = self
            .points
            .windows(2)
            .map(|w| (w[1].fp - w[0].fp) as u128 * (w[1].tp + w[0].tp) as u128)
            .sum();
        AucRatio {
            twice_area,
            twice_pairs: 2 * self.positives as u128 * self.negatives as u128,
        }
    }
}

pub fn auc_ratio(scores: &[f64], labels: &[bool]) -> Result<AucRatio> {
    Ok(roc_curve(scores, labels)?.area())
}

pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    Ok(auc_ratio(scores, labels)?.value())
}

/// Fraction of samples classified correctly at `threshold`.
pub fn accuracy_at(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check_pairs(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty set".into()));
    }
    let c = confusion(scores, labels, threshold);
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub fn accuracy(scores: &[f64], labels: &[bool]) -> Result<f64> {
    accuracy_at(scores, labels, DEFAULT_THRESHOLD)
}

/// Scores with their labels and per-sample metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub energy_gev: Vec<f64>,
    pub ids: Vec<String>,
}

impl ScoredSet {
    pub fn from_pairs(pairs: &[(f64, bool)]) -> Self {
        ScoredSet {
            scores: pairs.iter().map(|p| p.0).collect(),
            labels: pairs.iter().map(|p| p.1).collect(),
            energy_gev: vec![f64::NAN; pairs.len()],
            ids: (0..pairs.len()).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn confusion(&self, threshold: f64) -> Confusion {
        confusion(&self.scores, &self.labels, threshold)
    }

    pub fn roc(&self) -> Result<RocCurve> {
        roc_curve(&self.scores, &self.labels)
    }

    pub fn auc(&self) -> Result<f64> {
        auc(&self.scores, &self.labels)
    }

    pub fn accuracy(&self) -> Result<f64> {
        accuracy(&self.scores, &self.labels)
    }
}

/// Stratified assignment of samples to `k` folds.
///
/// Each class is shuffled and dealt round-robin; negatives continue the deal
/// where positives stopped, so fold sizes differ by at most one and each
/// fold's class counts are within one of the exact proportion.
pub fn stratified_folds(labels: &[bool], k: usize, rng: &mut rng::StreamRng) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Stratification(format!("need at least 2 folds, got {k}")));
    }
    let (p, n) = class_counts(labels);
    if p < k || n < k {
        return Err(Error::Stratification(format!(
            "{p} positive and {n} negative samples cannot fill {k} folds with both classes"
        )));
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let mut fold = vec![0; labels.len()];
    for (j, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = j % k;
    }
    Ok(fold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One metric per repetition from its pooled out-of-fold scores.
    #[default]
    Repetition,
    /// One metric per (repetition, fold).
    Fold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            repeats: 10,
            seed: 0,
            aggregation: Aggregation::Repetition,
        }
    }
}

/// Mean and sample standard deviation of a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub values: Vec<f64>,
    pub mean: f64,
    /// `None` with fewer than two values.
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(values: Vec<f64>) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
        Summary { values, mean, std }
    }

    pub fn std_or_zero(&self) -> f64 {
        self.std.unwrap_or(0.0)
    }
}

/// Out-of-fold results of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    pub folds: Vec<usize>,
    pub scores: Vec<f64>,
}

/// Everything produced by one cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRun {
    pub config: CvConfig,
    pub labels: Vec<bool>,
    pub repetitions: Vec<Repetition>,
    pub auc: Summary,
    pub accuracy: Summary,
}

/// Runs repeated stratified k-fold CV with a caller-supplied learner.
///
/// `fit_score(train, train_labels, test, test_indices, seed)` returns one
/// score per test row. `seed` is derived from `(cv seed, repetition, fold)`.
pub fn cross_validate_with<F>(x: &Matrix, labels: &[bool], cv: &CvConfig, fit_score: F) -> Result<CvRun>
where
    F: Fn(&Matrix, &[bool], &Matrix, &[usize], u64) -> Result<Vec<f64>>,
{
    if x.n_rows() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} labels",
            x.n_rows(),
            labels.len()
        )));
    }
    if cv.repeats == 0 {
        return Err(Error::InvalidInput("repeats must be at least 1".into()));
    }
    require_both_classes(labels)?;
    let mut repetitions = Vec::with_capacity(cv.repeats);
    let mut auc_values = Vec::new();
    let mut acc_values = Vec::new();
    for r in 0..cv.repeats {
        let folds = stratified_folds(labels, cv.folds, &mut rng::stream(cv.seed, &[tag::FOLDS, r as u64]))?;
        let mut scores = vec![f64::NAN; labels.len()];
        for f in 0..cv.folds {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] == f);
            let train = x.select_rows(&train_idx);
            let train_labels: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
            let test = x.select_rows(&test_idx);
            let seed = rng::derive_seed(cv.seed, &[tag::FOREST, r as u64, f as u64]);
            let fold_scores = fit_score(&train, &train_labels, &test, &test_idx, seed)?;
            if fold_scores.len() != test_idx.len() {
                return Err(Error::InvalidInput(format!(
                    "learner returned {} scores for {} test rows",
                    fold_scores.len(),
                    test_idx.len()
                )));
            }
            for (&i, s) in test_idx.iter().zip(fold_scores) {
                scores[i] = s;
            }
            if cv.aggregation == Aggregation::Fold {
                let s: Vec<f64> = test_idx.iter().map(|&i| scores[i]).collect();
                let l: Vec<bool> = test_idx.iter().map(|&i| labels[i]).collect();
                auc_values.push(auc(&s, &l)?);
                acc_values.push(accuracy(&s, &l)?);
            }
        }
        if cv.aggregation == Aggregation::Repetition {
            auc_values.push(auc(&scores, labels)?);
            acc_values.push(accuracy(&scores, labels)?);
        }
        repetitions.push(Repetition { folds, scores });
    }
    Ok(CvRun {
        config: *cv,
        labels: labels.to_vec(),
        repetitions,
        auc: Summary::of(auc_values),
        accuracy: Summary::of(acc_values),
    })
}

/// Repeated CV of the random forest on precomputed feature vectors.
pub fn cross_validate_features(features: &[FeatureVector], forest: &ForestConfig, cv: &CvConfig) -> Result<CvRun> {
    let rows: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    let x = Matrix::from_rows(&rows)?;
    let labels: Vec<bool> = features.iter().map(|f| f.label.is_positive()).collect();
    cross_validate_with(&x, &labels, cv, |train, y, test, _, seed| {
        let cfg = ForestConfig { seed, ..*forest };
        train_forest(train, y, &cfg)?.predict_matrix(test)
    })
}

/// Extracts descriptors once (they are per-event and label-free, so no fold
/// can leak into another) and cross-validates the forest on them.
pub fn cross_validate(
    dataset: &Dataset,
    descriptor: &DescriptorConfig,
    forest: &ForestConfig,
    cv: &CvConfig,
) -> Result<(Vec<FeatureVector>, CvRun)> {
    let features = build_all(&dataset.events, descriptor)?;
    let run = cross_validate_features(&features, forest, cv)?;
    Ok((features, run))
}

/// Returns `labels` permuted by a seeded shuffle.
pub fn shuffle_labels(labels: &[bool], seed: u64) -> Vec<bool> {
    let mut out = labels.to_vec();
    out.shuffle(&mut rng::stream(seed, &[tag::SHUFFLE]));
    out
}

impl CvRun {
    /// All repetitions' out-of-fold scores concatenated, with labels.
    pub fn pooled(&self) -> (Vec<f64>, Vec<bool>) {
        let scores = self.repetitions.iter().flat_map(|r| r.scores.iter().copied()).collect();
        let labels = self.repetitions.iter().flat_map(|_| self.labels.iter().copied()).collect();
        (scores, labels)
    }

    pub fn pooled_roc(&self) -> Result<RocCurve> {
        let (s, l) = self.pooled();
        roc_curve(&s, &l)
    }

    /// Metrics restricted to the samples where `keep` holds, aggregated per
    /// repetition. `None` when the subset lacks a class.
    pub fn restricted(&self, keep: &[bool]) -> Result<Option<SliceMetrics>> {
        if keep.len() != self.labels.len() {
            return Err(Error::InvalidInput("slice mask length differs from sample count".into()));
        }
        let labels: Vec<bool> = self.labels.iter().zip(keep).filter(|(_, &k)| k).map(|(&l, _)| l).collect();
        let (p, n) = class_counts(&labels);
        if p == 0 || n == 0 {
            return Ok(None);
        }
        let mut aucs = Vec::new();
        let mut accs = Vec::new();
        let mut pooled_scores = Vec::new();
        for rep in &self.repetitions {
            let s: Vec<f64> = rep.scores.iter().zip(keep).filter(|(_, &k)| k).map(|(&s, _)| s).collect();
            aucs.push(auc(&s, &labels)?);
            accs.push(accuracy(&s, &labels)?);
            pooled_scores.extend(s);
        }
        let pooled_labels: Vec<bool> = self.repetitions.iter().flat_map(|_| labels.iter().copied()).collect();
        Ok(Some(SliceMetrics {
            n_samples: labels.len(),
            n_positive: p,
            auc: Summary::of(aucs),
            accuracy: Summary::of(accs),
            roc: roc_curve(&pooled_scores, &pooled_labels)?,
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceMetrics {
    pub n_samples: usize,
    pub n_positive: usize,
    pub auc: Summary,
    pub accuracy: Summary,
    pub roc: RocCurve,
}

/// One energy bin; the last bin of a set is closed on the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBin {
    pub lo: f64,
    pub hi: f64,
    pub closed: bool,
}

impl EnergyBin {
    pub fn contains(&self, e: f64) -> bool {
        e >= self.lo && (e < self.hi || (self.closed && e == self.hi))
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.lo, self.hi)
    }
}

/// Bins `[e0, e1), [e1, e2), ..., [e_{n-1}, e_n]` from strictly increasing edges.
pub fn energy_bins(edges: &[f64]) -> Result<Vec<EnergyBin>> {
    if edges.len() < 2 {
        return Err(Error::InvalidInput("need at least two energy edges".into()));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "energy edges must be strictly increasing, got {edges:?}"
        )));
    }
    Ok(edges
        .windows(2)
        .enumerate()
        .map(|(i, w)| EnergyBin {
            lo: w[0],
            hi: w[1],
            closed: i == edges.len() - 2,
        })
        .collect())
}

pub const DEFAULT_ENERGY_EDGES: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const DEFAULT_NOISE_LEVELS: [u32; 6] = [0, 1, 2, 3, 4, 5];

/// Per-bin metrics from a run's out-of-fold scores.
pub fn slice_by_energy(run: &CvRun, energy_gev: &[f64], bins: &[EnergyBin]) -> Result<Vec<(EnergyBin, Option<SliceMetrics>)>> {
    bins.iter()
        .map(|b| {
            let keep: Vec<bool> = energy_gev.iter().map(|&e| b.contains(e)).collect();
            Ok((*b, run.restricted(&keep)?))
        })
        .collect()
}

/// Re-runs the full CV at each PIV noise level. Both training and test
/// events carry the noise; the CV seed is the same at every level.
pub fn noise_sweep(
    dataset: &Dataset,
    levels: &[u32],
    noise_seed: u64,
    shared_offset: bool,
    descriptor: &DescriptorConfig,
    forest: &ForestConfig,
    cv: &CvConfig,
) -> Result<Vec<(u32, CvRun)>> {
    levels
        .iter()
        .map(|&k| {
            let noisy = crate::synthgen::perturb_dataset(dataset, k, noise_seed, shared_offset);
            let (_, run) = cross_validate(&noisy, descriptor, forest, cv)?;
            Ok((k, run))
        })
        .collect()
}

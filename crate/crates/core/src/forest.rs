//! Random forest of CART trees grown on Gini impurity.
//!
//! Each tree sees a bootstrap sample of the training rows and, at every node,
//! a fresh random subset of `max_features` candidate features. Split
//! thresholds sit at midpoints between consecutive distinct values; rows with
//! `value <= threshold` go left. Ties in impurity decrease go to the lower
//! feature index, then the lower threshold. The forest score is the mean
//! positive fraction of the leaves reached (soft voting).
//!
//! Tree `i` draws from its own RNG stream derived from `(seed, i)`, so a
//! trained model does not depend on the number of worker threads.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag, StreamRng};

pub const MODEL_FORMAT: &str = "nuecls-forest";
pub const MODEL_VERSION: u64 = 1;

/// Dense feature matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = vec![0.0; rows.len() * n_cols];
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} features, expected {n_cols}",
                    r.len()
                )));
            }
            for (j, &v) in r.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite feature at row {i}, column {j}")));
                }
                data[j * rows.len() + i] = v;
            }
        }
        Ok(Matrix {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols).map(|j| self.data[j * self.n_rows + i]).collect()
    }

    /// Rows selected by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for j in 0..self.n_cols {
            let col = self.column(j);
            data.extend(idx.iter().map(|&i| col[i]));
        }
        Matrix {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    /// FNV-1a over shape, feature bits and labels.
    pub fn fingerprint(&self, labels: &[bool]) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(&(self.n_rows as u64).to_le_bytes());
        eat(&(self.n_cols as u64).to_le_bytes());
        for v in &self.data {
            eat(&v.to_bits().to_le_bytes());
        }
        for &l in labels {
            eat(&[l as u8]);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 1000,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_max_features(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidInput("n_trees must be at least 1".into()));
        }
        let mf = self.resolved_max_features(d);
        if mf == 0 || mf > d {
            return Err(Error::InvalidInput(format!(
                "max_features must lie in 1..={d}, got {mf}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        positive_fraction: f64,
        n_samples: usize,
    },
}

impl TreeNode {
    /// Positive fraction of the leaf `x` is routed to.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf {
                    positive_fraction, ..
                } => return *positive_fraction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    fn check(&self, d: usize) -> std::result::Result<(), String> {
        match self {
            TreeNode::Leaf {
                positive_fraction, ..
            } => {
                if (0.0..=1.0).contains(positive_fraction) {
                    Ok(())
                } else {
                    Err(format!("leaf fraction {positive_fraction} outside [0, 1]"))
                }
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= d {
                    return Err(format!("split on feature {feature} but model has {d} features"));
                }
                if !threshold.is_finite() {
                    return Err("non-finite threshold".into());
                }
                left.check(d)?;
                right.check(d)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Gini impurity `1 - p1^2 - p0^2` of a node with `pos` positives out of `n`.
#[inline]
pub fn gini(pos: usize, n: usize) -> f64 {
    let p1 = pos as f64 / n as f64;
    let p0 = (n - pos) as f64 / n as f64;
    1.0 - p1 * p1 - p0 * p0
}

#[inline]
fn impurity_decrease(n: usize, pos: usize, n_left: usize, pos_left: usize) -> f64 {
    let n_right = n - n_left;
    let pos_right = pos - pos_left;
    gini(pos, n)
        - (n_left as f64 / n as f64) * gini(pos_left, n_left)
        - (n_right as f64 / n as f64) * gini(pos_right, n_right)
}

/// Split quality as the exact fraction `num / den` with
/// `num = (pL^2 + qL^2) nR + (pR^2 + qR^2) nL` and `den = nL nR`, where p and q
/// count the two classes. It orders splits exactly as the impurity decrease
/// does, without rounding, so equal decreases compare equal.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(n: usize, pos: usize, n_left: usize, pos_left: usize) -> Self {
        let sq = |a: usize| (a as u128) * (a as u128);
        let (nl, nr) = (n_left, n - n_left);
        let (pr, ql, qr) = (pos - pos_left, n_left - pos_left, nr - (pos - pos_left));
        Purity {
            num: (sq(pos_left) + sq(ql)) * nr as u128 + (sq(pr) + sq(qr)) * nl as u128,
            den: nl as u128 * nr as u128,
        }
    }

    fn parent(n: usize, pos: usize) -> Self {
        let sq = |a: usize| (a as u128) * (a as u128);
        Purity {
            num: sq(pos) + sq(n - pos),
            den: n as u128,
        }
    }

    fn beats(self, other: Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

/// Features replaced by their dense rank within the training set.
///
/// Split search only needs the order of values, so nodes sort small integer
/// keys; real thresholds are recovered from `values` afterwards.
struct Ranked {
    n_rows: usize,
    ranks: Vec<u32>,
    values: Vec<Vec<f64>>,
}

impl Ranked {
    fn new(m: &Matrix) -> Self {
        let n = m.n_rows();
        let mut ranks = vec![0u32; n * m.n_cols()];
        let mut values = Vec::with_capacity(m.n_cols());
        let mut order: Vec<u32> = (0..n as u32).collect();
        for j in 0..m.n_cols() {
            let col = m.column(j);
            order.sort_unstable_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            let dst = &mut ranks[j * n..(j + 1) * n];
            let mut uniq: Vec<f64> = Vec::new();
            for &i in &order {
                let v = col[i as usize];
                if uniq.last().is_none_or(|&last| last < v) {
                    uniq.push(v);
                }
                dst[i as usize] = (uniq.len() - 1) as u32;
            }
            values.push(uniq);
        }
        Ranked {
            n_rows: n,
            ranks,
            values,
        }
    }

    #[inline]
    fn column(&self, j: usize) -> &[u32] {
        &self.ranks[j * self.n_rows..(j + 1) * self.n_rows]
    }
}

/// Best Gini split of `rows` over `candidates`, or `None` when no split
/// lowers impurity.
pub fn best_split<R: AsRef<[f64]>>(rows: &[R], labels: &[bool], candidates: &[usize]) -> Result<Option<Split>> {
    if rows.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let m = Matrix::from_rows(rows)?;
    if let Some(&bad) = candidates.iter().find(|&&f| f >= m.n_cols()) {
        return Err(Error::InvalidInput(format!("candidate feature {bad} out of range")));
    }
    let ranked = Ranked::new(&m);
    let y: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
    let idx: Vec<u32> = (0..m.n_rows() as u32).collect();
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    cands.dedup();
    let mut buf = Vec::new();
    Ok(find_split(&ranked, &y, &idx, &cands, &mut buf).map(|(s, _)| s))
}

/// Returns the split and the highest rank routed left. The threshold is the
/// midpoint of the two closest values present in the node on either side. `candidates` must be
/// sorted ascending for the tie-break order to hold.
fn find_split(m: &Ranked, y: &[u8], idx: &[u32], candidates: &[usize], keys: &mut Vec<u32>) -> Option<(Split, u32)> {
    let n = idx.len();
    if n < 2 {
        return None;
    }
    let pos: usize = idx.iter().map(|&i| y[i as usize] as usize).sum();
    if pos == 0 || pos == n {
        return None;
    }
    let mut best: Option<(usize, u32, u32, usize, usize)> = None;
    let mut best_purity = Purity::parent(n, pos);
    for &f in candidates {
        let col = m.column(f);
        keys.clear();
        keys.extend(idx.iter().map(|&i| (col[i as usize] << 1) | y[i as usize] as u32));
        keys.sort_unstable();
        let mut pos_left = 0usize;
        for k in 0..n - 1 {
            pos_left += (keys[k] & 1) as usize;
            let (lo, hi) = (keys[k] >> 1, keys[k + 1] >> 1);
            if lo == hi {
                continue;
            }
            let purity = Purity::of(n, pos, k + 1, pos_left);
            if purity.beats(best_purity) {
                best_purity = purity;
                best = Some((f, lo, hi, k + 1, pos_left));
            }
        }
    }
    best.map(|(feature, rank, next, n_left, pos_left)| {
        let gain = impurity_decrease(n, pos, n_left, pos_left);
        let vals = &m.values[feature];
        let (lo, hi) = (vals[rank as usize], vals[next as usize]);
        let mut threshold = (lo + hi) / 2.0;
        if !threshold.is_finite() {
            threshold = lo + (hi - lo) / 2.0;
        }
        if threshold >= hi {
            threshold = lo;
        }
        (
            Split {
                feature,
                threshold,
                impurity_decrease: gain,
            },
            rank,
        )
    })
}

struct Grower<'a> {
    m: &'a Ranked,
    y: &'a [u8],
    max_features: usize,
    min_samples_split: usize,
    max_depth: Option<usize>,
    keys: Vec<u32>,
    cands: Vec<usize>,
}

impl Grower<'_> {
    fn grow(&mut self, idx: &mut [u32], depth: usize, rng: &mut StreamRng) -> TreeNode {
        let n = idx.len();
        let pos: usize = idx.iter().map(|&i| self.y[i as usize] as usize).sum();
        let leaf = TreeNode::Leaf {
            positive_fraction: pos as f64 / n as f64,
            n_samples: n,
        };
        if pos == 0 || pos == n || n < self.min_samples_split || self.max_depth.is_some_and(|d| depth >= d) {
            return leaf;
        }
        self.cands.clear();
        self.cands
            .extend(index::sample(rng, self.m.values.len(), self.max_features).into_iter());
        self.cands.sort_unstable();
        let Some((split, rank)) = find_split(self.m, self.y, idx, &self.cands, &mut self.keys) else {
            return leaf;
        };
        let col = self.m.column(split.feature);
        let mut mid = 0;
        for k in 0..n {
            if col[idx[k] as usize] <= rank {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Grows one tree on a bootstrap sample of `m`.
pub fn train_tree(m: &Matrix, labels: &[bool], rng: &mut StreamRng, cfg: &ForestConfig) -> Result<TreeNode> {
    check_training_input(m, labels, cfg)?;
    let y: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
    Ok(train_tree_inner(&Ranked::new(m), &y, rng, cfg))
}

fn train_tree_inner(m: &Ranked, y: &[u8], rng: &mut StreamRng, cfg: &ForestConfig) -> TreeNode {
    let n = m.n_rows;
    let mut boot: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
    let mut g = Grower {
        m,
        y,
        max_features: cfg.resolved_max_features(m.values.len()),
        min_samples_split: cfg.min_samples_split,
        max_depth: cfg.max_depth,
        keys: Vec::with_capacity(n),
        cands: Vec::new(),
    };
    g.grow(&mut boot, 0, rng)
}

fn check_training_input(m: &Matrix, labels: &[bool], cfg: &ForestConfig) -> Result<()> {
    if m.n_rows() == 0 {
        return Err(Error::Training("empty training set".into()));
    }
    if m.n_cols() == 0 {
        return Err(Error::Training("no features".into()));
    }
    if labels.len() != m.n_rows() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} labels",
            m.n_rows(),
            labels.len()
        )));
    }
    cfg.validate(m.n_cols())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub n_samples: usize,
    pub dataset_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub n_features: usize,
    pub meta: TrainingMeta,
    pub trees: Vec<TreeNode>,
}

pub fn train_forest(m: &Matrix, labels: &[bool], cfg: &ForestConfig) -> Result<ForestModel> {
    check_training_input(m, labels, cfg)?;
    let y: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
    let ranked = Ranked::new(m);
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(cfg.seed, &[tag::TREE, i as u64]);
            train_tree_inner(&ranked, &y, &mut rng, cfg)
        })
        .collect();
    Ok(ForestModel {
        config: *cfg,
        n_features: m.n_cols(),
        meta: TrainingMeta {
            seed: cfg.seed,
            n_samples: m.n_rows(),
            dataset_fingerprint: m.fingerprint(labels),
        },
        trees,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u64,
    #[serde(flatten)]
    model: ForestModel,
}

impl ForestModel {
    /// Mean leaf positive fraction over trees.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "feature row has length {}, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.score_unchecked(x))
    }

    // Running mean: a forest of identical trees reproduces the tree score exactly.
    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let mut mean = 0.0;
        for (k, t) in self.trees.iter().enumerate() {
            mean += (t.score(x) - mean) / (k + 1) as f64;
        }
        mean
    }

    /// Scores every row of `m`, in parallel.
    pub fn predict_matrix(&self, m: &Matrix) -> Result<Vec<f64>> {
        if m.n_cols() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "matrix has {} features, model expects {}",
                m.n_cols(),
                self.n_features
            )));
        }
        Ok((0..m.n_rows())
            .into_par_iter()
            .map(|i| self.score_unchecked(&m.row(i)))
            .collect())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: serde_json::Value = parse_deep(text)?;
        let format = header.get("format").and_then(|v| v.as_str());
        if format != Some(MODEL_FORMAT) {
            return Err(Error::Model(format!("not a {MODEL_FORMAT} file")));
        }
        let version = header.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "model version {version}, expected {MODEL_VERSION}"
            )));
        }
        let file: ModelFile = parse_deep(text)?;
        let m = file.model;
        if m.trees.len() != m.config.n_trees {
            return Err(Error::Model(format!(
                "config lists {} trees, file has {}",
                m.config.n_trees,
                m.trees.len()
            )));
        }
        for t in &m.trees {
            t.check(m.n_features).map_err(Error::Model)?;
        }
        Ok(m)
    }
}

fn parse_deep<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let v = T::deserialize(&mut de).map_err(|e| Error::Model(format!("parse error: {e}")))?;
    de.end().map_err(|e| Error::Model(format!("parse error: {e}")))?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_split() {
        let rows = [[1.0], [3.0]];
        let s = best_split(&rows, &[false, true], &[0]).unwrap().unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.0);
        assert_eq!(s.impurity_decrease, 0.5);
    }

    #[test]
    fn pure_or_constant_nodes_have_no_split() {
        let rows = [[1.0], [3.0], [5.0]];
        assert!(best_split(&rows, &[true; 3], &[0]).unwrap().is_none());
        let rows = [[2.0], [2.0]];
        assert!(best_split(&rows, &[true, false], &[0]).unwrap().is_none());
    }

    #[test]
    fn tie_goes_to_lower_feature_then_threshold() {
        // features 0 and 1 separate equally well; 2 is a duplicate of 1
        let rows = [[0.0, 5.0, 5.0], [1.0, 6.0, 6.0], [2.0, 7.0, 7.0], [3.0, 8.0, 8.0]];
        let y = [false, false, true, true];
        let s = best_split(&rows, &y, &[2, 1]).unwrap().unwrap();
        assert_eq!((s.feature, s.threshold), (1, 6.5));
        let s = best_split(&rows, &y, &[0, 1, 2]).unwrap().unwrap();
        assert_eq!((s.feature, s.threshold), (0, 1.5));
        // symmetric labels: thresholds 0.5 and 2.5 tie, lower wins
        let s = best_split(&rows, &[true, false, false, true], &[0]).unwrap().unwrap();
        assert_eq!(s.threshold, 0.5);
    }

    #[test]
    fn single_sample_tree_is_a_leaf() {
        let m = Matrix::from_rows(&[[4.0, 1.0]]).unwrap();
        let t = train_tree(&m, &[true], &mut rng::stream(1, &[]), &ForestConfig::default()).unwrap();
        assert_eq!(
            t,
            TreeNode::Leaf {
                positive_fraction: 1.0,
                n_samples: 1
            }
        );
    }

    #[test]
    fn separable_1d_gives_depth_one_tree() {
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let cfg = ForestConfig {
            max_features: Some(1),
            ..Default::default()
        };
        for seed in 0..20 {
            let t = train_tree(&m, &y, &mut rng::stream(seed, &[]), &cfg).unwrap();
            assert_eq!(t.depth(), 1);
            let TreeNode::Split { threshold, left, right, .. } = &t else { unreachable!() };
            assert!(*threshold > 0.0 && *threshold < 19.0);
            // pure children: every bootstrap row is classified correctly
            assert!(matches!(**left, TreeNode::Leaf { positive_fraction, .. } if positive_fraction == 0.0));
            assert!(matches!(**right, TreeNode::Leaf { positive_fraction, .. } if positive_fraction == 1.0));
        }
    }

    #[test]
    fn leaf_fraction_forest() {
        let m = Matrix::from_rows(&[[1.0], [1.0], [1.0], [1.0]]).unwrap();
        let y = [true, true, true, false];
        let cfg = ForestConfig {
            n_trees: 1,
            ..Default::default()
        };
        let f = train_forest(&m, &y, &cfg).unwrap();
        let TreeNode::Leaf {
            positive_fraction, ..
        } = f.trees[0]
        else {
            panic!("constant feature must give a leaf")
        };
        assert_eq!(f.predict_proba(&[1.0]).unwrap(), positive_fraction);
        assert!(f.predict_proba(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn identical_trees_score_exactly() {
        let leaf = TreeNode::Leaf {
            positive_fraction: 0.1,
            n_samples: 10,
        };
        let f = ForestModel {
            config: ForestConfig {
                n_trees: 3,
                ..Default::default()
            },
            n_features: 1,
            meta: TrainingMeta {
                seed: 0,
                n_samples: 10,
                dataset_fingerprint: String::new(),
            },
            trees: vec![leaf; 3],
        };
        assert_eq!(f.predict_proba(&[0.0]).unwrap(), 0.1);
    }

    #[test]
    fn training_rejects_bad_input() {
        let empty: Vec<Vec<f64>> = vec![];
        let m = Matrix::from_rows(&empty).unwrap();
        assert!(matches!(train_forest(&m, &[], &ForestConfig::default()), Err(Error::Training(_))));
        let m = Matrix::from_rows(&[[1.0]]).unwrap();
        let bad = ForestConfig {
            max_features: Some(2),
            ..Default::default()
        };
        assert!(train_forest(&m, &[true], &bad).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn model_file_errors() {
        let m = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let f = train_forest(
            &m,
            &[false, false, true, true],
            &ForestConfig {
                n_trees: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let text = f.to_json();
        assert_eq!(ForestModel::from_json(&text).unwrap(), f);
        assert!(ForestModel::from_json(&text[..text.len() / 2]).is_err());
        let bumped = text.replace("\"version\":1", "\"version\":2");
        let err = ForestModel::from_json(&bumped).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
    }
}

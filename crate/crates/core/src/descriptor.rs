//! Polar charge-histogram descriptor.
//!
//! Each view is read in polar coordinates centred on its PIV. Pixels within
//! distance `R` (centre to centre, closed disc) are binned by angle into `B`
//! equal sectors and their charge is summed per sector. Angles are measured
//! from the +wire axis, counter-clockwise with rows pointing down, so a pixel
//! directly above the PIV sits at 90°. The PIV pixel itself has no angle and
//! is left out of every bin.
//!
//! The optional statistics are taken over the `B` bin values (not raw
//! pixels): min, max, population std, mean and sum, in that order.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{ensure_valid, Event, Label, ViewImage};

pub const N_STATS: usize = 5;

/// Sweep grid for the number of angular bins.
pub const SWEEP_BINS: [usize; 4] = [18, 36, 72, 180];
/// Sweep grid for the radius, in pixels.
pub const SWEEP_RADII: [f64; 5] = [2.0, 5.0, 10.0, 20.0, 50.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub bins: usize,
    pub radius: f64,
    pub include_stats: bool,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            bins: 36,
            radius: 10.0,
            include_stats: true,
        }
    }
}

impl DescriptorConfig {
    pub fn new(bins: usize, radius: f64, include_stats: bool) -> Result<Self> {
        let cfg = DescriptorConfig {
            bins,
            radius,
            include_stats,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::InvalidInput("descriptor needs at least one bin".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "descriptor radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// Features per view.
    pub fn view_len(&self) -> usize {
        self.bins + if self.include_stats { N_STATS } else { 0 }
    }

    /// Features per event: 2B, or 2(B+5) with statistics.
    pub fn feature_len(&self) -> usize {
        2 * self.view_len()
    }
}

/// Angular bin of a displacement from the PIV.
///
/// The displacement is folded into the first quadrant before `atan2`, so a
/// 90° rotation about the PIV moves a pixel by exactly `B/4` bins whenever
/// `4 | B`, with no dependence on floating-point rounding of the angle.
pub fn polar_bin_index(drow: i64, dcol: i64, bins: usize) -> Result<usize> {
    if drow == 0 && dcol == 0 {
        return Err(Error::InvalidInput("angle undefined at the PIV pixel".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be positive".into()));
    }
    Ok(bin_of(drow, dcol, bins))
}

#[inline]
fn bin_of(drow: i64, dcol: i64, bins: usize) -> usize {
    let (x, y) = (dcol, -drow);
    let (quarter, qx, qy) = if x > 0 && y >= 0 {
        (0, x, y)
    } else if x <= 0 && y > 0 {
        (1, y, -x)
    } else if x < 0 && y <= 0 {
        (2, -x, -y)
    } else {
        (3, -y, x)
    };
    let phi = (qy as f64).atan2(qx as f64).to_degrees();
    if bins % 4 == 0 {
        let per_quarter = bins / 4;
        let within = ((phi * bins as f64 / 360.0).floor() as usize).min(per_quarter - 1);
        quarter * per_quarter + within
    } else {
        let theta = 90.0 * quarter as f64 + phi;
        ((theta * bins as f64 / 360.0).floor() as usize).min(bins - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeHistogram {
    pub values: Vec<f64>,
    pub config: DescriptorConfig,
}

/// Angular charge histogram of one view around its PIV.
pub fn charge_histogram(view: &ViewImage, cfg: &DescriptorConfig) -> Result<ChargeHistogram> {
    cfg.validate()?;
    let problems = view.violations();
    if !problems.is_empty() {
        return Err(Error::InvalidInput(
            problems.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ));
    }
    Ok(histogram_unchecked(view, cfg))
}

/// Exact running sum as a list of non-overlapping partials (Shewchuk).
/// `value` is the correctly rounded total, so it does not depend on the
/// order in which terms were added.
#[derive(Debug, Clone, Default)]
struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(&top) = p.last() else {
            return 0.0;
        };
        let mut hi = top;
        let mut lo = 0.0;
        let mut n = p.len() - 1;
        while n > 0 {
            let x = hi;
            let y = p[n - 1];
            n -= 1;
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // Round half-even across the remaining partials.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

pub(crate) fn histogram_unchecked(view: &ViewImage, cfg: &DescriptorConfig) -> ChargeHistogram {
    let mut sums = vec![ExactSum::default(); cfg.bins];
    let reach = cfg.radius.floor() as i64;
    let r2 = cfg.radius * cfg.radius;
    let (prow, pcol) = (view.piv.row, view.piv.col);
    let row_lo = (prow - reach).max(0);
    let row_hi = (prow + reach).min(view.height as i64 - 1);
    let col_lo = (pcol - reach).max(0);
    let col_hi = (pcol + reach).min(view.width as i64 - 1);
    for row in row_lo..=row_hi {
        let drow = row - prow;
        for col in col_lo..=col_hi {
            let dcol = col - pcol;
            if drow == 0 && dcol == 0 {
                continue;
            }
            if ((drow * drow + dcol * dcol) as f64) > r2 {
                continue;
            }
            let q = view.get(row as usize, col as usize);
            if q != 0.0 {
                sums[bin_of(drow, dcol, cfg.bins)].add(q);
            }
        }
    }
    ChargeHistogram {
        values: sums.iter().map(ExactSum::value).collect(),
        config: *cfg,
    }
}

/// Summary of a histogram's bin values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramStats {
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub mean: f64,
    pub sum: f64,
}

impl HistogramStats {
    pub fn to_array(self) -> [f64; N_STATS] {
        [self.min, self.max, self.std, self.mean, self.sum]
    }
}

pub fn histogram_stats(h: &ChargeHistogram) -> HistogramStats {
    let v = &h.values;
    let n = v.len() as f64;
    let sum: f64 = v.iter().sum();
    let mean = sum / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    HistogramStats {
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        std: var.sqrt(),
        mean,
        sum,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub id: String,
    pub label: Label,
    pub energy_gev: f64,
    /// `[ind2 hist, ind2 stats?, coll hist, coll stats?]`
    pub values: Vec<f64>,
}

pub fn build_descriptor(e: &Event, cfg: &DescriptorConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    ensure_valid(e)?;
    let mut values = Vec::with_capacity(cfg.feature_len());
    for (_, view) in e.views() {
        let h = histogram_unchecked(view, cfg);
        values.extend_from_slice(&h.values);
        if cfg.include_stats {
            values.extend_from_slice(&histogram_stats(&h).to_array());
        }
    }
    debug_assert_eq!(values.len(), cfg.feature_len());
    Ok(FeatureVector {
        id: e.id.clone(),
        label: e.label,
        energy_gev: e.energy_gev,
        values,
    })
}

/// Descriptors for every event, computed in parallel; order follows `events`.
pub fn build_all(events: &[Event], cfg: &DescriptorConfig) -> Result<Vec<FeatureVector>> {
    use rayon::prelude::*;
    events.par_iter().map(|e| build_descriptor(e, cfg)).collect()
}

/// Writes the feature matrix CSV: `id,label,energy_gev,f0,...,f{L-1}`.
pub fn write_features_csv<W: Write>(w: W, cfg: &DescriptorConfig, rows: &[FeatureVector]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string(), "label".into(), "energy_gev".into()];
    header.extend((0..cfg.feature_len()).map(|i| format!("f{i}")));
    out.write_record(&header)?;
    for fv in rows {
        let mut rec = Vec::with_capacity(3 + fv.values.len());
        rec.push(fv.id.clone());
        rec.push(fv.label.as_u8().to_string());
        rec.push(fv.energy_gev.to_string());
        rec.extend(fv.values.iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()
}

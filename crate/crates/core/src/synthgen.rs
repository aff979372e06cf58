//! Synthetic two-view events with the class signatures of the real data.
//!
//! Signal events carry 2 to 4 narrow prongs leaving the vertex at well
//! separated angles, one of them dominant. Background events carry a single
//! broad cascade. Each prong is a cloud of point deposits at uniform radius
//! and normally distributed angular offset around the prong direction. Both
//! views share the prong structure and charge split but get independent
//! direction jitter and deposit draws.
//!
//! Every event draws from its own stream derived from `(seed, index)`, so a
//! dataset is identical regardless of how generation is scheduled.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{Dataset, Event, Label, Pixel, ViewImage, VIEW_SIZE};
use crate::rng::{self, tag, StreamRng};

const MAX_SEPARATION_ATTEMPTS: usize = 1000;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span<T> {
    pub lo: T,
    pub hi: T,
}

impl<T> Span<T> {
    pub const fn new(lo: T, hi: T) -> Self {
        Span { lo, hi }
    }
}

impl Span<f64> {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    fn valid_positive(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo > 0.0 && self.lo <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub n_events: usize,
    pub positive_fraction: f64,
    pub energy_gev: Span<f64>,
    /// Charge units deposited per GeV.
    pub charge_per_gev: f64,
    pub signal_prongs: Span<usize>,
    /// Angular std of a signal prong, degrees.
    pub signal_width_deg: Span<f64>,
    /// Angular std of a background cascade, degrees.
    pub background_width_deg: Span<f64>,
    pub min_separation_deg: f64,
    /// Share of charge given to the dominant signal prong.
    pub dominant_share: Span<f64>,
    pub deposits_per_gev: f64,
    /// Maximum deposit distance from the vertex at 1 GeV, pixels.
    pub prong_length_px: f64,
    pub speckle_probability: f64,
    pub speckle_count: Span<usize>,
    /// Upper bound on the summed speckle charge, as a fraction of the event charge.
    pub speckle_fraction: f64,
    /// Per-view prong direction jitter, uniform in `[-j, j]` degrees.
    pub view_jitter_deg: f64,
    pub grid_size: usize,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_events: 7090,
            positive_fraction: 3283.0 / 7090.0,
            energy_gev: Span::new(0.2, 1.0),
            charge_per_gev: 50_000.0,
            signal_prongs: Span::new(2, 4),
            signal_width_deg: Span::new(1.5, 3.0),
            background_width_deg: Span::new(3.0, 5.0),
            min_separation_deg: 25.0,
            dominant_share: Span::new(0.5, 0.8),
            deposits_per_gev: 400.0,
            prong_length_px: 35.0,
            speckle_probability: 0.3,
            speckle_count: Span::new(1, 5),
            speckle_fraction: 0.005,
            view_jitter_deg: 15.0,
            grid_size: VIEW_SIZE,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad(format!("positive_fraction {} not in (0, 1)", self.positive_fraction));
        }
        if !self.energy_gev.valid_positive() {
            return bad("energy range must be positive and ordered".into());
        }
        for (name, v) in [
            ("charge_per_gev", self.charge_per_gev),
            ("min_separation_deg", self.min_separation_deg),
            ("deposits_per_gev", self.deposits_per_gev),
            ("prong_length_px", self.prong_length_px),
            ("speckle_fraction", self.speckle_fraction),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, s) in [
            ("signal_width_deg", self.signal_width_deg),
            ("background_width_deg", self.background_width_deg),
            ("dominant_share", self.dominant_share),
        ] {
            if !s.valid_positive() {
                return bad(format!("{name} must be a positive ordered range"));
            }
        }
        if self.dominant_share.hi > 1.0 {
            return bad("dominant_share must not exceed 1".into());
        }
        if self.signal_prongs.lo < 1 || self.signal_prongs.lo > self.signal_prongs.hi {
            return bad("signal_prongs must be a positive ordered range".into());
        }
        if self.speckle_count.lo < 1 || self.speckle_count.lo > self.speckle_count.hi {
            return bad("speckle_count must be a positive ordered range".into());
        }
        if !(0.0..=1.0).contains(&self.speckle_probability) {
            return bad("speckle_probability must lie in [0, 1]".into());
        }
        if !(self.view_jitter_deg.is_finite() && self.view_jitter_deg >= 0.0) {
            return bad("view_jitter_deg must be non-negative".into());
        }
        if self.grid_size == 0 {
            return bad("grid_size must be positive".into());
        }
        Ok(())
    }

    pub fn n_positive(&self) -> usize {
        (self.n_events as f64 * self.positive_fraction).round() as usize
    }

    fn piv(&self) -> Pixel {
        let c = (self.grid_size / 2) as i64;
        Pixel::new(c, c)
    }
}

struct Prong {
    angle_deg: f64,
    width_deg: f64,
    share: f64,
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn sample_prongs(label: Label, p: &GenParams, rng: &mut StreamRng) -> Result<Vec<Prong>> {
    if label == Label::Negative {
        return Ok(vec![Prong {
            angle_deg: rng.random_range(0.0..360.0),
            width_deg: p.background_width_deg.sample(rng),
            share: 1.0,
        }]);
    }
    let k = rng.random_range(p.signal_prongs.lo..=p.signal_prongs.hi);
    let mut angles = Vec::with_capacity(k);
    let mut attempts = 0;
    'outer: loop {
        attempts += 1;
        if attempts > MAX_SEPARATION_ATTEMPTS {
            return Err(Error::Generation(format!(
                "could not place {k} prongs {}° apart in {MAX_SEPARATION_ATTEMPTS} attempts; re-seed or relax min_separation_deg",
                p.min_separation_deg
            )));
        }
        angles.clear();
        for _ in 0..k {
            let a: f64 = rng.random_range(0.0..360.0);
            if angles.iter().any(|&b| angular_distance(a, b) < p.min_separation_deg) {
                continue 'outer;
            }
            angles.push(a);
        }
        break;
    }
    let dominant = if k == 1 { 1.0 } else { p.dominant_share.sample(rng) };
    let rest = if k == 1 { 0.0 } else { (1.0 - dominant) / (k - 1) as f64 };
    Ok(angles
        .into_iter()
        .enumerate()
        .map(|(i, angle_deg)| Prong {
            angle_deg,
            width_deg: p.signal_width_deg.sample(rng),
            share: if i == 0 { dominant } else { rest },
        })
        .collect())
}

fn render_view(prongs: &[Prong], energy: f64, p: &GenParams, rng: &mut StreamRng) -> ViewImage {
    let n = p.grid_size;
    let piv = p.piv();
    let mut view = ViewImage::zeros(n, n, piv);
    let total = p.charge_per_gev * energy;
    let reach = p.prong_length_px * energy;
    for prong in prongs {
        let dir = prong.angle_deg + rng.random_range(-p.view_jitter_deg..=p.view_jitter_deg);
        let m = ((prong.share * p.deposits_per_gev * energy).round() as usize).max(1);
        let q = prong.share * total / m as f64;
        let spread = Normal::new(0.0, prong.width_deg).expect("width validated");
        for _ in 0..m {
            // (0, reach]
            let r = reach * (1.0 - rng.random::<f64>());
            let theta = (dir + spread.sample(rng)).to_radians();
            let pix = Pixel::new(
                piv.row + (-r * theta.sin()).round() as i64,
                piv.col + (r * theta.cos()).round() as i64,
            );
            if view.contains(pix) {
                view.add(pix.row as usize, pix.col as usize, q);
            }
        }
    }
    if rng.random::<f64>() < p.speckle_probability {
        let count = rng.random_range(p.speckle_count.lo..=p.speckle_count.hi);
        let cap = p.speckle_fraction * total / count as f64;
        for _ in 0..count {
            let (row, col) = (rng.random_range(0..n), rng.random_range(0..n));
            let q = cap * (1.0 - rng.random::<f64>());
            view.add(row, col, q);
        }
    }
    view
}

/// One synthetic event with the given class and deposited energy.
pub fn generate_event(id: String, label: Label, energy_gev: f64, params: &GenParams, rng: &mut StreamRng) -> Result<Event> {
    if !(energy_gev >= params.energy_gev.lo && energy_gev <= params.energy_gev.hi) {
        return Err(Error::InvalidInput(format!(
            "energy {energy_gev} GeV outside [{}, {}]",
            params.energy_gev.lo, params.energy_gev.hi
        )));
    }
    let prongs = sample_prongs(label, params, rng)?;
    let ind2 = render_view(&prongs, energy_gev, params, rng);
    let coll = render_view(&prongs, energy_gev, params, rng);
    Ok(Event {
        id,
        label,
        energy_gev,
        ind2,
        coll,
    })
}

pub fn event_id(index: usize, n_events: usize) -> String {
    let width = n_events.saturating_sub(1).to_string().len().max(6);
    format!("evt{index:0width$}")
}

/// Generates `params.n_events` events with the configured class balance.
pub fn generate_dataset(params: &GenParams) -> Result<Dataset> {
    params.validate()?;
    let n = params.n_events;
    let n_pos = params.n_positive();
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_pos { Label::Positive } else { Label::Negative })
        .collect();
    rand::seq::SliceRandom::shuffle(&mut labels[..], &mut rng::stream(params.seed, &[tag::LABELS]));
    let events = labels
        .into_par_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut rng = rng::stream(params.seed, &[tag::EVENT, i as u64]);
            let energy = params.energy_gev.sample(&mut rng);
            generate_event(event_id(i, n), label, energy, params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let params_json = serde_json::to_value(params).expect("params serialize");
    Ok(Dataset::new(
        events,
        params.seed,
        params_json,
        Some("synthetic two-view events; prong model, not a physics simulation".into()),
    ))
}

/// Shifts each view's PIV by an independent offset drawn uniformly from
/// `[-k, k]` per axis, clamped to the grid. Charges are untouched.
pub fn perturb_piv(e: &Event, k: u32, rng: &mut StreamRng) -> Event {
    perturb(e, k, false, rng)
}

/// As [`perturb_piv`], but one offset is shared by both views.
pub fn perturb_piv_shared(e: &Event, k: u32, rng: &mut StreamRng) -> Event {
    perturb(e, k, true, rng)
}

fn perturb(e: &Event, k: u32, shared: bool, rng: &mut StreamRng) -> Event {
    let mut out = e.clone();
    if k == 0 {
        return out;
    }
    let k = k as i64;
    let draw = |rng: &mut StreamRng| (rng.random_range(-k..=k), rng.random_range(-k..=k));
    let first = draw(rng);
    let second = if shared { first } else { draw(rng) };
    for (view, (dr, dc)) in [(&mut out.ind2, first), (&mut out.coll, second)] {
        view.piv = Pixel::new(
            (view.piv.row + dr).clamp(0, view.height as i64 - 1),
            (view.piv.col + dc).clamp(0, view.width as i64 - 1),
        );
    }
    out
}

/// Applies PIV noise of level `k` to every event; event `i` uses the stream
/// `(seed, k, i)`. Level 0 returns an identical dataset.
pub fn perturb_dataset(d: &Dataset, k: u32, seed: u64, shared: bool) -> Dataset {
    let events = d
        .events
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut rng = rng::stream(seed, &[tag::PIV_NOISE, k as u64, i as u64]);
            perturb(e, k, shared, &mut rng)
        })
        .collect();
    Dataset {
        events,
        manifest: d.manifest.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_speckle() -> GenParams {
        GenParams {
            speckle_probability: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn background_charge_bookkeeping_is_exact() {
        let p = GenParams {
            grid_size: 201,
            ..no_speckle()
        };
        for seed in 0..20 {
            let e = generate_event("x".into(), Label::Negative, 0.5, &p, &mut rng::stream(seed, &[])).unwrap();
            assert_eq!(e.ind2.total_charge(), 25_000.0);
            assert_eq!(e.coll.total_charge(), 25_000.0);
        }
    }

    #[test]
    fn signal_charge_is_conserved_on_large_grid() {
        let p = GenParams {
            grid_size: 201,
            ..no_speckle()
        };
        for seed in 0..20 {
            let e = generate_event("x".into(), Label::Positive, 0.73, &p, &mut rng::stream(seed, &[])).unwrap();
            for (_, v) in e.views() {
                assert!((v.total_charge() - 36_500.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn speckle_stays_below_cap() {
        let p = GenParams {
            speckle_probability: 1.0,
            grid_size: 201,
            ..Default::default()
        };
        for seed in 0..20 {
            let e = generate_event("x".into(), Label::Negative, 0.5, &p, &mut rng::stream(seed, &[])).unwrap();
            let extra = e.ind2.total_charge() - 25_000.0;
            assert!(extra > 0.0 && extra <= 125.0 + 1e-9, "{extra}");
        }
    }

    #[test]
    fn separation_exhaustion_is_an_error() {
        let p = GenParams {
            signal_prongs: Span::new(4, 4),
            min_separation_deg: 100.0,
            ..Default::default()
        };
        let err = generate_event("x".into(), Label::Positive, 0.5, &p, &mut rng::stream(0, &[])).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn energy_outside_range_is_rejected() {
        let p = GenParams::default();
        assert!(generate_event("x".into(), Label::Positive, 1.5, &p, &mut rng::stream(0, &[])).is_err());
    }

    #[test]
    fn default_composition() {
        let p = GenParams::default();
        assert_eq!(p.n_positive(), 3283);
        assert_eq!(p.n_events - p.n_positive(), 3807);
    }

    #[test]
    fn small_dataset_ids_and_counts() {
        let d = generate_dataset(&GenParams {
            n_events: 10,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        d.validate().unwrap();
        assert_eq!(d.events.len(), 10);
        assert_eq!(d.manifest.n_positive, (10.0f64 * 3283.0 / 7090.0).round() as usize);
        assert_eq!(d.events[3].id, "evt000003");
    }

    #[test]
    fn perturb_level_zero_is_identity_and_clamps() {
        let d = generate_dataset(&GenParams {
            n_events: 4,
            ..Default::default()
        })
        .unwrap();
        let e = &d.events[0];
        assert_eq!(&perturb_piv(e, 0, &mut rng::stream(0, &[])), e);
        let mut corner = e.clone();
        corner.ind2.piv = Pixel::new(0, 100);
        for s in 0..200 {
            let p = perturb_piv(&corner, 5, &mut rng::stream(s, &[]));
            assert!(p.ind2.violations().is_empty() && p.coll.violations().is_empty());
            assert_eq!(p.ind2.charge, corner.ind2.charge);
        }
        let shared = perturb_piv_shared(e, 3, &mut rng::stream(9, &[]));
        assert_eq!(
            shared.ind2.piv.row - e.ind2.piv.row,
            shared.coll.piv.row - e.coll.piv.row
        );
    }
}

use nuecls_core::descriptor::{charge_histogram, DescriptorConfig};
use nuecls_core::event_model::{load_dataset, save_dataset, Label, Pixel, ViewImage, EVENTS_FILE};
use nuecls_core::rng::stream;
use nuecls_core::synthgen::{generate_dataset, generate_event, perturb_piv, perturb_piv_shared, GenParams};
use nuecls_core::event_model::Event;
use rand::Rng;
use std::collections::HashSet;

fn histograms(label: Label, n: usize) -> Vec<Vec<Vec<f64>>> {
    let params = GenParams::default();
    let cfg = DescriptorConfig::new(36, 10.0, false).unwrap();
    (0..n)
        .map(|i| {
            let mut rng = stream(77, &[label.as_u8() as u64, i as u64]);
            let energy = rng.random_range(0.2..=1.0);
            let e = generate_event(format!("e{i}"), label, energy, &params, &mut rng).unwrap();
            [&e.ind2, &e.coll]
                .iter()
                .map(|v| charge_histogram(v, &cfg).unwrap().values)
                .collect()
        })
        .collect()
}

/// Circular runs of bins at or above half the maximum.
fn half_max_runs(h: &[f64]) -> usize {
    let max = h.iter().cloned().fold(0.0, f64::max);
    let above: Vec<bool> = h.iter().map(|&v| v >= max / 2.0).collect();
    let starts = (0..h.len()).filter(|&b| above[b] && !above[(b + h.len() - 1) % h.len()]).count();
    if starts == 0 && above.iter().all(|&a| a) { 1 } else { starts }
}

/// Circular local maxima above 10% of the global maximum; a plateau counts once.
fn significant_maxima(h: &[f64]) -> usize {
    let n = h.len();
    let max = h.iter().cloned().fold(0.0, f64::max);
    let mut count = 0;
    for b in 0..n {
        if h[b] <= 0.1 * max || h[b] <= h[(b + n - 1) % n] {
            continue;
        }
        let mut j = (b + 1) % n;
        while h[j] == h[b] && j != b {
            j = (j + 1) % n;
        }
        if h[j] < h[b] {
            count += 1;
        }
    }
    count
}

#[test]
fn negative_events_have_one_broad_peak() {
    let hs = histograms(Label::Negative, 1000);
    let single = hs.iter().filter(|views| views.iter().all(|h| half_max_runs(h) == 1)).count();
    assert!(single >= 950, "{single} of 1000");
}

#[test]
fn positive_events_have_several_peaks() {
    let hs = histograms(Label::Positive, 1000);
    let multi = hs.iter().filter(|views| views.iter().all(|h| significant_maxima(h) >= 2)).count();
    assert!(multi >= 900, "{multi} of 1000");
}

#[test]
fn peak_counters_on_hand_built_histograms() {
    assert_eq!(half_max_runs(&[9.0, 1.0, 1.0, 8.0]), 1);
    assert_eq!(half_max_runs(&[9.0, 1.0, 8.0, 1.0]), 2);
    assert_eq!(significant_maxima(&[0.0, 5.0, 5.0, 0.0, 3.0, 0.0]), 2);
    assert_eq!(significant_maxima(&[0.0, 5.0, 0.0, 0.4, 0.0]), 1);
    assert_eq!(significant_maxima(&[2.0, 2.0, 2.0]), 0);
}

#[test]
fn energies_are_uniform() {
    let d = generate_dataset(&GenParams { seed: 5, ..GenParams::default() }).unwrap();
    let mut e: Vec<f64> = d.events.iter().map(|e| e.energy_gev).collect();
    e.sort_by(f64::total_cmp);
    let n = e.len() as f64;
    let ks = e
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x - 0.2) / 0.8;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.05, "KS {ks}");
    assert_eq!(d.class_counts(), (3283, 3807));
}

#[test]
fn same_seed_gives_byte_identical_events() {
    let params = GenParams { n_events: 40, seed: 9, ..GenParams::default() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    save_dataset(&generate_dataset(&params).unwrap(), a.path()).unwrap();
    save_dataset(&generate_dataset(&params).unwrap(), b.path()).unwrap();
    let fa = std::fs::read(a.path().join(EVENTS_FILE)).unwrap();
    assert_eq!(fa, std::fs::read(b.path().join(EVENTS_FILE)).unwrap());
    let back = load_dataset(a.path()).unwrap();
    for (x, y) in back.events.iter().zip(&generate_dataset(&params).unwrap().events) {
        assert_eq!((&x.id, x.label, x.energy_gev.to_bits()), (&y.id, y.label, y.energy_gev.to_bits()));
        for (u, v) in [(&x.ind2, &y.ind2), (&x.coll, &y.coll)] {
            assert_eq!(u.piv, v.piv);
            for (i, (a, b)) in u.charge.iter().zip(&v.charge).enumerate() {
                assert_eq!(a.to_bits(), b.to_bits(), "{} pixel {i}: {a} vs {b}", x.id);
            }
        }
    }
}

fn centred_event() -> Event {
    Event {
        id: "x".into(),
        label: Label::Positive,
        energy_gev: 0.5,
        ind2: ViewImage::zeros(101, 101, Pixel::new(50, 50)),
        coll: ViewImage::zeros(101, 101, Pixel::new(50, 50)),
    }
}

#[test]
fn piv_noise_covers_its_box_and_nothing_else() {
    let e = centred_event();
    let mut rng = stream(3, &[1]);
    let mut seen = HashSet::new();
    let mut differ = false;
    for _ in 0..10_000 {
        let p = perturb_piv(&e, 2, &mut rng);
        for v in [&p.ind2, &p.coll] {
            let d = (v.piv.row - 50, v.piv.col - 50);
            assert!(d.0.abs() <= 2 && d.1.abs() <= 2);
            seen.insert(d);
        }
        differ |= p.ind2.piv != p.coll.piv;
        assert_eq!(p.ind2.charge, e.ind2.charge);
    }
    assert_eq!(seen.len(), 25);
    assert!(differ);
}

#[test]
fn shared_offset_moves_views_together() {
    let e = centred_event();
    let mut rng = stream(4, &[1]);
    for _ in 0..1000 {
        let p = perturb_piv_shared(&e, 3, &mut rng);
        assert_eq!(p.ind2.piv, p.coll.piv);
    }
}

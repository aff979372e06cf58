use nuecls_core::descriptor::{
    build_descriptor, charge_histogram, polar_bin_index, DescriptorConfig, SWEEP_BINS, SWEEP_RADII,
};
use nuecls_core::event_model::{downsample_view, Event, Label, Pixel, ViewImage, CHUNK_WIRES, RAW_SAMPLES};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute force: every pixel, angle from atan2 in degrees, distance from sqrt.
fn oracle_histogram(v: &ViewImage, bins: usize, radius: f64) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for row in 0..v.height {
        for col in 0..v.width {
            let drow = row as f64 - v.piv.row as f64;
            let dcol = col as f64 - v.piv.col as f64;
            if (drow == 0.0 && dcol == 0.0) || (drow * drow + dcol * dcol).sqrt() > radius {
                continue;
            }
            let mut theta = (-drow).atan2(dcol).to_degrees();
            if theta < 0.0 {
                theta += 360.0;
            }
            let b = ((theta / (360.0 / bins as f64)).floor() as usize).min(bins - 1);
            h[b] += v.get(row, col);
        }
    }
    h
}

fn disc_charge(v: &ViewImage, radius: f64) -> f64 {
    let mut total = 0.0;
    for row in 0..v.height {
        for col in 0..v.width {
            let drow = row as f64 - v.piv.row as f64;
            let dcol = col as f64 - v.piv.col as f64;
            if (drow != 0.0 || dcol != 0.0) && (drow * drow + dcol * dcol).sqrt() <= radius {
                total += v.get(row, col);
            }
        }
    }
    total
}

/// Random view with charges on a 1/1024 grid so every partial sum is exact.
fn real_view(rng: &mut ChaCha8Rng, size: usize, piv: Pixel, density: f64) -> ViewImage {
    let mut v = ViewImage::zeros(size, size, piv);
    for q in v.charge.iter_mut() {
        if rng.random::<f64>() < density {
            *q = rng.random::<f64>() * 10f64.powi(rng.random_range(-3..4));
        }
    }
    v
}

fn dyadic_view(rng: &mut ChaCha8Rng, size: usize, piv: Pixel, density: f64) -> ViewImage {
    let mut v = ViewImage::zeros(size, size, piv);
    for q in v.charge.iter_mut() {
        if rng.random::<f64>() < density {
            *q = rng.random_range(1..4096) as f64 / 1024.0;
        }
    }
    v
}

#[test]
fn histogram_matches_brute_force_on_dense_view() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let mut v = ViewImage::zeros(11, 11, Pixel::new(5, 5));
        v.charge.iter_mut().for_each(|q| *q = rng.random::<f64>() * 10.0);
        let cfg = DescriptorConfig::new(8, 5.0, false).unwrap();
        let h = charge_histogram(&v, &cfg).unwrap().values;
        let o = oracle_histogram(&v, 8, 5.0);
        for (a, b) in h.iter().zip(&o) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{h:?} vs {o:?}");
        }
    }
}

#[test]
fn histogram_matches_brute_force_off_centre() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let piv = Pixel::new(rng.random_range(0..31), rng.random_range(0..31));
        let v = dyadic_view(&mut rng, 31, piv, 0.4);
        let bins = [18, 36, 72][rng.random_range(0..3)];
        let radius = rng.random_range(1.0..20.0);
        let h = charge_histogram(&v, &DescriptorConfig::new(bins, radius, false).unwrap()).unwrap();
        assert_eq!(h.values, oracle_histogram(&v, bins, radius));
    }
}

#[test]
fn bin_of_3_minus_4() {
    let theta = (-3.0f64).atan2(-4.0).to_degrees() + 360.0;
    assert_eq!(polar_bin_index(3, -4, 18).unwrap(), (theta / 20.0).floor() as usize);
}

#[test]
fn rotation_by_quarter_turn_shifts_bins() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let half = rng.random_range(3..26usize);
        let size = 2 * half + 1;
        let c = half as i64;
        let v = real_view(&mut rng, size, Pixel::new(c, c), 0.5);
        let mut rot = ViewImage::zeros(size, size, v.piv);
        for row in 0..size as i64 {
            for col in 0..size as i64 {
                let (drow, dcol) = (row - c, col - c);
                // 90° counter-clockwise in (x = dcol, y = -drow)
                let (nr, nc) = (c - dcol, c + drow);
                rot.charge[(nr as usize) * size + nc as usize] = v.get(row as usize, col as usize);
            }
        }
        let radius = rng.random_range(1.0..=half as f64);
        for bins in [36, 72, 180] {
            let cfg = DescriptorConfig::new(bins, radius, false).unwrap();
            let h = charge_histogram(&v, &cfg).unwrap().values;
            let hr = charge_histogram(&rot, &cfg).unwrap().values;
            for b in 0..bins {
                assert_eq!(hr[(b + bins / 4) % bins], h[b]);
            }
        }
    }
}

#[test]
fn conservation_over_sweep_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let piv = Pixel::new(rng.random_range(0..101), rng.random_range(0..101));
        let mut v = ViewImage::zeros(101, 101, piv);
        v.charge.iter_mut().for_each(|q| {
            if rng.random::<f64>() < 0.2 {
                *q = rng.random::<f64>() * 100.0
            }
        });
        for bins in SWEEP_BINS {
            for radius in SWEEP_RADII {
                let h = charge_histogram(&v, &DescriptorConfig::new(bins, radius, false).unwrap()).unwrap();
                let sum: f64 = h.values.iter().sum();
                let expected = disc_charge(&v, radius);
                assert!((sum - expected).abs() <= 1e-9 * expected.abs().max(1e-300));
            }
        }
    }
}

#[test]
fn feature_length_over_sweep_grid() {
    let e = Event {
        id: "a".into(),
        label: Label::Positive,
        energy_gev: 0.5,
        ind2: ViewImage::zeros(101, 101, Pixel::new(50, 50)),
        coll: ViewImage::zeros(101, 101, Pixel::new(50, 50)),
    };
    for bins in SWEEP_BINS {
        for radius in SWEEP_RADII {
            for stats in [true, false] {
                let fv = build_descriptor(&e, &DescriptorConfig::new(bins, radius, stats).unwrap()).unwrap();
                assert_eq!(fv.values.len(), if stats { 2 * (bins + 5) } else { 2 * bins });
            }
        }
    }
}

#[test]
fn downsample_matches_per_pixel_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let raw: Vec<f64> = (0..RAW_SAMPLES * CHUNK_WIRES).map(|_| rng.random::<f64>() * 50.0).collect();
    let out = downsample_view(&raw, RAW_SAMPLES, CHUNK_WIRES).unwrap();
    for r in 0..101 {
        for c in 0..101 {
            let mut s = 0.0;
            for k in 0..5 {
                s += raw[(5 * r + k) * CHUNK_WIRES + c];
            }
            assert_eq!(out[r * 101 + c], s);
        }
    }
    let total_in: f64 = raw.iter().sum();
    let total_out: f64 = out.iter().sum();
    assert!((total_in - total_out).abs() <= 1e-12 * total_in);
}

#[test]
fn downsample_conserves_dyadic_charge_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let raw: Vec<f64> = (0..RAW_SAMPLES * CHUNK_WIRES)
        .map(|_| rng.random_range(0..1024) as f64 / 64.0)
        .collect();
    let out = downsample_view(&raw, RAW_SAMPLES, CHUNK_WIRES).unwrap();
    assert_eq!(out.iter().sum::<f64>(), raw.iter().sum::<f64>());
}

fn small_view() -> impl Strategy<Value = ViewImage> {
    (3usize..16, 0u64..u64::MAX).prop_map(|(size, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let piv = Pixel::new(rng.random_range(0..size as i64), rng.random_range(0..size as i64));
        real_view(&mut rng, size, piv, 0.6)
    })
}

proptest! {
    #[test]
    fn histogram_monotone_in_radius(v in small_view(), r1 in 0.5f64..12.0, dr in 0.0f64..8.0, bins in 1usize..40) {
        let a = charge_histogram(&v, &DescriptorConfig::new(bins, r1, false).unwrap()).unwrap();
        let b = charge_histogram(&v, &DescriptorConfig::new(bins, r1 + dr, false).unwrap()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(x <= y);
        }
    }

    #[test]
    fn features_scale_with_charge(v in small_view(), a in 0.01f64..100.0, bins in 1usize..40, r in 0.5f64..10.0) {
        let mut scaled = v.clone();
        scaled.charge.iter_mut().for_each(|q| *q *= a);
        let e = |view: &ViewImage| Event { id: "p".into(), label: Label::Negative, energy_gev: 1.0, ind2: view.clone(), coll: view.clone() };
        let cfg = DescriptorConfig::new(bins, r, true).unwrap();
        let f = build_descriptor(&e(&v), &cfg).unwrap().values;
        let g = build_descriptor(&e(&scaled), &cfg).unwrap().values;
        for (x, y) in f.iter().zip(&g) {
            prop_assert!((x * a - y).abs() <= 1e-12 * (x * a).abs().max(1e-12));
        }
    }

    #[test]
    fn downsample_is_linear(seed in 0u64..u64::MAX, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = RAW_SAMPLES * CHUNK_WIRES;
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let dx = downsample_view(&x, RAW_SAMPLES, CHUNK_WIRES).unwrap();
        let dy = downsample_view(&y, RAW_SAMPLES, CHUNK_WIRES).unwrap();
        let dc = downsample_view(&combo, RAW_SAMPLES, CHUNK_WIRES).unwrap();
        for i in 0..dc.len() {
            let expect = a * dx[i] + b * dy[i];
            prop_assert!((dc[i] - expect).abs() <= 1e-9 * expect.abs().max(1e-12));
        }
    }
}

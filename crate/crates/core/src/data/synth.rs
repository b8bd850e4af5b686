//! Synthetic listeners standing in for measured HRTF databases.
//!
//! Each ear's magnitude response, in dB, is an exactly band-limited
//! spherical-harmonic field per frequency bin. Coefficient curves are a
//! shared population template plus a smooth per-subject deviation; the
//! right ear mirrors the left across the median plane. Phase is minimum
//! phase plus a pure delay whose interaural part follows Woodworth's
//! spherical-head model.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectrum::{irfft, minimum_phase};
use super::{bin_frequencies, HrirSet, SphericalDirection};
use crate::error::{Error, Result};
use crate::sh::{degree_order, max_order_for_points, num_coefficients, sht_eval, ShCoeffTensor};

/// Seed of the population template shared by every synthetic subject.
const TEMPLATE_SEED: u64 = 0x5eed_0f_a11;

/// Onset delay common to both ears.
const BASE_DELAY_S: f64 = 1.0e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Highest SH order present in the dB magnitude field.
    pub true_sh_order: usize,
    /// Gaussian smoothing width of coefficient curves, in bins.
    pub spectral_smoothness: f64,
    /// Head radius in metres.
    pub head_radius: f64,
    /// Speed of sound in m/s.
    pub speed_of_sound: f64,
    pub sample_rate: u32,
    pub ir_length: usize,
    /// Scale of per-subject deviation relative to the template.
    pub subject_spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            true_sh_order: 5,
            spectral_smoothness: 6.0,
            head_radius: 0.0875,
            speed_of_sound: 343.0,
            sample_rate: 48_000,
            ir_length: 256,
            subject_spread: 0.5,
            seed: 0,
        }
    }
}

/// A generated subject together with the coefficients that define it.
#[derive(Debug, Clone)]
pub struct SyntheticSubject {
    pub hrir: HrirSet,
    /// Exact dB-magnitude coefficients, `B` bins, both ears.
    pub magnitude_db: ShCoeffTensor,
}

/// Woodworth interaural time difference `(a/c)(θ + sin θ)` for a lateral
/// angle `θ` (positive when the source is on the left).
pub fn woodworth_itd(lateral_angle: f64, head_radius: f64, speed_of_sound: f64) -> f64 {
    head_radius / speed_of_sound * (lateral_angle + lateral_angle.sin())
}

/// Generates a subject on `grid`; see [`synth_subject_detailed`].
pub fn synth_subject(cfg: &SynthConfig, grid: &[SphericalDirection]) -> Result<HrirSet> {
    Ok(synth_subject_detailed(cfg, grid)?.hrir)
}

pub fn synth_subject_detailed(
    cfg: &SynthConfig,
    grid: &[SphericalDirection],
) -> Result<SyntheticSubject> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("synthesis grid is empty".into()));
    }
    if cfg.true_sh_order > max_order_for_points(grid.len()) {
        return Err(Error::InvalidArgument(format!(
            "order {} is too high for a {}-point grid (max {})",
            cfg.true_sh_order,
            grid.len(),
            max_order_for_points(grid.len())
        )));
    }
    if !cfg.ir_length.is_power_of_two() || cfg.ir_length < 8 {
        return Err(Error::InvalidArgument("IR length must be a power of two >= 8".into()));
    }
    if !(cfg.head_radius > 0.0 && cfg.speed_of_sound > 0.0 && cfg.spectral_smoothness > 0.0) {
        return Err(Error::InvalidArgument(
            "head radius, speed of sound and smoothness must be positive".into(),
        ));
    }
    let t = cfg.ir_length;
    let coeffs = magnitude_coefficients(cfg);
    let field = sht_eval(&coeffs, grid);
    let bins = coeffs.num_bins();
    let freqs = bin_frequencies(cfg.sample_rate, t);

    let mut ears = [Vec::with_capacity(grid.len() * t), Vec::with_capacity(grid.len() * t)];
    let mut log_mag = vec![0.0; bins];
    for (p, dir) in grid.iter().enumerate() {
        let itd = woodworth_itd(dir.lateral_angle(), cfg.head_radius, cfg.speed_of_sound);
        // a source on the left reaches the left ear first
        let delays = [BASE_DELAY_S - itd / 2.0, BASE_DELAY_S + itd / 2.0];
        for (ear, out) in ears.iter_mut().enumerate() {
            for (b, lm) in log_mag.iter_mut().enumerate() {
                *lm = field[(p * bins + b) * 2 + ear] * (10f64.ln() / 20.0);
            }
            let mut spectrum = minimum_phase(&log_mag, t);
            for (b, z) in spectrum.iter_mut().enumerate() {
                *z *= Complex64::from_polar(1.0, -2.0 * PI * freqs[b] * delays[ear]);
            }
            // a real signal needs a real Nyquist bin; keep its magnitude
            let nyq = spectrum[bins - 1];
            let sign = if nyq.re >= 0.0 { 1.0 } else { -1.0 };
            spectrum[bins - 1] = Complex64::new(sign * nyq.norm(), 0.0);
            out.extend(irfft(&spectrum, t));
        }
    }
    let [left, right] = ears;
    let hrir = HrirSet::from_f64(cfg.sample_rate, grid.to_vec(), t, &left, &right)?;
    Ok(SyntheticSubject {
        hrir,
        magnitude_db: coeffs,
    })
}

/// dB-magnitude SH coefficients for both ears of the subject `cfg.seed`.
pub fn magnitude_coefficients(cfg: &SynthConfig) -> ShCoeffTensor {
    let bins = cfg.ir_length / 2 + 1;
    let freqs = bin_frequencies(cfg.sample_rate, cfg.ir_length);
    let n_sh = num_coefficients(cfg.true_sh_order);
    let mut template_rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED);
    let mut subject_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = ShCoeffTensor::zeros(cfg.true_sh_order, bins);
    let sqrt4pi = (4.0 * PI).sqrt();

    for n in 0..n_sh {
        let (l, m) = degree_order(n);
        // template curves are drawn for every n so later orders do not
        // depend on the configured maximum
        let template_noise = smooth_curve(&mut template_rng, bins, cfg.spectral_smoothness);
        let deviation = smooth_curve(&mut subject_rng, bins, cfg.spectral_smoothness);
        let amplitude = order_amplitude(l);
        for b in 0..bins {
            let f = freqs[b];
            let structured = match (l, m) {
                // diffuse-field shape: concha resonance, pinna notch, roll-off
                (0, 0) => {
                    sqrt4pi
                        * (4.0 * gauss(f, 2800.0, 1400.0) - 8.0 * gauss(f, 9000.0, 1500.0)
                            + 3.0 * gauss(f, 13000.0, 2000.0)
                            - 10.0 * (f / 24_000.0).powi(2))
                }
                // lateral head shadow grows with frequency
                (1, -1) => 5.0 + 16.0 * (1.0 - (-f / 5000.0).exp()),
                // elevation cue: notch sweeping with height
                (1, 0) => -4.0 * gauss(f, 8000.0, 2500.0) + 2.0 * gauss(f, 4000.0, 1500.0),
                // front/back asymmetry from the pinna
                (1, 1) => 3.0 * (1.0 - (-f / 6000.0).exp()),
                _ => 0.0,
            };
            let left = structured
                + amplitude * template_noise[b]
                + cfg.subject_spread * amplitude * deviation[b];
            // mirroring y -> -y flips the sine-type harmonics (m < 0)
            let right = if m < 0 { -left } else { left };
            out.set(n, b, 0, left);
            out.set(n, b, 1, right);
        }
    }
    out
}

fn order_amplitude(l: usize) -> f64 {
    match l {
        0 => 4.0,
        1 => 3.0,
        _ => 3.0 * 0.75f64.powi(l as i32 - 1),
    }
}

fn gauss(f: f64, centre: f64, width: f64) -> f64 {
    (-((f - centre) / width).powi(2)).exp()
}

/// Unit-RMS Gaussian-smoothed white noise.
fn smooth_curve(rng: &mut ChaCha8Rng, len: usize, width: f64) -> Vec<f64> {
    let white: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let radius = (3.0 * width).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / width).powi(2)).exp())
        .collect();
    let smooth: Vec<f64> = (0..len as isize)
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, w) in kernel.iter().enumerate() {
                let idx = i + j as isize - radius;
                if idx >= 0 && (idx as usize) < len {
                    acc += w * white[idx as usize];
                    norm += w * w;
                }
            }
            acc / norm.sqrt()
        })
        .collect();
    let rms = (smooth.iter().map(|x| x * x).sum::<f64>() / len as f64).sqrt();
    smooth.iter().map(|x| x / rms).collect()
}

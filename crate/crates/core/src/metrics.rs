//! Spectral and binaural error metrics between a reference HRTF set and a
//! processed one: log-spectral distortion, ILD error and ITD error.
//! The cosine similarity loss lives in [`crate::nn::loss`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::{Ear, HrtfSet};
use crate::error::{Error, Result};
use crate::sh::{fit_magnitude_db, ShCoeffTensor};

pub use crate::nn::loss::cosine_loss;

/// Frequency band and log floor shared by all metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub min_freq_hz: f64,
    pub max_freq_hz: f64,
    /// Bins where a compared magnitude is below this are skipped.
    pub magnitude_floor: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            min_freq_hz: 200.0,
            max_freq_hz: 18_000.0,
            magnitude_floor: 1e-12,
        }
    }
}

impl MetricConfig {
    /// Indices of the bins inside the band.
    pub fn band(&self, frequencies: &[f64]) -> Vec<usize> {
        frequencies
            .iter()
            .enumerate()
            .filter(|(_, &f)| f > 0.0 && f >= self.min_freq_hz && f <= self.max_freq_hz)
            .map(|(b, _)| b)
            .collect()
    }
}

/// A metric value with the number of (position, bin) terms skipped
/// because a magnitude fell below the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub excluded_bins: usize,
}

fn check_layout(a: &HrtfSet, b: &HrtfSet) -> Result<()> {
    if !a.same_layout(b) {
        return Err(Error::Shape(
            "reference and processed sets do not share a grid and bins".into(),
        ));
    }
    Ok(())
}

/// Mean over positions of the per-position RMS dB log-ratio across the band,
/// averaged over both ears.
pub fn lsd_error(reference: &HrtfSet, generated: &HrtfSet, cfg: &MetricConfig) -> Result<MetricValue> {
    check_layout(reference, generated)?;
    let band = cfg.band(reference.frequencies());
    let mut excluded = 0;
    let mut ear_means = [0.0; 2];
    for ear in Ear::BOTH {
        let mut total = 0.0;
        let mut counted = 0usize;
        for p in 0..reference.num_positions() {
            let (r, g) = (reference.magnitude(ear, p), generated.magnitude(ear, p));
            let mut sum = 0.0;
            let mut n = 0usize;
            for &b in &band {
                if r[b] < cfg.magnitude_floor || g[b] < cfg.magnitude_floor {
                    excluded += 1;
                    continue;
                }
                sum += (20.0 * (r[b] / g[b]).log10()).powi(2);
                n += 1;
            }
            if n > 0 {
                total += (sum / n as f64).sqrt();
                counted += 1;
            }
        }
        ear_means[ear.index()] = if counted > 0 { total / counted as f64 } else { 0.0 };
    }
    Ok(MetricValue {
        value: 0.5 * (ear_means[0] + ear_means[1]),
        excluded_bins: excluded,
    })
}

/// Mean absolute difference of the interaural level difference
/// `20·log10(|H_L|/|H_R|)` over positions and band bins.
pub fn ild_error(reference: &HrtfSet, processed: &HrtfSet, cfg: &MetricConfig) -> Result<MetricValue> {
    check_layout(reference, processed)?;
    let band = cfg.band(reference.frequencies());
    let mut excluded = 0;
    let mut total = 0.0;
    let mut counted = 0usize;
    for p in 0..reference.num_positions() {
        let mags = [
            reference.magnitude(Ear::Left, p),
            reference.magnitude(Ear::Right, p),
            processed.magnitude(Ear::Left, p),
            processed.magnitude(Ear::Right, p),
        ];
        let mut sum = 0.0;
        let mut n = 0usize;
        for &b in &band {
            if mags.iter().any(|m| m[b] < cfg.magnitude_floor) {
                excluded += 1;
                continue;
            }
            let ild_ref = 20.0 * (mags[0][b] / mags[1][b]).log10();
            let ild_proc = 20.0 * (mags[2][b] / mags[3][b]).log10();
            sum += (ild_ref - ild_proc).abs();
            n += 1;
        }
        if n > 0 {
            total += sum / n as f64;
            counted += 1;
        }
    }
    Ok(MetricValue {
        value: if counted > 0 { total / counted as f64 } else { 0.0 },
        excluded_bins: excluded,
    })
}

/// Removes ±2π jumps between consecutive bins.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let jump = p - phase[i - 1];
            if jump.abs() > PI {
                offset -= 2.0 * PI * (jump / (2.0 * PI)).round();
            }
        }
        out.push(p + offset);
    }
    out
}

/// Mean absolute difference of the interaural phase delay
/// `(φ_L − φ_R)/(2πf)`, phases unwrapped per ear along frequency.
pub fn itd_error(reference: &HrtfSet, processed: &HrtfSet, cfg: &MetricConfig) -> Result<MetricValue> {
    check_layout(reference, processed)?;
    let freqs = reference.frequencies();
    let band = cfg.band(freqs);
    let mut total = 0.0;
    let mut counted = 0usize;
    for p in 0..reference.num_positions() {
        let unwrapped = [
            unwrap_phase(reference.phase(Ear::Left, p)),
            unwrap_phase(reference.phase(Ear::Right, p)),
            unwrap_phase(processed.phase(Ear::Left, p)),
            unwrap_phase(processed.phase(Ear::Right, p)),
        ];
        let mut sum = 0.0;
        for &b in &band {
            let d_ref = unwrapped[0][b] - unwrapped[1][b];
            let d_proc = unwrapped[2][b] - unwrapped[3][b];
            sum += ((d_ref - d_proc) / (2.0 * PI * freqs[b])).abs();
        }
        if !band.is_empty() {
            total += sum / band.len() as f64;
            counted += 1;
        }
    }
    Ok(MetricValue {
        value: if counted > 0 { total / counted as f64 } else { 0.0 },
        excluded_bins: 0,
    })
}

/// Cosine similarity loss between two coefficient tensors, restricted to
/// the band bins (all harmonics, both ears).
pub fn csl_error(
    reference: &ShCoeffTensor,
    processed: &ShCoeffTensor,
    frequencies: &[f64],
    cfg: &MetricConfig,
) -> Result<f64> {
    if reference.order() != processed.order() || reference.num_bins() != processed.num_bins() {
        return Err(Error::Shape("coefficient tensors differ in order or bins".into()));
    }
    if frequencies.len() != reference.num_bins() {
        return Err(Error::Shape(format!(
            "{} frequencies for {} bins",
            frequencies.len(),
            reference.num_bins()
        )));
    }
    let band = cfg.band(frequencies);
    let pick = |t: &ShCoeffTensor| -> Vec<f64> {
        (0..t.num_sh())
            .flat_map(|n| band.iter().flat_map(move |&b| [t.get(n, b, 0), t.get(n, b, 1)]))
            .collect()
    };
    cosine_loss(&pick(processed), &pick(reference))
}

/// [`csl_error`] between the dB magnitude fits of two sets at `order`.
pub fn csl_sets(reference: &HrtfSet, processed: &HrtfSet, order: usize, cfg: &MetricConfig) -> Result<f64> {
    check_layout(reference, processed)?;
    let r = fit_magnitude_db(reference, order, None)?;
    let p = fit_magnitude_db(processed, order, None)?;
    csl_error(&r, &p, reference.frequencies(), cfg)
}

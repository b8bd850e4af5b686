//! Conversions between impulse responses and one-sided spectra.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{EarSpectra, HrirSet, HrtfSet};
use crate::data::Ear;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Full-length forward DFT of a real signal.
pub fn fft_real(signal: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(&mut buf));
    buf
}

/// Full-length inverse DFT (normalized by `1/N`).
pub fn ifft(spectrum: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spectrum.to_vec();
    let n = buf.len() as f64;
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(&mut buf));
    buf.iter_mut().for_each(|z| *z /= n);
    buf
}

/// The `T/2 + 1` non-negative frequency bins of a real signal.
pub fn rfft(signal: &[f64]) -> Vec<Complex64> {
    let mut full = fft_real(signal);
    full.truncate(signal.len() / 2 + 1);
    full
}

/// Inverse of [`rfft`] for an even length `len`; the imaginary parts of the
/// DC and Nyquist bins are ignored.
pub fn irfft(half: &[Complex64], len: usize) -> Vec<f64> {
    debug_assert_eq!(half.len(), len / 2 + 1);
    let mut full = Vec::with_capacity(len);
    full.extend_from_slice(half);
    for k in (1..len - half.len() + 1).rev() {
        full.push(half[k].conj());
    }
    full[0].im = 0.0;
    full[len / 2].im = 0.0;
    ifft(&full).into_iter().map(|z| z.re).collect()
}

/// Rebuilds an impulse response from one-sided magnitude and phase.
pub fn spectrum_to_ir(magnitude: &[f64], phase: &[f64], len: usize) -> Vec<f64> {
    let half: Vec<Complex64> = magnitude
        .iter()
        .zip(phase)
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    irfft(&half, len)
}

/// Transforms every impulse response into magnitude and phase.
pub fn hrir_to_hrtf(set: &HrirSet) -> Result<HrtfSet> {
    let t = set.ir_length();
    if !t.is_power_of_two() || t < 2 {
        return Err(Error::InvalidArgument(format!(
            "IR length must be a power of two, got {t}"
        )));
    }
    let mut ears: [EarSpectra; 2] = Default::default();
    for p in 0..set.num_positions() {
        for ear in Ear::BOTH {
            let spec = rfft(&set.ir_f64(ear, p));
            let dst = &mut ears[ear.index()];
            dst.magnitude.extend(spec.iter().map(|z| z.norm()));
            dst.phase.extend(spec.iter().map(|z| z.arg()));
        }
    }
    let [left, right] = ears;
    HrtfSet::new(set.sample_rate(), t, set.positions().to_vec(), left, right)
}

/// Inverse transform back to an [`HrirSet`] (rounding taps to `f32`).
pub fn hrtf_to_hrir(set: &HrtfSet) -> Result<HrirSet> {
    let t = set.ir_length();
    let mut ears = [Vec::new(), Vec::new()];
    for p in 0..set.num_positions() {
        for ear in Ear::BOTH {
            let ir = spectrum_to_ir(set.magnitude(ear, p), set.phase(ear, p), t);
            ears[ear.index()].extend(ir);
        }
    }
    HrirSet::from_f64(set.sample_rate(), set.positions().to_vec(), t, &ears[0], &ears[1])
}

/// Minimum-phase spectrum for a one-sided log-magnitude (natural log),
/// computed with the folded real cepstrum. DC and Nyquist come out real.
pub fn minimum_phase(log_magnitude: &[f64], len: usize) -> Vec<Complex64> {
    let half = len / 2;
    let mut full: Vec<Complex64> = Vec::with_capacity(len);
    full.extend(log_magnitude.iter().map(|&x| Complex64::new(x, 0.0)));
    for k in (1..half).rev() {
        full.push(Complex64::new(log_magnitude[k], 0.0));
    }
    let cepstrum = ifft(&full);
    let mut folded = vec![Complex64::new(0.0, 0.0); len];
    folded[0] = Complex64::new(cepstrum[0].re, 0.0);
    for n in 1..half {
        folded[n] = Complex64::new(2.0 * cepstrum[n].re, 0.0);
    }
    folded[half] = Complex64::new(cepstrum[half].re, 0.0);
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len).process(&mut folded));
    folded.truncate(half + 1);
    folded.iter().map(|z| z.exp()).collect()
}

//! Central finite-difference gradient checking.

use super::layers::{Layer, Mode};
use super::Tensor;
use crate::error::Result;

/// Finite-difference step.
pub const STEP: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Worst disagreement found by a check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub checked: usize,
}

impl GradCheck {
    fn new() -> Self {
        GradCheck {
            max_relative_error: 0.0,
            checked: 0,
        }
    }

    fn push(&mut self, analytic: f64, numeric: f64) {
        self.max_relative_error = self.max_relative_error.max(relative_error(analytic, numeric));
        self.checked += 1;
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_relative_error <= tolerance
    }
}

fn indices(len: usize, limit: usize) -> Vec<usize> {
    if len <= limit {
        (0..len).collect()
    } else {
        (0..limit).map(|k| k * len / limit).collect()
    }
}

fn objective<L: Layer>(layer: &mut L, input: &Tensor, upstream: &Tensor, mode: Mode) -> Result<f64> {
    let out = layer.forward(input, mode)?;
    Ok(out.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum())
}

/// Checks the input and parameter gradients of `layer` for the scalar
/// objective `Σ upstream ⊙ layer(input)`, probing at most `limit` entries
/// of every array.
pub fn check_layer<L: Layer>(layer: &mut L, input: &Tensor, upstream: &Tensor, mode: Mode, limit: usize) -> Result<GradCheck> {
    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.forward(input, mode)?;
    let dx = layer.backward(upstream)?;
    let grads: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.clone()).collect();
    let mut report = GradCheck::new();
    let mut x = input.clone();
    for i in indices(x.len(), limit) {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + STEP;
        let plus = objective(layer, &x, upstream, mode)?;
        x.data_mut()[i] = orig - STEP;
        let minus = objective(layer, &x, upstream, mode)?;
        x.data_mut()[i] = orig;
        report.push(dx.data()[i], (plus - minus) / (2.0 * STEP));
    }
    for (pi, g) in grads.iter().enumerate() {
        for i in indices(g.len(), limit) {
            let orig = layer.params()[pi].value[i];
            layer.params_mut()[pi].value[i] = orig + STEP;
            let plus = objective(layer, input, upstream, mode)?;
            layer.params_mut()[pi].value[i] = orig - STEP;
            let minus = objective(layer, input, upstream, mode)?;
            layer.params_mut()[pi].value[i] = orig;
            report.push(g[i], (plus - minus) / (2.0 * STEP));
        }
    }
    Ok(report)
}

/// Checks `analytic` as the gradient of the scalar function `f` at `x`.
pub fn check_function(f: impl Fn(&[f64]) -> Result<f64>, x: &[f64], analytic: &[f64], limit: usize) -> Result<GradCheck> {
    let mut report = GradCheck::new();
    let mut probe = x.to_vec();
    for i in indices(x.len(), limit) {
        probe[i] = x[i] + STEP;
        let plus = f(&probe)?;
        probe[i] = x[i] - STEP;
        let minus = f(&probe)?;
        probe[i] = x[i];
        report.push(analytic[i], (plus - minus) / (2.0 * STEP));
    }
    Ok(report)
}

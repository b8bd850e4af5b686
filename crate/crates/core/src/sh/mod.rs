//! Real spherical harmonics: basis evaluation, regularized least-squares
//! analysis, synthesis and grid helpers.
//!
//! Conventions: orthonormal real harmonics in ACN order
//! (`n = l² + l + m`) with no Condon–Shortley phase. Fields are laid out
//! position-major, then frequency bin, then ear.

mod basis;
mod fit;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use basis::{acn, basis_matrix, degree_order, fill_basis, num_coefficients, real_sh_basis};
pub use fit::{default_lambda, sht_eval, sht_fit, ShFitter};

use crate::data::container::{read_container, write_container};
use crate::data::{Ear, HrtfSet, SphericalDirection};
use crate::error::{Error, Result};

/// Per-bin, per-ear spherical-harmonic coefficients, `(L+1)² × B × 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoeffTensor {
    order: usize,
    num_bins: usize,
    coeffs: Vec<f64>,
}

impl ShCoeffTensor {
    pub fn new(order: usize, num_bins: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = num_coefficients(order) * num_bins * 2;
        if coeffs.len() != expected {
            return Err(Error::Shape(format!(
                "order {order} with {num_bins} bins needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("SH coefficients".into()));
        }
        Ok(ShCoeffTensor {
            order,
            num_bins,
            coeffs,
        })
    }

    pub fn zeros(order: usize, num_bins: usize) -> Self {
        ShCoeffTensor {
            order,
            num_bins,
            coeffs: vec![0.0; num_coefficients(order) * num_bins * 2],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_sh(&self) -> usize {
        num_coefficients(self.order)
    }

    pub fn data(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_data(self) -> Vec<f64> {
        self.coeffs
    }

    /// The `B × 2` block of harmonic `n`.
    pub fn index_slice(&self, n: usize) -> &[f64] {
        let stride = self.num_bins * 2;
        &self.coeffs[n * stride..(n + 1) * stride]
    }

    pub fn get(&self, n: usize, bin: usize, ear: usize) -> f64 {
        self.coeffs[(n * self.num_bins + bin) * 2 + ear]
    }

    pub fn set(&mut self, n: usize, bin: usize, ear: usize, value: f64) {
        self.coeffs[(n * self.num_bins + bin) * 2 + ear] = value;
    }

    /// Keeps harmonics up to `order` (zero-padding when raising it).
    pub fn with_order(&self, order: usize) -> ShCoeffTensor {
        let mut out = ShCoeffTensor::zeros(order, self.num_bins);
        let keep = num_coefficients(order.min(self.order)) * self.num_bins * 2;
        out.coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        out
    }

    /// Writes the coefficients as a container (SH-index-major `f32`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let manifest = ShManifest {
            kind: SH_KIND.into(),
            order: self.order,
            num_bins: self.num_bins,
            num_ears: 2,
        };
        let payload: Vec<f32> = self.coeffs.iter().map(|&c| c as f32).collect();
        write_container(path.as_ref(), &manifest, &payload)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (m, payload): (ShManifest, Vec<f32>) = read_container(path)?;
        if m.kind != SH_KIND || m.num_ears != 2 {
            return Err(Error::container(path, "not an SH coefficient container"));
        }
        let expected = num_coefficients(m.order) * m.num_bins * 2;
        if payload.len() != expected {
            return Err(Error::PayloadLength {
                expected: expected * 4,
                found: payload.len() * 4,
            });
        }
        ShCoeffTensor::new(m.order, m.num_bins, payload.iter().map(|&x| f64::from(x)).collect())
    }
}

const SH_KIND: &str = "sh_coefficients";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShManifest {
    kind: String,
    order: usize,
    num_bins: usize,
    num_ears: usize,
}

/// Magnitudes are floored here before taking decibels.
pub const DB_FLOOR: f64 = 1e-12;

/// `20·log10|H|` of a whole set as a `P × B × 2` field.
pub fn magnitude_db_field(set: &HrtfSet) -> Vec<f64> {
    let (np, nb) = (set.num_positions(), set.num_bins());
    let mut out = vec![0.0; np * nb * 2];
    for ear in Ear::BOTH {
        for p in 0..np {
            for (b, m) in set.magnitude(ear, p).iter().enumerate() {
                out[(p * nb + b) * 2 + ear.index()] = 20.0 * m.max(DB_FLOOR).log10();
            }
        }
    }
    out
}

/// Splits a `P × B × 2` dB field into linear left and right magnitudes in
/// [`HrtfSet`] layout.
pub fn db_field_to_magnitudes(field: &[f64], num_bins: usize) -> (Vec<f64>, Vec<f64>) {
    let left = field.iter().step_by(2).map(|d| 10f64.powf(d / 20.0)).collect();
    let right = field.iter().skip(1).step_by(2).map(|d| 10f64.powf(d / 20.0)).collect();
    debug_assert_eq!(field.len() % (num_bins * 2), 0);
    (left, right)
}

/// SH analysis of a set's dB magnitudes. `lambda = None` uses
/// [`default_lambda`].
pub fn fit_magnitude_db(set: &HrtfSet, order: usize, lambda: Option<f64>) -> Result<ShCoeffTensor> {
    let lambda = lambda.unwrap_or_else(|| default_lambda(set.positions(), order));
    sht_fit(&magnitude_db_field(set), set.num_bins(), set.positions(), order, lambda)
}

/// Highest order an unregularized fit on `num_points` points supports,
/// `⌊√P⌋ − 1`.
pub fn max_order_for_points(num_points: usize) -> usize {
    assert!(num_points >= 1, "need at least one point");
    let mut r = (num_points as f64).sqrt() as usize;
    while r * r > num_points {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= num_points {
        r += 1;
    }
    r - 1
}

/// `n` near-uniform directions on a golden-angle spiral.
pub fn fibonacci_grid(n: usize) -> Vec<SphericalDirection> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let azimuth = golden_angle * i as f64;
            SphericalDirection::new(azimuth, z.asin(), 1.0).expect("finite grid point")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_order_examples() {
        assert_eq!(max_order_for_points(793), 27);
        assert_eq!(max_order_for_points(3), 0);
        assert_eq!(max_order_for_points(27), 4);
        assert_eq!(max_order_for_points(1), 0);
        assert_eq!(max_order_for_points(4), 1);
        assert_eq!(max_order_for_points(100), 9);
    }

    #[test]
    fn fibonacci_spacing_and_balance() {
        assert_eq!(fibonacci_grid(1).len(), 1);
        let grid = fibonacci_grid(100);
        let spacing = (4.0 * std::f64::consts::PI / 100.0).sqrt();
        let mut min = f64::INFINITY;
        let mut mean = [0.0; 3];
        for (i, a) in grid.iter().enumerate() {
            let v = a.unit_vector();
            (0..3).for_each(|k| mean[k] += v[k] / 100.0);
            for b in &grid[i + 1..] {
                min = min.min(a.angle_to(b));
            }
        }
        assert!(min >= 0.7 * spacing, "min spacing {min}");
        assert!((mean[0].powi(2) + mean[1].powi(2) + mean[2].powi(2)).sqrt() < 0.05);
        assert_eq!(fibonacci_grid(37), fibonacci_grid(37));
    }

    #[test]
    fn coefficient_container_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ShCoeffTensor::zeros(2, 3);
        c.set(4, 1, 1, 0.5);
        c.set(0, 2, 0, -1.25);
        let path = dir.path().join("c.sh");
        c.save(&path).unwrap();
        assert_eq!(ShCoeffTensor::load(&path).unwrap(), c);
    }

    #[test]
    fn order_truncation_and_padding() {
        let mut c = ShCoeffTensor::zeros(2, 1);
        c.set(8, 0, 0, 3.0);
        c.set(1, 0, 1, 2.0);
        let low = c.with_order(1);
        assert_eq!(low.get(1, 0, 1), 2.0);
        let high = low.with_order(3);
        assert_eq!(high.num_sh(), 16);
        assert_eq!(high.get(8, 0, 0), 0.0);
        assert_eq!(high.get(1, 0, 1), 2.0);
    }
}

use nalgebra::DMatrix;

use super::{basis_matrix, num_coefficients, ShCoeffTensor};
use crate::data::SphericalDirection;
use crate::error::{Error, Result};

/// Relative singular-value floor below which an unregularized fit is refused.
const RANK_TOLERANCE: f64 = 1e-10;

/// Regularization used when none is given:
/// `1e-6 · trace(YᵀY) / (L+1)²`.
pub fn default_lambda(positions: &[SphericalDirection], order: usize) -> f64 {
    let y = basis_matrix(order, positions);
    1e-6 * y.norm_squared() / num_coefficients(order) as f64
}

/// A Tikhonov-regularized least-squares projector for one grid and order.
///
/// Building the projector costs one SVD; every bin and ear is then a
/// matrix-vector product, so reuse a fitter across fields on one grid.
#[derive(Debug, Clone)]
pub struct ShFitter {
    order: usize,
    num_positions: usize,
    lambda: f64,
    /// `(L+1)² × P`
    projector: DMatrix<f64>,
}

impl ShFitter {
    pub fn new(positions: &[SphericalDirection], order: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if positions.is_empty() {
            return Err(Error::InvalidArgument("cannot fit on an empty grid".into()));
        }
        let n = num_coefficients(order);
        let y = basis_matrix(order, positions);
        if lambda == 0.0 && positions.len() < n {
            return Err(Error::RankDeficient(format!(
                "{} points cannot determine {n} coefficients without regularization",
                positions.len()
            )));
        }
        let svd = y.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let s_max = svd.singular_values.max();
        let mut filtered = svd.singular_values.clone();
        for s in filtered.iter_mut() {
            if lambda == 0.0 {
                if *s <= RANK_TOLERANCE * s_max {
                    return Err(Error::RankDeficient(format!(
                        "basis matrix of order {order} on {} points is singular",
                        positions.len()
                    )));
                }
                *s = 1.0 / *s;
            } else {
                *s /= *s * *s + lambda;
            }
        }
        // V · diag(s / (s² + λ)) · Uᵀ
        let projector = v_t.transpose() * DMatrix::from_diagonal(&filtered) * u.transpose();
        Ok(ShFitter {
            order,
            num_positions: positions.len(),
            lambda,
            projector,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Coefficients of one scalar field sampled at the fitter's grid.
    pub fn fit_scalar(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.num_positions);
        let n = self.projector.nrows();
        (0..n)
            .map(|i| {
                values
                    .iter()
                    .enumerate()
                    .map(|(p, v)| self.projector[(i, p)] * v)
                    .sum()
            })
            .collect()
    }

    /// Fits a `P × B × 2` field (position-major, then bin, then ear).
    pub fn fit(&self, values: &[f64], num_bins: usize) -> Result<ShCoeffTensor> {
        let p = self.num_positions;
        if values.len() != p * num_bins * 2 {
            return Err(Error::Shape(format!(
                "expected {} field values, got {}",
                p * num_bins * 2,
                values.len()
            )));
        }
        let n = self.projector.nrows();
        let mut coeffs = vec![0.0; n * num_bins * 2];
        for i in 0..n {
            let row = self.projector.row(i);
            let dst = &mut coeffs[i * num_bins * 2..(i + 1) * num_bins * 2];
            for (pos, w) in row.iter().enumerate() {
                let src = &values[pos * num_bins * 2..(pos + 1) * num_bins * 2];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        ShCoeffTensor::new(self.order, num_bins, coeffs)
    }
}

/// Regularized least-squares analysis of a `P × B × 2` field.
pub fn sht_fit(
    values: &[f64],
    num_bins: usize,
    positions: &[SphericalDirection],
    order: usize,
    lambda: f64,
) -> Result<ShCoeffTensor> {
    ShFitter::new(positions, order, lambda)?.fit(values, num_bins)
}

/// Synthesis: evaluates the coefficients at `positions`, returning a
/// `P × B × 2` field in the same layout [`sht_fit`] consumes.
pub fn sht_eval(coeffs: &ShCoeffTensor, positions: &[SphericalDirection]) -> Vec<f64> {
    let y = basis_matrix(coeffs.order(), positions);
    let stride = coeffs.num_bins() * 2;
    let mut out = vec![0.0; positions.len() * stride];
    for p in 0..positions.len() {
        let dst = &mut out[p * stride..(p + 1) * stride];
        for n in 0..y.ncols() {
            let w = y[(p, n)];
            for (d, c) in dst.iter_mut().zip(coeffs.index_slice(n)) {
                *d += w * c;
            }
        }
    }
    out
}

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::data::SphericalDirection;

/// Number of real harmonics up to and including order `order`.
pub fn num_coefficients(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// ACN index `l² + l + m`.
pub fn acn(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Degree and order `(l, m)` of an ACN index.
pub fn degree_order(n: usize) -> (usize, i64) {
    let l = (n as f64).sqrt().floor() as usize;
    // guard against sqrt rounding for large n
    let l = if (l + 1) * (l + 1) <= n { l + 1 } else { l };
    (l, n as i64 - (l * l + l) as i64)
}

/// Real orthonormal spherical harmonics up to `order` at `dir`, ACN order,
/// without the Condon–Shortley phase. `Y_0^0 = 1/√(4π)`.
pub fn real_sh_basis(order: usize, dir: &SphericalDirection) -> Vec<f64> {
    let mut out = vec![0.0; num_coefficients(order)];
    fill_basis(order, dir.elevation().sin(), dir.azimuth(), &mut out);
    out
}

/// Same as [`real_sh_basis`] writing into `out`, from `z = sin(elevation)`.
pub fn fill_basis(order: usize, z: f64, azimuth: f64, out: &mut [f64]) {
    let z = z.clamp(-1.0, 1.0);
    let s = (1.0 - z * z).max(0.0).sqrt();
    let lmax = order;
    // fully normalized associated Legendre values, stored per (l, m)
    let mut p = vec![0.0; (lmax + 1) * (lmax + 1)];
    let idx = |l: usize, m: usize| l * (lmax + 1) + m;
    p[idx(0, 0)] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        p[idx(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[idx(m - 1, m - 1)];
    }
    for m in 0..lmax {
        p[idx(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * z * p[idx(m, m)];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[idx(l, m)] = a * (z * p[idx(l - 1, m)] - b * p[idx(l - 2, m)]);
        }
    }
    let sqrt2 = 2f64.sqrt();
    for l in 0..=lmax {
        out[acn(l, 0)] = p[idx(l, 0)];
        for m in 1..=l {
            let (sin, cos) = (m as f64 * azimuth).sin_cos();
            out[acn(l, m as i64)] = sqrt2 * p[idx(l, m)] * cos;
            out[acn(l, -(m as i64))] = sqrt2 * p[idx(l, m)] * sin;
        }
    }
}

/// The `P × (L+1)²` basis matrix over a grid.
pub fn basis_matrix(order: usize, positions: &[SphericalDirection]) -> DMatrix<f64> {
    let n = num_coefficients(order);
    let mut y = DMatrix::zeros(positions.len(), n);
    let mut row = vec![0.0; n];
    for (i, dir) in positions.iter().enumerate() {
        fill_basis(order, dir.elevation().sin(), dir.azimuth(), &mut row);
        for (j, v) in row.iter().enumerate() {
            y[(i, j)] = *v;
        }
    }
    y
}

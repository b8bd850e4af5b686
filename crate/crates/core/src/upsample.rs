//! Non-neural upsampling baselines: barycentric interpolation over a
//! spherical triangulation, SH interpolation, and non-individual HRTF
//! selection. Interpolation happens on dB magnitudes; phase comes from the
//! nearest source position.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{angle_between, EarSpectra, HrtfSet, SphericalDirection};
use crate::error::{Error, Result};
use crate::metrics::{lsd_error, MetricConfig};
use crate::sh::{db_field_to_magnitudes, default_lambda, magnitude_db_field, max_order_for_points, sht_eval, sht_fit};

type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Gnomonic barycentric coordinates: unclamped weights, or `None` when the
/// direction points away from the triangle's plane.
fn gnomonic(target: Vec3, tri: [Vec3; 3]) -> Result<Option<Vec3>> {
    let [a, b, c] = tri;
    let n = cross(sub(b, a), sub(c, a));
    let nn = dot(n, n);
    let offset = dot(n, a);
    if nn < 1e-24 || offset.abs() < 1e-12 * nn.sqrt() {
        return Err(Error::Degenerate("triangle is collinear or its plane contains the origin".into()));
    }
    let facing = dot(n, target);
    if facing * offset <= 0.0 {
        return Ok(None);
    }
    let q = scale(target, offset / facing);
    let w = [
        dot(cross(sub(b, q), sub(c, q)), n) / nn,
        dot(cross(sub(c, q), sub(a, q)), n) / nn,
        dot(cross(sub(a, q), sub(b, q)), n) / nn,
    ];
    Ok(Some(w))
}

fn clamp_weights(target: Vec3, tri: [Vec3; 3], raw: Option<Vec3>) -> Vec3 {
    if let Some(w) = raw {
        let c = [w[0].max(0.0), w[1].max(0.0), w[2].max(0.0)];
        let s = c[0] + c[1] + c[2];
        if s > 0.0 {
            return [c[0] / s, c[1] / s, c[2] / s];
        }
    }
    let nearest = (0..3)
        .min_by(|&i, &j| angle_between(target, tri[i]).total_cmp(&angle_between(target, tri[j])))
        .unwrap_or(0);
    let mut w = [0.0; 3];
    w[nearest] = 1.0;
    w
}

/// Barycentric weights of `target` in the spherical triangle, from the
/// gnomonic projection onto the triangle's plane. Targets outside the
/// triangle get clamped, renormalized weights.
///
/// ```
/// use sparsehrtf::data::SphericalDirection;
/// use sparsehrtf::upsample::barycentric_weights;
/// let tri = [
///     SphericalDirection::from_degrees(0.0, 0.0, 1.0)?,
///     SphericalDirection::from_degrees(90.0, 0.0, 1.0)?,
///     SphericalDirection::from_degrees(0.0, 90.0, 1.0)?,
/// ];
/// let w = barycentric_weights(&tri[1], &tri)?;
/// assert!((w[1] - 1.0).abs() < 1e-12);
/// # Ok::<(), sparsehrtf::Error>(())
/// ```
pub fn barycentric_weights(target: &SphericalDirection, triangle: &[SphericalDirection; 3]) -> Result<[f64; 3]> {
    let tri = [triangle[0].unit_vector(), triangle[1].unit_vector(), triangle[2].unit_vector()];
    let t = target.unit_vector();
    let raw = gnomonic(t, tri)?;
    match raw {
        Some(w) if w.iter().all(|&x| x >= -WEIGHT_TOLERANCE) => {
            let s = w[0] + w[1] + w[2];
            Ok([w[0].max(0.0) / s, w[1].max(0.0) / s, w[2].max(0.0) / s])
        }
        other => Ok(clamp_weights(t, tri, other)),
    }
}

/// Convex-hull triangulation of unit direction vectors.
#[derive(Debug, Clone)]
pub struct SphericalTriangulation {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl SphericalTriangulation {
    /// Brute-force hull: every vertex triple whose plane has all other
    /// vertices on one side becomes an outward-oriented face.
    pub fn new(positions: &[SphericalDirection]) -> Result<Self> {
        if positions.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "triangulation needs at least 3 positions, got {}",
                positions.len()
            )));
        }
        let v: Vec<Vec3> = positions.iter().map(|p| p.unit_vector()).collect();
        let eps = 1e-10;
        let mut triangles = Vec::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                for k in j + 1..v.len() {
                    let n = cross(sub(v[j], v[i]), sub(v[k], v[i]));
                    let norm = dot(n, n).sqrt();
                    if norm < eps {
                        continue;
                    }
                    let d = dot(n, v[i]);
                    if d.abs() < 1e-12 * norm {
                        continue;
                    }
                    let (mut above, mut below) = (false, false);
                    for (m, p) in v.iter().enumerate() {
                        if m == i || m == j || m == k {
                            continue;
                        }
                        let s = (dot(n, *p) - d) / norm;
                        above |= s > eps;
                        below |= s < -eps;
                        if above && below {
                            break;
                        }
                    }
                    if !above {
                        triangles.push([i, j, k]);
                    } else if !below {
                        triangles.push([i, k, j]);
                    }
                }
            }
        }
        if triangles.is_empty() {
            return Err(Error::Degenerate("positions lie on one great circle".into()));
        }
        Ok(SphericalTriangulation { vertices: v, triangles })
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Enclosing triangle and weights. A direction covered by no triangle
    /// uses the triangle with the closest centroid and clamped weights.
    pub fn locate(&self, target: &SphericalDirection) -> ([usize; 3], [f64; 3]) {
        let t = target.unit_vector();
        for (i, tri) in self.triangles.iter().enumerate() {
            if let Ok(Some(w)) = gnomonic(t, self.corners(i)) {
                if w.iter().all(|&x| x >= -WEIGHT_TOLERANCE) {
                    let s = w[0] + w[1] + w[2];
                    return (*tri, [w[0].max(0.0) / s, w[1].max(0.0) / s, w[2].max(0.0) / s]);
                }
            }
        }
        let best = (0..self.triangles.len())
            .max_by(|&i, &j| {
                let ci = self.corners(i);
                let cj = self.corners(j);
                let centroid = |c: [Vec3; 3]| {
                    let s = [c[0][0] + c[1][0] + c[2][0], c[0][1] + c[1][1] + c[2][1], c[0][2] + c[1][2] + c[2][2]];
                    dot(s, t) / dot(s, s).sqrt().max(1e-300)
                };
                centroid(ci).total_cmp(&centroid(cj)).then(j.cmp(&i))
            })
            .unwrap_or(0);
        let corners = self.corners(best);
        let raw = gnomonic(t, corners).ok().flatten();
        (self.triangles[best], clamp_weights(t, corners, raw))
    }
}

/// Index of the nearest source direction for every target.
pub fn nearest_indices(sources: &[SphericalDirection], targets: &[SphericalDirection]) -> Vec<usize> {
    let sv: Vec<Vec3> = sources.iter().map(|s| s.unit_vector()).collect();
    targets
        .iter()
        .map(|t| {
            let tv = t.unit_vector();
            (0..sv.len())
                .min_by(|&i, &j| angle_between(tv, sv[i]).total_cmp(&angle_between(tv, sv[j])).then(i.cmp(&j)))
                .unwrap_or(0)
        })
        .collect()
}

/// Builds a set on `targets` from a `P × B × 2` dB field, taking each
/// target's phase from the nearest position of `phase_source`.
pub fn render_db_field(db_field: &[f64], targets: &[SphericalDirection], phase_source: &HrtfSet) -> Result<HrtfSet> {
    let nb = phase_source.num_bins();
    if db_field.len() != targets.len() * nb * 2 {
        return Err(Error::Shape(format!(
            "dB field of {} values does not cover {} targets × {nb} bins × 2",
            db_field.len(),
            targets.len()
        )));
    }
    let (lm, rm) = db_field_to_magnitudes(db_field, nb);
    let nearest = nearest_indices(phase_source.positions(), targets);
    let phase = |ear| -> Vec<f64> {
        nearest
            .iter()
            .flat_map(|&s| phase_source.phase(ear, s).iter().copied())
            .collect()
    };
    HrtfSet::new(
        phase_source.sample_rate(),
        phase_source.ir_length(),
        targets.to_vec(),
        EarSpectra {
            magnitude: lm,
            phase: phase(crate::data::Ear::Left),
        },
        EarSpectra {
            magnitude: rm,
            phase: phase(crate::data::Ear::Right),
        },
    )
}

/// Barycentric interpolation of dB magnitudes onto `targets`.
pub fn barycentric_upsample(sparse: &HrtfSet, targets: &[SphericalDirection]) -> Result<HrtfSet> {
    let tri = SphericalTriangulation::new(sparse.positions())?;
    let nb = sparse.num_bins();
    let stride = nb * 2;
    let db = magnitude_db_field(sparse);
    let mut out = vec![0.0; targets.len() * stride];
    for (t, target) in targets.iter().enumerate() {
        let (verts, w) = tri.locate(target);
        let dst = &mut out[t * stride..(t + 1) * stride];
        for (v, wv) in verts.iter().zip(w) {
            if wv == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(&db[v * stride..(v + 1) * stride]) {
                *d += wv * s;
            }
        }
    }
    render_db_field(&out, targets, sparse)
}

/// SH interpolation: dB magnitudes fit at `order` (default
/// `⌊√P⌋ − 1`) with Tikhonov weight `lambda` (default
/// [`default_lambda`]) and evaluated on `targets`.
pub fn sh_upsample(
    sparse: &HrtfSet,
    order: Option<usize>,
    lambda: Option<f64>,
    targets: &[SphericalDirection],
) -> Result<HrtfSet> {
    let order = order.unwrap_or_else(|| max_order_for_points(sparse.num_positions()));
    let lambda = lambda.unwrap_or_else(|| default_lambda(sparse.positions(), order));
    let coeffs = sht_fit(&magnitude_db_field(sparse), sparse.num_bins(), sparse.positions(), order, lambda)?;
    render_db_field(&sht_eval(&coeffs, targets), targets, sparse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Smallest mean LSD to the rest of the dataset.
    Generic,
    /// Largest mean LSD to the rest of the dataset.
    Distinct,
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(SelectionMode::Generic),
            "distinct" => Ok(SelectionMode::Distinct),
            _ => Err(Error::Config(format!("unknown selection mode {s:?}"))),
        }
    }
}

/// Mean LSD from each subject to every other subject.
pub fn mean_lsd_to_others(dataset: &[HrtfSet], cfg: &MetricConfig) -> Result<Vec<f64>> {
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument("selection needs at least two subjects".into()));
    }
    let n = dataset.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = lsd_error(&dataset[i], &dataset[j], cfg)?.value;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok((0..n).map(|i| d[i * n..(i + 1) * n].iter().sum::<f64>() / (n - 1) as f64).collect())
}

/// Index of the most generic or most distinct subject; ties go to the lowest index.
pub fn select_hrtf(dataset: &[HrtfSet], mode: SelectionMode) -> Result<usize> {
    let scores = mean_lsd_to_others(dataset, &MetricConfig::default())?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        let better = match mode {
            SelectionMode::Generic => s < scores[best],
            SelectionMode::Distinct => s > scores[best],
        };
        if better {
            best = i;
        }
    }
    Ok(best)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HrirSet, SphericalDirection};
use crate::error::{Error, Result};

/// Sparsity levels exercised by the upsampling experiments.
pub const EXPERIMENT_SPARSITY_LEVELS: [usize; 5] = [27, 18, 8, 4, 3];

/// Greedy farthest-point sampling: starts at `start` and repeatedly adds the
/// point whose nearest selected neighbour is farthest away. Ties go to the
/// lowest index. Returned in selection order.
pub fn farthest_point_indices(
    positions: &[SphericalDirection],
    count: usize,
    start: usize,
) -> Vec<usize> {
    let vectors: Vec<[f64; 3]> = positions.iter().map(|p| p.unit_vector()).collect();
    let mut nearest = vec![f64::INFINITY; positions.len()];
    let mut chosen = Vec::with_capacity(count);
    let mut current = start;
    for _ in 0..count {
        chosen.push(current);
        for (i, v) in vectors.iter().enumerate() {
            let d = super::direction::angle_between(vectors[current], *v);
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
        nearest[current] = f64::NEG_INFINITY;
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, &d) in nearest.iter().enumerate() {
            if d > best.0 {
                best = (d, i);
            }
        }
        current = best.1;
    }
    chosen
}

/// Indices kept by [`subsample_positions`], in ascending order.
pub fn subsample_indices(
    positions: &[SphericalDirection],
    count: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let p = positions.len();
    if count == 0 || count > p {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {count} of {p} positions"
        )));
    }
    if count == p {
        return Ok((0..p).collect());
    }
    let start = ChaCha8Rng::seed_from_u64(seed).random_range(0..p);
    let mut idx = farthest_point_indices(positions, count, start);
    idx.sort_unstable();
    Ok(idx)
}

/// Keeps `count` well-spread positions, chosen by farthest-point sampling
/// from a seed-chosen start. Original ordering is preserved.
pub fn subsample_positions(set: &HrirSet, count: usize, seed: u64) -> Result<HrirSet> {
    set.select(&subsample_indices(set.positions(), count, seed)?)
}

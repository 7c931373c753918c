use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partition::PartitionGrid;
use crate::schauder::{CoefficientArray, SampledPath};

/// `x_n(t) = sum_k z_k C(n,k) t^k (1-t)^{n-k}` on `grid`, by de Casteljau.
/// `nodes` holds `z(k/n)` for `k = 0..=n`.
pub fn bernstein(nodes: &[f64], grid: &PartitionGrid) -> Result<SampledPath> {
    if nodes.len() < 2 {
        return Err(Error::param("Bernstein degree must be >= 1"));
    }
    if nodes.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("Bernstein nodes must be finite"));
    }
    let values = grid
        .points
        .par_iter()
        .map(|&t| {
            let mut b = nodes.to_vec();
            for r in 1..b.len() {
                for k in 0..b.len() - r {
                    b[k] = (1.0 - t) * b[k] + t * b[k + 1];
                }
            }
            b[0]
        })
        .collect();
    SampledPath::new(grid.clone(), values)
}

/// Degree-`n` Bernstein polynomial of a callable.
pub fn bernstein_fn(f: impl Fn(f64) -> f64, n: usize, grid: &PartitionGrid) -> Result<SampledPath> {
    if n == 0 {
        return Err(Error::param("Bernstein degree must be >= 1"));
    }
    let nodes: Vec<f64> = (0..=n).map(|k| f(k as f64 / n as f64)).collect();
    bernstein(&nodes, grid)
}

/// Degree-`n` Bernstein polynomial of a sampled path, reading `z(k/n)` by
/// linear interpolation between samples (exact at sample points).
pub fn bernstein_path(z: &SampledPath, n: usize, grid: &PartitionGrid) -> Result<SampledPath> {
    let pts = z.points();
    bernstein_fn(
        |t| {
            let i = pts.partition_point(|&s| s <= t).clamp(1, pts.len() - 1);
            let (a, b) = (pts[i - 1], pts[i]);
            let w = (t - a) / (b - a);
            z.values[i - 1] + w * (z.values[i] - z.values[i - 1])
        },
        n,
        grid,
    )
}

/// Boundary and levels `< n` from `x`, levels `>= n` from `y`.
pub fn splice(x: &CoefficientArray, y: &CoefficientArray, n: u32) -> Result<CoefficientArray> {
    if x.q != y.q {
        return Err(Error::GridMismatch(format!("cannot splice q={} with q={}", x.q, y.q)));
    }
    for c in [x, y] {
        if c.depth() < n {
            return Err(Error::InsufficientLevels { needed: n as usize, available: c.depth() as usize });
        }
    }
    let mut levels = x.levels[..n as usize].to_vec();
    levels.extend_from_slice(&y.levels[n as usize..]);
    CoefficientArray::new(x.q, x.boundary, levels)
}

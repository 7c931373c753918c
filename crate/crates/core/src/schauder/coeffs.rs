use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{gamma_unchecked, GammaMatrix};
use super::path::SampledPath;
use crate::error::{Error, Result};
use crate::partition::{interval_count, qadic_grid, qpow};

/// Faber-Schauder coefficients `theta_{m,k,ell}` for levels `0..depth`
/// plus the boundary values `(x(0), x(1))`.
///
/// Level `m` is stored flat with `k` major and branch minor:
/// `levels[m][k * (q - 1) + (ell - 1)]`. For `q = 2` this is just
/// `theta_{m,k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientArray {
    pub q: u32,
    pub boundary: [f64; 2],
    pub levels: Vec<Vec<f64>>,
}

impl CoefficientArray {
    pub fn new(q: u32, boundary: [f64; 2], levels: Vec<Vec<f64>>) -> Result<Self> {
        let arr = Self { q, boundary, levels };
        arr.validate()?;
        Ok(arr)
    }

    pub fn zeros(q: u32, depth: u32) -> Result<Self> {
        let levels = (0..depth)
            .map(|m| Ok(vec![0.0; interval_count(q, m)? * (q as usize - 1)]))
            .collect::<Result<_>>()?;
        Ok(Self { q, boundary: [0.0, 0.0], levels })
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::param(format!("base q must be >= 2, got {}", self.q)));
        }
        let branches = self.q as usize - 1;
        for (m, lvl) in self.levels.iter().enumerate() {
            let want = interval_count(self.q, m as u32)? * branches;
            if lvl.len() != want {
                return Err(Error::param(format!(
                    "coefficient level {m} has {} entries, expected {want}",
                    lvl.len()
                )));
            }
            if lvl.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("coefficient level {m} has non-finite entries")));
            }
        }
        if self.boundary.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("boundary values must be finite"));
        }
        Ok(())
    }

    pub fn depth(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn branches(&self) -> usize {
        self.q as usize - 1
    }

    pub fn get(&self, m: u32, k: usize, ell: u32) -> f64 {
        self.levels[m as usize][k * self.branches() + ell as usize - 1]
    }

    /// Same coefficients with every level `>= n` dropped.
    pub fn truncated(&self, n: u32) -> Self {
        let keep = (n as usize).min(self.levels.len());
        Self { q: self.q, boundary: self.boundary, levels: self.levels[..keep].to_vec() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let arr: Self = serde_json::from_str(s)?;
        arr.validate()?;
        Ok(arr)
    }

    /// Exact value at the grid point `j / q^n`. Only levels `m < n`
    /// contribute since finer Schauder functions vanish there.
    pub fn value_at(&self, j: usize, n: u32) -> f64 {
        let ctx = SynthesisContext::new(self);
        ctx.value_at(j, n)
    }
}

/// Precomputed per-level tables shared by every grid point.
struct SynthesisContext<'a> {
    coeffs: &'a CoefficientArray,
    gamma: GammaMatrix,
    prefix: Vec<Vec<f64>>,
}

impl<'a> SynthesisContext<'a> {
    fn new(coeffs: &'a CoefficientArray) -> Self {
        let gamma = GammaMatrix::new(coeffs.q).expect("validated q");
        let prefix = gamma.prefix_sums();
        Self { coeffs, gamma, prefix }
    }

    fn value_at(&self, j: usize, n: u32) -> f64 {
        let q = self.coeffs.q;
        let count = qpow(q, n);
        let [x0, x1] = self.coeffs.boundary;
        let t = j as f64 / count as f64;
        let mut value = x0 + (x1 - x0) * t;
        if j == count {
            return x1;
        }
        let branches = self.coeffs.branches();
        let top = n.min(self.coeffs.depth());
        for m in 0..top {
            let span = qpow(q, n - m);
            let r = j % span;
            if r == 0 {
                continue;
            }
            let kappa = j / span;
            let child_span = span / q as usize;
            let d = r / child_span;
            let frac = (r % child_span) as f64 / child_span as f64;
            let scale = 1.0 / ((qpow(q, m) as f64).sqrt() * q as f64);
            let row = &self.coeffs.levels[m as usize][kappa * branches..(kappa + 1) * branches];
            let mut level_sum = 0.0;
            for (b, &theta) in row.iter().enumerate() {
                if theta == 0.0 {
                    continue;
                }
                let e = self.prefix[b][d] + self.gamma.rows[b][d] * frac;
                level_sum += theta * e;
            }
            value += scale * level_sum;
        }
        value
    }
}

/// Exact samples of the Faber-Schauder series on the level-`n` q-adic grid.
/// Coefficient levels `>= n` are ignored.
pub fn synthesize(coeffs: &CoefficientArray, n: u32) -> Result<SampledPath> {
    coeffs.validate()?;
    let grid = qadic_grid(coeffs.q, n)?;
    let ctx = SynthesisContext::new(coeffs);
    let values: Vec<f64> = (0..grid.points.len())
        .into_par_iter()
        .map(|j| ctx.value_at(j, n))
        .collect();
    let mut path = SampledPath::new(grid, values)?;
    path.meta.truncation_level = Some(n.min(coeffs.depth()));
    Ok(path)
}

/// Recovers levels `0..n` of the Faber-Schauder coefficients from level-`n`
/// q-adic samples.
///
/// For `q = 2` this is the second-difference formula
/// `theta_{m,k} = 2^{m/2} (2 x(mid) - x(left) - x(right))`. For `q >= 3`
/// each parent's coefficients are the inner products of its child
/// increments with the orthonormal Haar weight rows,
/// `theta_{m,k,ell} = q^{m/2} sum_d gamma_{ell,d} Delta_{qk+d}`.
pub fn analyze(path: &SampledPath) -> Result<CoefficientArray> {
    let q = path.q();
    let n = path.level();
    if !path.grid.is_qadic() {
        return Err(Error::GridMismatch(format!(
            "analysis needs a {q}-adic grid; this level-{n} grid is not"
        )));
    }
    if n == 0 {
        return Err(Error::param("analysis needs at least level 1 samples"));
    }
    let x = &path.values;
    let branches = q as usize - 1;
    let mut levels = Vec::with_capacity(n as usize);
    for m in 0..n {
        let count = qpow(q, m);
        let span = qpow(q, n - m);
        let child = span / q as usize;
        let norm = (count as f64).sqrt();
        let mut lvl = vec![0.0; count * branches];
        for k in 0..count {
            let base = k * span;
            if q == 2 {
                lvl[k] = norm * (2.0 * x[base + child] - x[base] - x[base + span]);
                continue;
            }
            for ell in 1..q {
                let mut acc = 0.0;
                for d in 0..q as usize {
                    let inc = x[base + (d + 1) * child] - x[base + d * child];
                    acc += gamma_unchecked(q, ell, d as u32) * inc;
                }
                lvl[k * branches + ell as usize - 1] = norm * acc;
            }
        }
        levels.push(lvl);
    }
    CoefficientArray::new(q, [x[0], x[x.len() - 1]], levels)
}

/// `xi_m^{(p)} = q^{-mp/2} sum_{k,ell} |theta_{m,k,ell}|^p`.
///
/// For `q = 2` this is the usual dyadic quantity. For `q >= 3` this sums
/// over branches as well, which is an extension: on uniform-magnitude
/// arrays it equals `q^{m(1-p/2)} c_m^p sum_ell |a_ell|^p`, whereas the
/// q-adic reduction `q^{m(1-p/2)} c_m^p` is available from
/// [`crate::construct::UniformMagnitudeSpec::xi`].
pub fn xi(coeffs: &CoefficientArray, p: f64, m: u32) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::param(format!("exponent p must be > 1, got {p}")));
    }
    let lvl = coeffs
        .levels
        .get(m as usize)
        .ok_or(Error::InsufficientLevels { needed: m as usize + 1, available: coeffs.levels.len() })?;
    let sum: f64 = lvl.iter().map(|v| v.abs().powf(p)).sum();
    Ok((coeffs.q as f64).powf(-(m as f64) * p / 2.0) * sum)
}

/// Truncated Ciesielski quantity `max_m q^{m(alpha - 1/2)} max_k |theta_{m,k}|`.
pub fn holder_bound(coeffs: &CoefficientArray, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("Hölder exponent must lie in (0,1), got {alpha}")));
    }
    let q = coeffs.q as f64;
    Ok(coeffs
        .levels
        .iter()
        .enumerate()
        .map(|(m, lvl)| {
            let peak = lvl.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            q.powf(m as f64 * (alpha - 0.5)) * peak
        })
        .fold(0.0, f64::max))
}

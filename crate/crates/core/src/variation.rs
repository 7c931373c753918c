//! Discrete p-th variation along partition sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::qpow;
use crate::schauder::{xi, CoefficientArray, SampledPath};

const BLOCK: usize = 256;

/// Eval points default to at most this level.
pub const DEFAULT_EVAL_LEVEL: u32 = 10;

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("exponent p must be a finite real > 1, got {p}")))
    }
}

/// `|x|^p`, with `powi` when `p` is a small integer.
#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p <= 64.0 {
        x.abs().powi(p as i32)
    } else {
        x.abs().powf(p)
    }
}

/// `|x(t_{j+1}) - x(t_j)|^p` for every interval of the path's grid.
pub fn increment_powers(path: &SampledPath, p: f64) -> Vec<f64> {
    path.values.par_windows(2).map(|w| abs_pow(w[1] - w[0], p)).collect()
}

/// Running sums `S_0 = 0, S_{i+1} = S_i + terms_i`, computed blockwise with a
/// fixed order so the result does not depend on the thread count. Monotone
/// whenever all terms are nonnegative.
pub fn cumulative_sums(terms: &[f64]) -> Vec<f64> {
    let totals: Vec<f64> = terms.par_chunks(BLOCK).map(|c| c.iter().sum()).collect();
    let mut offsets = Vec::with_capacity(totals.len());
    let mut acc = 0.0;
    for t in &totals {
        offsets.push(acc);
        acc += t;
    }
    let mut out = vec![0.0; terms.len() + 1];
    out[1..]
        .par_chunks_mut(BLOCK)
        .zip(terms.par_chunks(BLOCK))
        .zip(offsets.par_iter())
        .for_each(|((dst, src), &off)| {
            let mut local = 0.0;
            for (d, t) in dst.iter_mut().zip(src) {
                local += t;
                *d = off + local;
            }
        });
    out
}

/// The curve `t -> [x]^{(p)}_{T^n}(t)` at selected points of the level-`n` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationProfile {
    pub p: f64,
    pub q: u32,
    pub level: u32,
    /// Positions of `eval_points` in the level-`n` grid.
    pub eval_indices: Vec<usize>,
    pub eval_points: Vec<f64>,
    pub values: Vec<f64>,
}

impl VariationProfile {
    /// Value at `t = 1` if it is an eval point.
    pub fn terminal(&self) -> Option<f64> {
        (self.eval_points.last() == Some(&1.0)).then(|| *self.values.last().unwrap())
    }

    /// An exact profile `t -> c t` at the given points, e.g. a limiting curve.
    pub fn linear(p: f64, q: u32, level: u32, c: f64, eval_indices: Vec<usize>, eval_points: Vec<f64>) -> Result<Self> {
        check_p(p)?;
        if eval_indices.len() != eval_points.len() {
            return Err(Error::param("eval index and point lists differ in length"));
        }
        let values = eval_points.iter().map(|t| c * t).collect();
        Ok(Self { p, q, level, eval_indices, eval_points, values })
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `max_i |self_i - other_i|` over common eval points.
    pub fn max_gap(&self, other: &VariationProfile) -> Result<f64> {
        if self.eval_points != other.eval_points {
            return Err(Error::GridMismatch("profiles use different eval points".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV rows `level,t,value` without header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (t, v) in self.eval_points.iter().zip(&self.values) {
            out.push_str(&format!("{},{t:.16e},{v:.16e}\n", self.level));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        profiles_to_csv(std::slice::from_ref(self))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Several profiles in one CSV with header `level,t,value`.
pub fn profiles_to_csv(profiles: &[VariationProfile]) -> String {
    let mut out = String::from("level,t,value\n");
    for p in profiles {
        out.push_str(&p.csv_rows());
    }
    out
}

/// Indices of the level-`m` points inside a level-`n` grid, `m <= n`.
pub fn coarse_indices(q: u32, n: u32, m: u32) -> Vec<usize> {
    let m = m.min(n);
    let stride = qpow(q, n - m);
    (0..=qpow(q, m)).map(|i| i * stride).collect()
}

/// Eval indices on the level-`min(n, 10)` grid.
pub fn default_eval_indices(path: &SampledPath) -> Vec<usize> {
    coarse_indices(path.q(), path.level(), DEFAULT_EVAL_LEVEL)
}

/// Profile at the given grid indices (ascending, within the grid).
pub fn pvar_profile(path: &SampledPath, p: f64, eval_indices: &[usize]) -> Result<VariationProfile> {
    check_p(p)?;
    let len = path.values.len();
    if let Some(&bad) = eval_indices.iter().find(|&&i| i >= len) {
        return Err(Error::range(format!("eval index {bad} off a grid of {len} points")));
    }
    if eval_indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NonMonotone("eval indices must be strictly increasing".into()));
    }
    let cum = cumulative_sums(&increment_powers(path, p));
    Ok(VariationProfile {
        p,
        q: path.q(),
        level: path.level(),
        eval_indices: eval_indices.to_vec(),
        eval_points: eval_indices.iter().map(|&i| path.grid.points[i]).collect(),
        values: eval_indices.iter().map(|&i| cum[i]).collect(),
    })
}

/// Profile at the given real eval points, which must lie exactly on the grid.
pub fn pvar_profile_at(path: &SampledPath, p: f64, eval_points: &[f64]) -> Result<VariationProfile> {
    let idx = eval_points
        .iter()
        .map(|&t| {
            path.grid
                .index_of(t)
                .ok_or_else(|| Error::GridMismatch(format!("eval point {t} is not a grid point")))
        })
        .collect::<Result<Vec<_>>>()?;
    pvar_profile(path, p, &idx)
}

/// Profile at every grid point.
pub fn pvar_profile_full(path: &SampledPath, p: f64) -> Result<VariationProfile> {
    let idx: Vec<usize> = (0..path.values.len()).collect();
    pvar_profile(path, p, &idx)
}

/// `[x]^{(p)}_{T^n}(1)`, summed in the same order as the profiles.
pub fn pvar_total(path: &SampledPath, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(*cumulative_sums(&increment_powers(path, p)).last().unwrap())
}

/// The clamped sum `sum_j |x(t_{j+1} ^ t) - x(t_j ^ t)|^p` taken literally
/// over every interval of the grid, for a grid point `t`.
pub fn pvar_clamped(path: &SampledPath, p: f64, t: f64) -> Result<f64> {
    Ok(pvar_clamped_many(path, p, &[t])?[0])
}

/// [`pvar_clamped`] at several non-decreasing grid points in one sweep.
/// Intervals entirely beyond `t` clamp to `|x(t) - x(t)|^p = 0`; an interval
/// straddling `t` would need `x` off the grid and is an error.
pub fn pvar_clamped_many(path: &SampledPath, p: f64, ts: &[f64]) -> Result<Vec<f64>> {
    check_p(p)?;
    let pts = path.points();
    let x = &path.values;
    let mut out = Vec::with_capacity(ts.len());
    let mut j = 0;
    let mut acc = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for &t in ts {
        if t < prev {
            return Err(Error::NonMonotone("clamp points must be non-decreasing".into()));
        }
        prev = t;
        while j + 1 < pts.len() && pts[j + 1] <= t {
            acc += abs_pow(x[j + 1] - x[j], p);
            j += 1;
        }
        if pts[j] != t {
            return Err(Error::GridMismatch(format!("point {t} is not a grid point")));
        }
        out.push(acc);
    }
    Ok(out)
}

/// `[x]^{(p)}_{T^n}(1)` for `n = 0..=level`, from the finest samples.
pub fn level_totals(path: &SampledPath, p: f64) -> Result<Vec<f64>> {
    (0..=path.level()).map(|m| pvar_total(&path.subsample(m)?, p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvarNorm {
    pub value: f64,
    /// Level attaining `sup_n ([x]_{T^n}(1))^{1/p}`.
    pub argmax_level: u32,
    pub level_roots: Vec<f64>,
}

/// `|x(0)| + max_{n <= N} ([x]^{(p)}_{T^n}(1))^{1/p}`, the finite-level
/// truncation of the p-variation norm.
pub fn pvar_norm(path: &SampledPath, p: f64) -> Result<PvarNorm> {
    let totals = level_totals(path, p)?;
    let level_roots: Vec<f64> = totals.iter().map(|v| v.powf(1.0 / p)).collect();
    let (argmax, peak) = level_roots
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(PvarNorm { value: path.values[0].abs() + peak, argmax_level: argmax as u32, level_roots })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub last: f64,
    /// `|V_N - V_{N-1}|`, zero when only one level exists.
    pub cauchy_gap: f64,
}

pub fn limit_estimate(totals: &[f64]) -> Result<LimitEstimate> {
    match totals {
        [] => Err(Error::param("no levels to estimate from")),
        [v] => Ok(LimitEstimate { last: *v, cauchy_gap: 0.0 }),
        [.., a, b] => Ok(LimitEstimate { last: *b, cauchy_gap: (b - a).abs() }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Bounded,
    Growing,
    Vanishing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexDiagnostic {
    pub p: f64,
    /// Least-squares slope of `log2 xi_m` over the tail levels, if defined.
    pub slope: Option<f64>,
    pub trend: Trend,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub rows: Vec<IndexDiagnostic>,
    /// Smallest grid exponent whose `xi_m` is not growing.
    pub index_estimate: Option<f64>,
}

pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.02;

pub fn variation_index_estimate(coeffs: &CoefficientArray, p_grid: &[f64]) -> Result<IndexReport> {
    variation_index_estimate_with(coeffs, p_grid, DEFAULT_SLOPE_THRESHOLD)
}

/// Classifies the tail of `xi_m^{(p)}` for each `p` by the log2-slope over the
/// last half of the stored levels: above `threshold` is growing, below
/// `-threshold` vanishing, otherwise bounded. An identically zero tail is
/// vanishing.
pub fn variation_index_estimate_with(coeffs: &CoefficientArray, p_grid: &[f64], threshold: f64) -> Result<IndexReport> {
    let depth = coeffs.depth();
    if depth < 4 {
        return Err(Error::InsufficientLevels { needed: 4, available: depth as usize });
    }
    let start = depth / 2;
    let mut rows = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let xs = (0..depth).map(|m| xi(coeffs, p, m)).collect::<Result<Vec<_>>>()?;
        let tail: Vec<(f64, f64)> = (start..depth).map(|m| (m as f64, xs[m as usize])).collect();
        let (slope, trend) = if tail.iter().all(|&(_, v)| v == 0.0) {
            (None, Trend::Vanishing)
        } else if tail.iter().any(|&(_, v)| v == 0.0) {
            // intermittent zeros: fall back to comparing tail ends
            let last = tail.last().unwrap().1;
            (None, if last == 0.0 { Trend::Vanishing } else { Trend::Bounded })
        } else {
            let pts: Vec<(f64, f64)> = tail.iter().map(|&(m, v)| (m, v.log2())).collect();
            let s = ls_slope(&pts);
            let t = if s > threshold {
                Trend::Growing
            } else if s < -threshold {
                Trend::Vanishing
            } else {
                Trend::Bounded
            };
            (Some(s), t)
        };
        rows.push(IndexDiagnostic { p, slope, trend, xi: xs });
    }
    let index_estimate = rows
        .iter()
        .filter(|r| r.trend != Trend::Growing)
        .map(|r| r.p)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.min(p))));
    Ok(IndexReport { rows, index_estimate })
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Left-point Riemann-Stieltjes sums `int_0^t w dV` at every eval point of
/// the profile, with `V(0) = 0` and `w(0)` weighting the first segment.
///
/// `w` must contain every eval point: either on the profile's level with
/// identical points, or on a finer level of the same q-refining family.
pub fn stieltjes_against_profile(w: &SampledPath, profile: &VariationProfile) -> Result<Vec<f64>> {
    let lookup = eval_lookup(w, profile)?;
    let mut out = Vec::with_capacity(profile.values.len());
    let mut acc = 0.0;
    let mut prev_v = 0.0;
    let mut prev_w = w.values[0];
    for (j, &v) in profile.values.iter().enumerate() {
        acc += prev_w * (v - prev_v);
        out.push(acc);
        prev_v = v;
        prev_w = w.values[lookup[j]];
    }
    Ok(out)
}

/// Positions of the profile's eval points inside `w`'s grid.
fn eval_lookup(w: &SampledPath, profile: &VariationProfile) -> Result<Vec<usize>> {
    let mismatch = || {
        Error::GridMismatch(format!(
            "weight on level {} (q={}) does not contain the level-{} eval points",
            w.level(),
            w.q(),
            profile.level
        ))
    };
    if w.q() != profile.q || w.level() < profile.level {
        return Err(mismatch());
    }
    let stride = qpow(w.q(), w.level() - profile.level);
    profile
        .eval_indices
        .iter()
        .zip(&profile.eval_points)
        .map(|(&i, &t)| {
            let k = i * stride;
            if k < w.values.len() && w.grid.points[k] == t {
                Ok(k)
            } else {
                Err(mismatch())
            }
        })
        .collect()
}

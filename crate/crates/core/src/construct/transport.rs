use serde::{Deserialize, Serialize};

use super::spec::{reference_path, UniformMagnitudeSpec};
use crate::error::{Error, Result};
use crate::schauder::SampledPath;
use crate::variation::{
    abs_pow, check_p, coarse_indices, level_totals, stieltjes_against_profile, VariationProfile,
    DEFAULT_EVAL_LEVEL, DEFAULT_SLOPE_THRESHOLD,
};

/// `y = g x` together with the predicted profile `int_0^t |g|^p d[x]^{(p)}`.
pub fn transport_multiply(
    g: &SampledPath,
    x: &SampledPath,
    x_profile: &VariationProfile,
    p: f64,
) -> Result<(SampledPath, VariationProfile)> {
    check_p(p)?;
    let mut y = g.zip_with(x, |a, b| a * b)?;
    y.meta = x.meta.clone();
    let weight = g.map(|v| abs_pow(v, p))?;
    let values = stieltjes_against_profile(&weight, x_profile)?;
    let predicted = VariationProfile { values, ..x_profile.clone() };
    Ok((y, predicted))
}

/// Trend of `[g]^{(p)}_{T^n}(1)` over the finer half of the levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingCheck {
    pub totals: Vec<f64>,
    /// Least-squares log2 slope over the tail, if all tail totals are positive.
    pub slope: Option<f64>,
    pub vanishing: bool,
}

pub fn vanishing_variation_check(g: &SampledPath, p: f64) -> Result<VanishingCheck> {
    let totals = level_totals(g, p)?;
    let start = totals.len() / 2;
    let tail = &totals[start..];
    if tail.iter().all(|&v| v == 0.0) {
        return Ok(VanishingCheck { totals, slope: None, vanishing: true });
    }
    if tail.len() < 2 || tail.iter().any(|&v| v == 0.0) {
        let last = *tail.last().unwrap();
        return Ok(VanishingCheck { vanishing: last < tail[0], totals, slope: None });
    }
    let pts: Vec<(f64, f64)> = tail.iter().enumerate().map(|(i, v)| (i as f64, v.log2())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(VanishingCheck { vanishing: slope < -DEFAULT_SLOPE_THRESHOLD, totals, slope: Some(slope) })
}

/// Output of the prescribed-variation construction.
#[derive(Debug, Clone)]
pub struct RecipeOutput {
    pub y: SampledPath,
    pub x: SampledPath,
    pub g: SampledPath,
    /// `h(t) = int_0^t h'` by the trapezoid rule at the default eval points.
    pub target: VariationProfile,
    pub check: VanishingCheck,
    pub warning: Option<String>,
}

/// `y = g x` with `g = (h' / C_p)^{1/p}` and `x` the reference path of
/// `spec` on the grid of `hprime`.
pub fn recipe(hprime: &SampledPath, spec: &UniformMagnitudeSpec, c_p: f64) -> Result<RecipeOutput> {
    spec.validate()?;
    let p = spec.p;
    if !(c_p > 0.0 && c_p.is_finite()) {
        return Err(Error::param(format!("variation constant must be positive, got {c_p}")));
    }
    if hprime.q() != spec.q || !hprime.grid.is_qadic() {
        return Err(Error::GridMismatch(format!("h' must be sampled on the {}-adic grid", spec.q)));
    }
    let n = hprime.level();
    if spec.levels < n {
        return Err(Error::InsufficientLevels { needed: n as usize, available: spec.levels as usize });
    }
    if let Some((i, v)) = hprime.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::param(format!("h' is negative ({v}) at grid index {i}")));
    }
    let g = hprime.map(|h| (h / c_p).powf(1.0 / p))?;
    let x = reference_path(spec, n)?;
    let mut y = g.zip_with(&x, |a, b| a * b)?;
    y.meta = x.meta.clone();
    y.meta.extra.insert("variation_constant".into(), c_p.into());

    let check = vanishing_variation_check(&g, p)?;
    let warning = (!check.vanishing).then(|| {
        format!(
            "(h')^(1/p) does not show vanishing p-th variation (slope {:?}); the target may not be reached",
            check.slope
        )
    });
    let idx = coarse_indices(hprime.q(), n, DEFAULT_EVAL_LEVEL);
    let target = trapezoid_profile(hprime, p, &idx);
    Ok(RecipeOutput { y, x, g, target, check, warning })
}

/// Cumulative trapezoid integral of the samples, read at `idx`.
pub(crate) fn trapezoid_profile(f: &SampledPath, p: f64, idx: &[usize]) -> VariationProfile {
    let pts = f.points();
    let mut cum = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        cum[i] = cum[i - 1] + 0.5 * (f.values[i] + f.values[i - 1]) * (pts[i] - pts[i - 1]);
    }
    VariationProfile {
        p,
        q: f.q(),
        level: f.level(),
        eval_indices: idx.to_vec(),
        eval_points: idx.iter().map(|&i| pts[i]).collect(),
        values: idx.iter().map(|&i| cum[i]).collect(),
    }
}

/// `x + M` for `M > ||x||_inf`, a strictly positive path with the same
/// increments up to rounding.
pub fn shifted_reference(x: &SampledPath, shift: f64) -> Result<SampledPath> {
    let sup = x.sup_norm();
    if !(shift > sup) {
        return Err(Error::param(format!("shift {shift} must exceed the sup norm {sup}")));
    }
    let mut out = x.map(|v| v + shift)?;
    out.meta.extra.insert("shift".into(), shift.into());
    Ok(out)
}

//! Moving paths and profiles between q-adic and general q-refining partitions.

use crate::construct::{recipe, RecipeOutput, UniformMagnitudeSpec};
use crate::error::{Error, Result};
use crate::partition::{qadic_grid, HomeomorphismTable};
use crate::schauder::{SampledPath, TimechangeMeta};
use crate::variation::{pvar_clamped_many, pvar_profile, pvar_profile_full, VariationProfile};

/// `x o phi` on the level-`n` refining grid. Since `phi(s_i^n) = i / q^n`
/// the value list is copied unchanged; only the grid changes.
pub fn pullback_path(x: &SampledPath, phi: &HomeomorphismTable) -> Result<SampledPath> {
    if x.q() != phi.q || !x.grid.is_qadic() {
        return Err(Error::GridMismatch(format!("pullback needs a {}-adic path", phi.q)));
    }
    let grid = phi.level_grid(x.level())?;
    let mut out = SampledPath::new(grid, x.values.clone())?;
    out.meta = x.meta.clone();
    out.meta.timechange = Some(TimechangeMeta { table_hash: phi.table_hash.clone(), depth: phi.depth });
    Ok(out)
}

/// Largest gap between `[x o phi]_{P^n}(s)` and `[x]_{T^n}(phi(s))` over all
/// level-`n` refining points `s`.
///
/// The left side is the running profile of the pulled-back path on the
/// refining grid. The right side maps each `s` through `phi` and evaluates
/// the clamped sum on the q-adic grid.
pub fn transported_pvar_check(x: &SampledPath, phi: &HomeomorphismTable, p: f64, n: u32) -> Result<f64> {
    let xn = if x.level() == n { x.clone() } else { x.subsample(n)? };
    let pulled = pullback_path(&xn, phi)?;
    let lhs = pvar_profile_full(&pulled, p)?;
    let mapped: Vec<f64> = pulled.points().iter().map(|&s| phi.forward(s)).collect();
    let rhs = pvar_clamped_many(&xn, p, &mapped)?;
    Ok(lhs.values.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Output of the recipe run through a time change.
#[derive(Debug, Clone)]
pub struct TransportedRecipe {
    /// The constructed path on the refining grid.
    pub y: SampledPath,
    /// The q-adic run of the recipe for `h = H o phi^{-1}`.
    pub qadic: RecipeOutput,
    /// `h'` by central differences on the q-adic grid.
    pub hprime: SampledPath,
    pub p: f64,
}

impl TransportedRecipe {
    /// Empirical refining-grid profile of `y` and the target `H` at the
    /// same points.
    pub fn compare(&self, target: &SampledPath, eval_indices: &[usize]) -> Result<(VariationProfile, Vec<f64>)> {
        let prof = pvar_profile(&self.y, self.p, eval_indices)?;
        let want = eval_indices.iter().map(|&i| target.values[i]).collect();
        Ok((prof, want))
    }
}

/// Central differences on the interior, one-sided at the ends.
fn central_difference(h: &SampledPath) -> Result<SampledPath> {
    let (t, v) = (h.points(), &h.values);
    let last = v.len() - 1;
    let d = (0..=last)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(last));
            (v[b] - v[a]) / (t[b] - t[a])
        })
        .collect();
    SampledPath::new(h.grid.clone(), d)
}

/// Builds `y` on the refining grid of `big_h` with `[y]_P(t) = H(t)`: run the
/// recipe for `h = H o phi^{-1}` on the q-adic grid and pull the result back.
pub fn transported_recipe(
    big_h: &SampledPath,
    phi: &HomeomorphismTable,
    spec: &UniformMagnitudeSpec,
    c_p: f64,
) -> Result<TransportedRecipe> {
    let n = big_h.level();
    let grid = phi.level_grid(n)?;
    if grid.points != big_h.grid.points {
        return Err(Error::GridMismatch("H must be sampled on the level-n refining grid of the table".into()));
    }
    if big_h.values[0] != 0.0 {
        return Err(Error::param(format!("H(0) must be 0, got {}", big_h.values[0])));
    }
    if let Some(i) = big_h.values.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::NonMonotone(format!("H decreases at grid index {i}")));
    }
    // h(i / q^n) = H(s_i^n)
    let h = SampledPath::new(qadic_grid(phi.q, n)?, big_h.values.clone())?;
    let mut hprime = central_difference(&h)?;
    hprime.meta.extra.insert("hprime_method".into(), "central_difference".into());
    let mut qadic = recipe(&hprime, spec, c_p)?;
    qadic.y.meta.extra.insert("hprime_method".into(), "central_difference".into());
    let y = pullback_path(&qadic.y, phi)?;
    Ok(TransportedRecipe { y, qadic, hprime, p: spec.p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::reference_path;
    use crate::partition::{build_homeomorphism, RefiningTable};
    use crate::variation::coarse_indices;

    #[test]
    fn identity_pullback() {
        let phi = build_homeomorphism(&RefiningTable::qadic(2, 8).unwrap()).unwrap();
        let x = SampledPath::qadic_fn(2, 6, |t| (5.0 * t).sin()).unwrap();
        let y = pullback_path(&x, &phi).unwrap();
        assert_eq!(y.grid, x.grid);
        assert_eq!(y.values, x.values);
        assert_eq!(transported_pvar_check(&x, &phi, 2.0, 6).unwrap(), 0.0);
        assert_eq!(y.meta.timechange.as_ref().unwrap().depth, 8);
    }

    #[test]
    fn pullback_keeps_values() {
        let phi = build_homeomorphism(&RefiningTable::random(3, 5, 1).unwrap()).unwrap();
        let x = SampledPath::qadic_fn(3, 4, |t| t * t - t).unwrap();
        let y = pullback_path(&x, &phi).unwrap();
        assert_eq!(y.values, x.values);
        assert_eq!(y.sup_norm(), x.sup_norm());
        assert_ne!(y.grid.points, x.grid.points);
        assert!(pullback_path(&SampledPath::qadic_fn(3, 6, |t| t).unwrap(), &phi).is_err());
    }

    #[test]
    fn transport_identity_is_exact() {
        let spec = UniformMagnitudeSpec::new(2, 2.0, 10);
        let x = reference_path(&spec, 10).unwrap();
        let sq = build_homeomorphism(&RefiningTable::squared(2, 10).unwrap()).unwrap();
        assert!(transported_pvar_check(&x, &sq, 2.0, 10).unwrap() <= 1e-12);

        let s3 = UniformMagnitudeSpec::new(3, 2.0, 8);
        let x3 = reference_path(&s3, 8).unwrap();
        let rnd = build_homeomorphism(&RefiningTable::random(3, 8, 4).unwrap()).unwrap();
        assert!(transported_pvar_check(&x3, &rnd, 2.0, 8).unwrap() <= 1e-12);
        assert!(transported_pvar_check(&x3, &rnd, 3.0, 6).unwrap() <= 1e-12);
    }

    #[test]
    fn holder_transfer_on_square_table() {
        // x(t) = sqrt(t) is 1/2-Hölder; after the square-root time change the
        // quotient at exponent 1/4 stays bounded across levels
        let phi = build_homeomorphism(&RefiningTable::squared(2, 10).unwrap()).unwrap();
        let mut last = 0.0;
        for n in [6, 8, 10] {
            let x = SampledPath::qadic_fn(2, n, f64::sqrt).unwrap();
            let y = pullback_path(&x, &phi).unwrap();
            let h = crate::calculus::holder_quotient(&y, 0.25).unwrap();
            assert!(h.is_finite() && h < 2.0, "n={n} h={h}");
            last = h;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn zero_target_gives_zero_path() {
        let phi = build_homeomorphism(&RefiningTable::squared(2, 8).unwrap()).unwrap();
        let grid = phi.level_grid(8).unwrap();
        let h = SampledPath::from_fn(grid, |_| 0.0).unwrap();
        let out = transported_recipe(&h, &phi, &UniformMagnitudeSpec::new(2, 2.0, 8), 1.0).unwrap();
        assert!(out.y.values.iter().all(|&v| v == 0.0));
        assert_eq!(out.y.meta.extra["hprime_method"], "central_difference");
    }

    #[test]
    fn identity_table_reduces_to_recipe() {
        let n = 8;
        let phi = build_homeomorphism(&RefiningTable::qadic(2, n).unwrap()).unwrap();
        let big_h = SampledPath::qadic_fn(2, n, |t| t * t).unwrap();
        let spec = UniformMagnitudeSpec::new(2, 2.0, n);
        let out = transported_recipe(&big_h, &phi, &spec, 1.0).unwrap();
        let direct = recipe(&out.hprime, &spec, 1.0).unwrap();
        assert_eq!(out.y.values, direct.y.values);
        let (prof, want) = out.compare(&big_h, &coarse_indices(2, n, 4)).unwrap();
        assert_eq!(prof.values.len(), want.len());
    }

    #[test]
    fn rejects_bad_targets() {
        let phi = build_homeomorphism(&RefiningTable::squared(2, 6).unwrap()).unwrap();
        let grid = phi.level_grid(6).unwrap();
        let spec = UniformMagnitudeSpec::new(2, 2.0, 6);
        let dec = SampledPath::from_fn(grid.clone(), |t| -t).unwrap();
        assert!(transported_recipe(&dec, &phi, &spec, 1.0).is_err());
        let shifted = SampledPath::from_fn(grid, |t| t + 1.0).unwrap();
        assert!(transported_recipe(&shifted, &phi, &spec, 1.0).is_err());
        let wrong_grid = SampledPath::qadic_fn(2, 6, |t| t).unwrap();
        assert!(transported_recipe(&wrong_grid, &phi, &spec, 1.0).is_err());
    }
}

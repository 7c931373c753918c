use pathvar::calculus::{
    change_of_variable_residual, follmer_sum, grid_norm, transported_norm, FunctionWithDerivatives, NormSelector,
    Transported,
};
use pathvar::construct::{reference_path, shifted_reference, transport_multiply, UniformMagnitudeSpec};
use pathvar::partition::qadic_grid;
use pathvar::schauder::SampledPath;
use pathvar::variation::{default_eval_indices, pvar_profile, VariationProfile};
use proptest::prelude::*;

fn selectors() -> [NormSelector; 4] {
    [NormSelector::Holder { alpha: 0.4 }, NormSelector::TvPlusSup, NormSelector::Lp { p: 3.0 }, NormSelector::Sup]
}

#[test]
fn square_residual_vanishes_on_every_level() {
    let f = FunctionWithDerivatives::monomial(2, 2);
    let x = reference_path(&UniformMagnitudeSpec::new(2, 2.0, 16), 16).unwrap();
    for n in 0..=16 {
        let r = change_of_variable_residual(&f, &x.subsample(n).unwrap(), 2.0).unwrap();
        assert!(r.sup <= 1e-12, "n={n}: {}", r.sup);
    }
}

#[test]
fn ito_map_is_continuous_in_the_multiplier() {
    let n = 14;
    let f = FunctionWithDerivatives::monomial(4, 2);
    let xbar = reference_path(&UniformMagnitudeSpec::new(2, 2.0, n), n).unwrap();
    let g = SampledPath::qadic_fn(2, n, |u| 1.0 + u * u / 2.0).unwrap();
    let base = follmer_sum(&f, &g.zip_with(&xbar, |a, b| a * b).unwrap(), 2.0).unwrap();
    let gaps: Vec<f64> = [2, 4, 6]
        .iter()
        .map(|&k| {
            let bump = SampledPath::qadic_fn(2, n, |u| 2f64.powi(-k) * (std::f64::consts::PI * u).sin()).unwrap();
            let gk = g.zip_with(&bump, |a, b| a + b).unwrap();
            let s = follmer_sum(&f, &gk.zip_with(&xbar, |a, b| a * b).unwrap(), 2.0).unwrap();
            s.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn predicted_variation_is_an_lp_norm() {
    let n = 10;
    let c = 0.75;
    for p in [2.0, 3.0] {
        let grid = qadic_grid(2, n).unwrap();
        let g = SampledPath::from_fn(grid.clone(), |u| (3.0 * u).cos() + 0.2).unwrap();
        let xbar = SampledPath::from_fn(grid, |u| 2.0 + u).unwrap();
        let idx = default_eval_indices(&g);
        let pts = idx.iter().map(|&i| g.points()[i]).collect();
        let lin = VariationProfile::linear(p, 2, n, c, idx, pts).unwrap();
        let (_, predicted) = transport_multiply(&g, &xbar, &lin, p).unwrap();
        let lhs = predicted.terminal().unwrap().powf(1.0 / p);
        let rhs = c.powf(1.0 / p) * grid_norm(&g, &NormSelector::Lp { p }).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12, "p={p}: {lhs} vs {rhs}");
    }
}

#[test]
fn shift_keeps_profile() {
    let n = 12;
    let x = reference_path(&UniformMagnitudeSpec::new(2, 2.0, n), n).unwrap();
    let s = shifted_reference(&x, x.sup_norm() + 1.0).unwrap();
    let idx = default_eval_indices(&x);
    let gap = pvar_profile(&s, 2.0, &idx).unwrap().max_gap(&pvar_profile(&x, 2.0, &idx).unwrap()).unwrap();
    assert!(gap <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn square_residual_vanishes_on_any_path(v in prop::collection::vec(-10.0f64..10.0, 65)) {
        let y = SampledPath::new(qadic_grid(2, 6).unwrap(), v).unwrap();
        let r = change_of_variable_residual(&FunctionWithDerivatives::monomial(2, 2), &y, 2.0).unwrap();
        let scale = y.sup_norm().powi(2).max(1.0);
        prop_assert!(r.sup <= 1e-12 * scale * 64.0);
    }

    #[test]
    fn transported_space_is_isometric(
        gv in prop::collection::vec(-3.0f64..3.0, 129),
        xv in prop::collection::vec(0.1f64..5.0, 129),
    ) {
        let grid = qadic_grid(2, 7).unwrap();
        let g = SampledPath::new(grid.clone(), gv).unwrap();
        let xbar = SampledPath::new(grid, xv).unwrap();
        let t = Transported::new(g.clone(), xbar.clone()).unwrap();
        for sel in selectors() {
            let direct = grid_norm(&g, &sel).unwrap();
            prop_assert_eq!(t.norm(&sel).unwrap(), direct);
            let via = transported_norm(&t.path(), &xbar, &sel).unwrap();
            prop_assert!((via - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }
}

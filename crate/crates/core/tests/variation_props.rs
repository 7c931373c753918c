use pathvar::calculus::{grid_norm, NormSelector};
use pathvar::schauder::SampledPath;
use pathvar::partition::qadic_grid;
use pathvar::variation::{level_totals, pvar_profile_full, stieltjes_against_profile, default_eval_indices, pvar_profile, VariationProfile};
use proptest::prelude::*;

fn random_path() -> impl Strategy<Value = SampledPath> {
    (2u32..=4, 1u32..=6).prop_flat_map(|(q, n)| {
        prop::collection::vec(-5.0f64..5.0, (q as usize).pow(n) + 1)
            .prop_map(move |v| SampledPath::new(qadic_grid(q, n).unwrap(), v).unwrap())
    })
}

proptest! {
    #[test]
    fn profiles_are_monotone(x in random_path(), p in 1.0f64..6.0) {
        prop_assert!(pvar_profile_full(&x, p).unwrap().is_monotone());
    }

    #[test]
    fn variation_roots_decrease_in_p(x in random_path(), p in 1.0f64..4.0, dp in 0.1f64..3.0) {
        let r = p + dp;
        let lo = level_totals(&x, p).unwrap();
        let hi = level_totals(&x, r).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(b.powf(1.0 / r) <= a.powf(1.0 / p) * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn holder_paths_have_decaying_profiles(p in 2.0f64..4.0, frac in 0.05f64..0.9, n in 1u32..=10) {
        let alpha = 1.0 / p + frac * (1.0 - 1.0 / p) * 0.99;
        let x = SampledPath::qadic_fn(2, n, |t| t).unwrap();
        let norm = grid_norm(&x, &NormSelector::Holder { alpha }).unwrap();
        let total = *level_totals(&x, p).unwrap().last().unwrap();
        prop_assert!(total <= 2f64.powf(n as f64 * (1.0 - alpha * p)) * norm * (1.0 + 1e-12));
    }
}

#[test]
fn stieltjes_against_constant_and_identity() {
    let n = 12;
    let idx = default_eval_indices(&SampledPath::qadic_fn(2, n, |t| t).unwrap());
    let grid = qadic_grid(2, n).unwrap();
    let pts: Vec<f64> = idx.iter().map(|&i| grid.points[i]).collect();
    let lin = VariationProfile::linear(2.0, 2, n, 3.0, idx, pts.clone()).unwrap();
    let c = SampledPath::qadic_fn(2, n, |_| 2.5).unwrap();
    for (v, t) in stieltjes_against_profile(&c, &lin).unwrap().iter().zip(&pts) {
        assert!((v - 7.5 * t).abs() <= 1e-12);
    }
    let u = SampledPath::qadic_fn(2, n, |t| t).unwrap();
    let got = stieltjes_against_profile(&u, &lin).unwrap();
    for (v, t) in got.iter().zip(&pts) {
        assert!((v - 1.5 * t * t).abs() <= 3.0 / 1024.0 + 1e-12);
    }
}

#[test]
fn profile_of_line_is_power_law() {
    for n in 0..=12 {
        let x = SampledPath::qadic_fn(3, n.min(8), |t| 2.0 * t).unwrap();
        let m = x.level() as i32;
        let prof = pvar_profile(&x, 3.0, &default_eval_indices(&x)).unwrap();
        let want = 8.0 * 3f64.powi(-2 * m);
        assert!((prof.terminal().unwrap() - want).abs() <= 1e-14 * want.max(1.0));
    }
}

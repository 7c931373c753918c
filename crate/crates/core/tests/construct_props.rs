use pathvar::construct::{
    increment_identity_gap, reference_path, splice, transport_multiply, SignRule, UniformMagnitudeSpec,
};
use pathvar::schauder::{xi, CoefficientArray, SampledPath};
use pathvar::variation::{coarse_indices, default_eval_indices, level_totals, limit_estimate, pvar_profile};
use proptest::prelude::*;

#[test]
fn increment_identity_up_to_level_16() {
    for n in [1, 5, 12, 16] {
        for (q, p) in [(2, 2.0), (2, 3.5)] {
            let gap = increment_identity_gap(&UniformMagnitudeSpec::new(q, p, n), n).unwrap();
            assert!(gap <= 1e-12, "q={q} p={p} n={n}: {gap}");
        }
    }
    let gap = increment_identity_gap(&UniformMagnitudeSpec::new(3, 2.0, 9).with_weights(vec![1.0, -2.0]), 9).unwrap();
    assert!(gap <= 1e-12);
}

#[test]
fn blocks_share_the_variation_equally() {
    let (n, m) = (16, 4);
    for p in [2.0, 3.0, 4.0] {
        let x = reference_path(&UniformMagnitudeSpec::new(2, p, n), n).unwrap();
        let prof = pvar_profile(&x, p, &coarse_indices(2, n, m)).unwrap();
        let share = prof.terminal().unwrap() / 16.0;
        let worst = prof.values.windows(2).map(|w| (w[1] - w[0] - share).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-2, "p={p}: {worst}");
    }
}

#[test]
fn ternary_totals_settle() {
    let spec = UniformMagnitudeSpec::new(3, 2.0, 10).with_weights(vec![1.0, 1.0]);
    let totals = level_totals(&reference_path(&spec, 10).unwrap(), 2.0).unwrap();
    let est = limit_estimate(&totals).unwrap();
    assert!(est.cauchy_gap < 1e-3, "{est:?}");
    assert!((est.last - 1.0).abs() <= 2e-2);
}

#[test]
fn transport_matches_stieltjes_prediction() {
    let n = 16;
    let x = reference_path(&UniformMagnitudeSpec::new(2, 2.0, n), n).unwrap();
    let idx = default_eval_indices(&x);
    let x_prof = pvar_profile(&x, 2.0, &idx).unwrap();
    let gs: [fn(f64) -> f64; 2] = [|u| u, |u| 1.0 + u * u / 2.0];
    for g in gs {
        let g = SampledPath::qadic_fn(2, n, g).unwrap();
        let (y, predicted) = transport_multiply(&g, &x, &x_prof, 2.0).unwrap();
        let empirical = pvar_profile(&y, 2.0, &idx).unwrap();
        let scale = predicted.values.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let gap = empirical.max_gap(&predicted).unwrap();
        assert!(gap <= 0.02 * scale, "gap {gap} scale {scale}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn signs_do_not_change_level_totals(seed in any::<u64>(), p in 1.5f64..4.0) {
        let n = 10;
        let plus = level_totals(&reference_path(&UniformMagnitudeSpec::new(2, p, n), n).unwrap(), p).unwrap();
        let spec = UniformMagnitudeSpec::new(2, p, n).with_signs(SignRule::Seeded(seed));
        let signed = level_totals(&reference_path(&spec, n).unwrap(), p).unwrap();
        for (a, b) in plus.iter().zip(&signed) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn splice_keeps_coarse_shape_and_fine_detail(
        xs in prop::collection::vec(-2.0f64..2.0, 63),
        ys in prop::collection::vec(-2.0f64..2.0, 63),
        n in 0u32..=6,
    ) {
        let build = |v: &[f64]| {
            let levels = (0..6).map(|m| v[(1 << m) - 1..(1 << (m + 1)) - 1].to_vec()).collect();
            CoefficientArray::new(2, [v[0], v[1]], levels).unwrap()
        };
        let (x, y) = (build(&xs), build(&ys));
        let s = splice(&x, &y, n).unwrap();
        for m in n..6 {
            prop_assert_eq!(xi(&s, 2.0, m).unwrap(), xi(&y, 2.0, m).unwrap());
        }
        for m in 0..n {
            prop_assert_eq!(&s.levels[m as usize], &x.levels[m as usize]);
        }
    }
}

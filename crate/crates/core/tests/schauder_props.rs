use pathvar::partition::qadic_grid;
use pathvar::schauder::{analyze, schauder_eval, synthesize, CoefficientArray, GammaMatrix};
use proptest::prelude::*;

fn coefficients() -> impl Strategy<Value = CoefficientArray> {
    (2u32..=4, 1u32..=6).prop_flat_map(|(q, depth)| {
        let levels = (0..depth)
            .map(|m| prop::collection::vec(-3.0f64..3.0, (q as usize).pow(m) * (q as usize - 1)))
            .collect::<Vec<_>>();
        (Just(q), prop::array::uniform2(-2.0f64..2.0), levels)
            .prop_map(|(q, boundary, levels)| CoefficientArray::new(q, boundary, levels).unwrap())
    })
}

#[test]
fn gamma_rows_are_orthonormal_and_mean_zero() {
    for q in 2..=8 {
        let g = GammaMatrix::new(q).unwrap();
        assert!(g.max_orthonormality_error() <= 1e-12, "q={q}");
        for ell in 1..q {
            assert!(g.row(ell).iter().sum::<f64>().abs() <= 1e-12);
        }
    }
    assert_eq!(GammaMatrix::new(2).unwrap().row(1), &[1.0, -1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fine_levels_do_not_reach_coarse_points(c in coefficients(), cut in 0u32..6) {
        let n = cut.min(c.depth());
        let full = synthesize(&c, n).unwrap();
        let coarse = synthesize(&c.truncated(n), n).unwrap();
        prop_assert_eq!(full.values, coarse.values);
    }

    #[test]
    fn analyze_inverts_synthesize(c in coefficients()) {
        let back = analyze(&synthesize(&c, c.depth()).unwrap()).unwrap();
        prop_assert_eq!(back.depth(), c.depth());
        for (a, b) in back.boundary.iter().zip(&c.boundary) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (la, lb) in back.levels.iter().zip(&c.levels) {
            for (a, b) in la.iter().zip(lb) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn schauder_functions_vanish_on_own_grid(q in 2u32..=5, m in 0u32..=4, seed in any::<u64>()) {
        let k = seed % (q as u64).pow(m);
        let ell = 1 + (seed / 7 % (q as u64 - 1)) as u32;
        for t in qadic_grid(q, m).unwrap().points {
            prop_assert_eq!(schauder_eval(q, m, k, ell, t).unwrap(), 0.0);
        }
    }
}

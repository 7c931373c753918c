use pathvar::partition::{ancestor_index, build_homeomorphism, digits, qadic_grid, RefiningTable};
use proptest::prelude::*;

fn qn_k() -> impl Strategy<Value = (u32, u32, u64)> {
    (2u32..=5, 0u32..=8).prop_flat_map(|(q, n)| (Just(q), Just(n), 0..(q as u64).pow(n)))
}

proptest! {
    #[test]
    fn digits_reconstruct((q, n, k) in qn_k()) {
        let d = digits(k, n, q).unwrap();
        prop_assert_eq!(d.digits.len(), n as usize);
        prop_assert!(d.digits.iter().all(|&x| x < q));
        prop_assert_eq!(d.reconstruct(), k);
    }

    #[test]
    fn ancestors_step_by_one_digit((q, n, k) in qn_k().prop_filter("needs two levels", |t| t.1 >= 2)) {
        let d = digits(k, n, q).unwrap();
        for m in 0..n - 1 {
            let coarse = ancestor_index(m, n, k, q).unwrap();
            let fine = ancestor_index(m + 1, n, k, q).unwrap();
            prop_assert_eq!(fine, q as u64 * coarse + d.get((n - m) as usize) as u64);
        }
    }

    #[test]
    fn random_tables_give_homeomorphisms(q in 2u32..=4, depth in 1u32..=6, seed in any::<u64>()) {
        let phi = build_homeomorphism(&RefiningTable::random(q, depth, seed).unwrap()).unwrap();
        prop_assert!(phi.is_strictly_increasing());
        prop_assert_eq!(phi.forward(0.0), 0.0);
        prop_assert_eq!(phi.forward(1.0), 1.0);
        let pts = phi.level_points(depth).unwrap();
        let qadic = qadic_grid(q, depth).unwrap();
        for (s, u) in pts.iter().zip(&qadic.points) {
            prop_assert!((phi.forward(*s) - u).abs() <= 1e-15);
            prop_assert!((phi.inverse(*u) - s).abs() <= 1e-15);
        }
    }
}

#[test]
fn square_table_inverts_to_square_root() {
    let phi = build_homeomorphism(&RefiningTable::squared(2, 8).unwrap()).unwrap();
    for (i, s) in phi.level_points(8).unwrap().iter().enumerate() {
        let u = i as f64 / 256.0;
        assert!((s - u * u).abs() <= 1e-15);
        assert!((phi.forward(*s) - s.sqrt()).abs() <= 1e-14);
    }
}

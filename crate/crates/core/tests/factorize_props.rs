use deepconv::factorize::{factor_replication, factor_sequence, find_roots, replication_roots, replication_sequence};
use deepconv::seqconv::convolve_all;
use deepconv::FilterSeq;
use num_complex::Complex64;
use proptest::prelude::*;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn factorization_round_trip(w in prop::collection::vec(-2.0f64..2.0, 2..40), s in 2usize..=4) {
        prop_assume!(w.last().unwrap().abs() > 1e-3);
        let f = FilterSeq::new(w.clone()).unwrap();
        let res = factor_sequence(&f, s, None).unwrap();
        let deg = w.len() - 1;
        prop_assert!(res.filters.len() <= deg.div_ceil(s - 1));
        for g in &res.filters {
            prop_assert!(g.len() <= s + 1);
            prop_assert!(g.coeffs().iter().all(|v| v.is_finite()));
        }
        let back = convolve_all(&res.filters);
        prop_assert!(max_diff(back.coeffs(), &w) <= 1e-8 * f.l1_norm());
    }

    #[test]
    fn padding_adds_deltas(w in prop::collection::vec(-2.0f64..2.0, 3..10), extra in 0usize..4) {
        prop_assume!(w.last().unwrap().abs() > 1e-3);
        let f = FilterSeq::new(w.clone()).unwrap();
        let need = (w.len() - 1).div_ceil(2);
        let res = factor_sequence(&f, 3, Some(need + extra)).unwrap();
        prop_assert_eq!(res.filters.len(), need + extra);
        prop_assert!(max_diff(convolve_all(&res.filters).coeffs(), &w) <= 1e-8 * f.l1_norm());
    }

    #[test]
    fn roots_of_real_polynomials_come_in_conjugate_pairs(w in prop::collection::vec(-2.0f64..2.0, 2..25)) {
        prop_assume!(w.last().unwrap().abs() > 1e-2);
        let roots = find_roots(&w).unwrap();
        prop_assert_eq!(roots.len(), w.len() - 1);
        for r in &roots {
            let conj_close = roots.iter().any(|q| (q - r.conj()).norm() <= 1e-6 * (1.0 + r.norm()));
            prop_assert!(conj_close);
        }
    }
}

#[test]
fn replication_roots_reconstruct_symbol() {
    for &(k, n) in &[(2usize, 3usize), (3, 5), (5, 7)] {
        let roots = replication_roots(k, n).unwrap();
        let mut poly = vec![Complex64::new(1.0, 0.0)];
        for r in &roots {
            let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            poly = next;
        }
        let target = replication_sequence(k, n).unwrap();
        assert_eq!(poly.len(), target.len());
        for (p, t) in poly.iter().zip(target.coeffs()) {
            assert!((p.re - t).abs() <= 1e-8 && p.im.abs() <= 1e-8, "K={k} N={n}");
        }
    }
}

#[test]
fn replication_roots_match_symbol_values() {
    for &(k, n) in &[(6usize, 11usize), (20, 61)] {
        let roots = replication_roots(k, n).unwrap();
        let target = replication_sequence(k, n).unwrap();
        assert_eq!(roots.len(), target.len() - 1);
        for t in 0..16 {
            let z = Complex64::from_polar(0.9 + 0.2 * (t as f64 / 15.0), 0.37 + t as f64);
            let prod: Complex64 = roots.iter().map(|r| z - r).product();
            let val: Complex64 = target.coeffs().iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
            assert!((prod - val).norm() <= 1e-8 * val.norm().max(1.0), "K={k} N={n}");
        }
    }
}

#[test]
fn replication_factors_are_real_and_short() {
    let bound = (60 * 20usize).div_ceil(3);
    let res = factor_replication(20, 61, 4, None).unwrap();
    assert!(res.filters.len() <= bound);
    assert!(res.filters.iter().all(|f| f.len() <= 5));
    assert!(res.residual <= 1e-8);
    let res = factor_replication(20, 61, 4, Some(bound)).unwrap();
    assert_eq!(res.filters.len(), bound);
    assert!(res.filters.iter().all(|f| f.len() <= 5));
    assert!(res.residual <= 1e-8);
}

#[test]
fn even_replication_count_rejected() {
    assert!(replication_sequence(3, 4).is_err());
    assert!(factor_replication(3, 4, 2, None).is_err());
}

use approx::assert_abs_diff_eq;
use deepconv::seqconv::{apply_conv, convolve_slices, downsample};
use deepconv::FilterSeq;
use nalgebra::DVector;
use proptest::prelude::*;

fn filt(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..=max_len)
}

fn int_filt(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-4i32..=4).prop_map(f64::from), 1..=max_len)
}

proptest! {
    #[test]
    fn toeplitz_product_identity(w in filt(5), v in filt(5), k in 1usize..12) {
        let wv = FilterSeq::new(convolve_slices(&w, &v)).unwrap();
        let fw = FilterSeq::new(w.clone()).unwrap();
        let fv = FilterSeq::new(v.clone()).unwrap();
        let lhs = wv.materialize(k);
        let rhs = fw.materialize(k + fv.degree()) * fv.materialize(k);
        prop_assert_eq!(lhs.shape(), rhs.shape());
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn toeplitz_product_exact_on_integers(w in int_filt(5), v in int_filt(5), k in 1usize..12) {
        let wv = FilterSeq::new(convolve_slices(&w, &v)).unwrap();
        let fw = FilterSeq::new(w).unwrap();
        let fv = FilterSeq::new(v).unwrap();
        prop_assert_eq!(wv.materialize(k), fw.materialize(k + fv.degree()) * fv.materialize(k));
    }

    #[test]
    fn apply_matches_materialize(w in filt(6), x in prop::collection::vec(-5.0f64..5.0, 1..15)) {
        let f = FilterSeq::new(w).unwrap();
        let y = f.apply(&x);
        let m = f.materialize(x.len()) * DVector::from_vec(x.clone());
        prop_assert_eq!(y.len(), m.len());
        for (a, b) in y.iter().zip(m.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn output_bounded_by_l1_norm(w in filt(6), x in prop::collection::vec(-5.0f64..5.0, 1..15)) {
        let f = FilterSeq::new(w).unwrap();
        let sup = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for v in f.apply(&x) {
            prop_assert!(v.abs() <= f.l1_norm() * sup * (1.0 + 1e-12));
        }
    }

    #[test]
    fn convolution_commutes_and_associates(a in filt(5), b in filt(5), c in filt(5)) {
        let ab = convolve_slices(&a, &b);
        let ba = convolve_slices(&b, &a);
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let l = convolve_slices(&ab, &c);
        let r = convolve_slices(&a, &convolve_slices(&b, &c));
        for (x, y) in l.iter().zip(&r) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn downsample_picks_multiples(v in prop::collection::vec(-5.0f64..5.0, 1..30), m in 1usize..6) {
        prop_assume!(m <= v.len());
        let out = downsample(&v, m).unwrap();
        prop_assert_eq!(out.len(), v.len() / m);
        for (i, o) in out.iter().enumerate() {
            prop_assert_eq!(*o, v[(i + 1) * m - 1]);
        }
    }
}

#[test]
fn padded_convolution_lengths() {
    let y = apply_conv(&[1.0, 2.0], &[1.0, 1.0, 1.0], 3);
    assert_eq!(y, vec![1.0, 3.0, 3.0, 2.0, 0.0, 0.0]);
    let d = FilterSeq::delta();
    assert_abs_diff_eq!(d.apply(&[1.5, -2.0])[..], [1.5, -2.0][..]);
}

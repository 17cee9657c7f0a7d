mod common;

use deepconv::dataset::Dataset;
use deepconv::dcnn::{ConvLayer, Dcnn};
use deepconv::deepen::{
    build_block, embed_teacher, hat, interpolate, interpolate_with, j1, j3, linear_feature_block, linear_feature_params,
    linear_feature_sequence, DeepenOptions,
};
use deepconv::FilterSeq;
use rand::Rng;

fn head_free(input_dim: usize, s: usize, layers: Vec<ConvLayer>) -> Dcnn {
    let mut probe = Dcnn { input_dim, filter_len: s, layers, out_coeffs: vec![], out_offset: 0.0, truncation: None };
    let w = *probe.widths().last().unwrap();
    probe.out_coeffs = vec![0.0; w];
    probe.validate().unwrap();
    probe
}

fn final_layer(net: &Dcnn, x: &[f64]) -> Vec<f64> {
    net.precise_final_layer(&[x.to_vec()]).iter().map(|v| v.to_f64()).collect()
}

fn unit(r: &mut rand_chacha::ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / n).collect()
}

#[test]
fn delta_block_transports_its_input() {
    let b = build_block(&FilterSeq::delta(), 2, 3, 0.0, 5.0, None).unwrap();
    let net = head_free(3, 2, b.layers.clone());
    let x = [1.0, -4.0, 2.5];
    let out = final_layer(&net, &x);
    for (i, &xi) in x.iter().enumerate() {
        assert!((out[i] - (xi + b.bound_b)).abs() <= 1e-12);
    }
}

#[test]
fn block_output_matches_convolutional_matrix() {
    let w = FilterSeq::new(vec![1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
    let b = build_block(&w, 2, 2, 0.0, 10.0, None).unwrap();
    assert_eq!(b.layers.len(), 4);
    let net = head_free(2, 2, b.layers.clone());
    let m = w.materialize(2);
    let mut r = common::rng(11);
    for x in common::uniform_points(&mut r, 20, 2, 10.0) {
        let out = final_layer(&net, &x);
        let tx = &m * nalgebra::DVector::from_vec(x.clone());
        for (o, t) in out.iter().zip(tx.iter()) {
            assert!((o - b.bound_b - t).abs() <= 1e-8);
        }
        let (hs, _) = net.forward(&x).unwrap();
        for h in &hs[1..] {
            assert!(h.iter().all(|v| *v > 0.0), "a ReLU clipped");
        }
    }
}

#[test]
fn linear_feature_sequence_layout() {
    let w = linear_feature_sequence(&[1.0, 1.0]);
    assert_eq!(w.coeffs(), &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
}

#[test]
fn linear_feature_block_closed_form() {
    let mut r = common::rng(12);
    for d in 2..=4 {
        for s in [2usize, 4].into_iter().filter(|&s| s <= d) {
            let xi = unit(&mut r, d);
            let b0 = 1.0;
            let blk = linear_feature_block(&xi, s, b0).unwrap();
            assert_eq!(blk.layers.len(), j1(d, s));
            assert_eq!(blk.out_dim, 1 + j1(d, s) * s / d);
            assert!(blk.out_dim >= 2 * d);
            let net = head_free(d, s, blk.layers.clone());
            for x in common::uniform_points(&mut r, 30, d, b0) {
                let out = final_layer(&net, &x);
                let mut expect = vec![0.0; blk.out_dim];
                expect[0] = xi.iter().zip(&x).map(|(a, b)| a * b).sum();
                for k in 0..d {
                    expect[2 * k + 1] = x[k];
                }
                for (o, e) in out.iter().zip(&expect) {
                    assert!((o - e - blk.bound_b).abs() <= 1e-7, "d={d} s={s}");
                }
            }
        }
    }
}

#[test]
fn linear_feature_block_with_coordinate_direction() {
    let blk = linear_feature_block(&[1.0, 0.0], 2, 2.0).unwrap();
    let net = head_free(2, 2, blk.layers.clone());
    let out = final_layer(&net, &[0.75, -1.5]);
    assert!((out[0] - 0.75 - blk.bound_b).abs() <= 1e-8);
    assert!((out[1] - 0.75 - blk.bound_b).abs() <= 1e-8);
}

#[test]
fn linear_feature_widths_and_params() {
    for d in 2..=8 {
        for s in 2..=d {
            let k = j1(d, s);
            assert_eq!(k, (2 * d * d - 1).div_ceil(s - 1));
            assert!(1 + k * s / d >= 2 * d);
            assert_eq!(linear_feature_params(d, s), k * (s + 2) + 1);
        }
    }
    assert!(linear_feature_block(&[1.0, 0.0], 3, 1.0).is_err());
    assert!(linear_feature_block(&[1.0, 0.0], 1, 1.0).is_err());
}

fn prefix_net(teacher: &Dcnn, xi: &[f64], b0: f64, upto: usize) -> (Dcnn, deepconv::deepen::Embedding) {
    let s = 2 * teacher.filter_len;
    let lin = linear_feature_block(xi, s, b0).unwrap();
    let l1: f64 = xi.iter().map(|v| v.abs()).sum();
    let emb = embed_teacher(teacher, &lin, l1, b0, s).unwrap();
    let mut layers = lin.layers.clone();
    layers.extend(emb.block.layers[..upto].iter().cloned());
    (head_free(teacher.input_dim, s, layers), emb)
}

#[test]
fn delta_teacher_embeds_relu_of_input() {
    let layer = ConvLayer::new(FilterSeq::new(vec![1.0, 0.0, 0.0]).unwrap(), vec![0.0; 6], deepconv::dcnn::BiasShape::Free, None);
    let teacher = Dcnn::new(4, 2, vec![layer], vec![0.0; 6], 0.0, None).unwrap();
    let mut r = common::rng(13);
    let xi = unit(&mut r, 4);
    let (net, _) = prefix_net(&teacher, &xi, 1.0, 1);
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| r.gen_range(0.0..1.0)).collect();
        let out = final_layer(&net, &x);
        for (p, v) in out.iter().enumerate().skip(1) {
            let expect = if p % 2 == 1 && p / 2 < 4 { x[p / 2] } else { 0.0 };
            assert!((v - expect).abs() <= 1e-9, "p={p}");
        }
    }
}

#[test]
fn embedding_reproduces_teacher_layers() {
    let mut r = common::rng(14);
    let teacher = common::random_teacher(&mut r, 4, 2, 2);
    let xi = unit(&mut r, 4);
    let b0 = 1.0;
    for depth in 1..=2 {
        let (net, emb) = prefix_net(&teacher, &xi, b0, depth);
        for x in common::uniform_points(&mut r, 100, 4, b0) {
            let (hs, _) = teacher.forward(&x).unwrap();
            let out = final_layer(&net, &x);
            for (k, h) in hs[depth].iter().enumerate() {
                assert!((out[2 * k + 1] - h).abs() <= 1e-7);
            }
            for (p, v) in out.iter().enumerate().skip(1) {
                if p % 2 == 0 || p / 2 >= hs[depth].len() {
                    assert_eq!(*v, 0.0);
                }
            }
            let lead = emb.lead_products[depth - 1];
            let proj: f64 = xi.iter().zip(&x).map(|(a, b)| a * b).sum();
            let shift = emb.slot0_shifts[depth - 1].to_f64();
            assert!((out[0] - lead * proj - shift).abs() <= 1e-7);
        }
    }
}

#[test]
fn zero_leading_tap_is_rejected() {
    let mut r = common::rng(15);
    let mut teacher = common::random_teacher(&mut r, 4, 2, 2);
    let mut taps = teacher.layers[1].filter.coeffs().to_vec();
    taps[0] = 0.0;
    teacher.layers[1].filter = FilterSeq::new(taps).unwrap();
    let lin = linear_feature_block(&[0.5, 0.5, 0.5, 0.5], 4, 1.0).unwrap();
    let err = embed_teacher(&teacher, &lin, 2.0, 1.0, 4).unwrap_err();
    assert!(err.to_string().contains("zero leading filter tap"));
}

#[test]
fn single_datum_replication_and_interpolation() {
    let mut r = common::rng(16);
    let teacher = common::random_teacher(&mut r, 4, 2, 2);
    let data = common::random_data(&mut r, 1, 4);
    let opts = DeepenOptions { n_rep: Some(3), ..DeepenOptions::new(4, 3) };
    let out = interpolate_with(&teacher, &data, &opts).unwrap();
    let st = &out.student;
    let plan = &out.plan;
    let lay = &out.layout;
    assert!((st.predict_precise(&data.xs[0]).unwrap() - data.ys[0]).abs() <= 1e-6);
    let xs = common::uniform_points(&mut r, 50, 4, 1.0);
    let finals = st.precise_final_layer(&xs);
    let b = xs.len();
    for (t, x) in xs.iter().enumerate() {
        let at = |p: usize| finals[p * b + t].to_f64();
        let u = plan.project(x);
        for (k, &p) in lay.ramp_positions.iter().enumerate() {
            let expect = plan.wstar_abs * (u - plan.t_grid[k]).max(0.0);
            assert!((at(p) - expect).abs() <= 1e-7, "ramp {k}");
        }
        let (hs, _) = teacher.forward(x).unwrap();
        for (m, &p) in lay.teacher_positions.iter().enumerate() {
            let expect = lay.teacher_gain * (hs.last().unwrap()[m] + lay.teacher_offset);
            assert!((at(p) - expect).abs() <= 1e-7 * (1.0 + expect.abs()));
        }
        for p in 0..st.out_coeffs.len() {
            if !lay.ramp_positions.contains(&p) && !lay.teacher_positions.contains(&p) {
                assert_eq!(at(p), 0.0, "position {p}");
            }
        }
        let y = st.predict_precise(x).unwrap();
        if !plan.in_slab(x) {
            assert!((y - common::teacher_head(&teacher, x)).abs() <= 1e-6);
        }
    }
}

#[test]
fn small_sample_interpolation_and_off_slab_agreement() {
    let mut r = common::rng(17);
    let teacher = common::random_teacher(&mut r, 4, 2, 2);
    let data = common::random_data(&mut r, 6, 4);
    let (st, plan) = interpolate(&teacher, &data, 4, 9).unwrap();
    let fit = st.predict_precise_batch(&data.xs).unwrap();
    for (f, y) in fit.iter().zip(&data.ys) {
        assert!((f - y).abs() <= 1e-6);
    }
    let xs = common::uniform_points(&mut r, 100, 4, 1.0);
    let p = st.predict_precise_batch(&xs).unwrap();
    for (x, v) in xs.iter().zip(p) {
        if !plan.in_slab(x) {
            assert!((v - common::teacher_head(&teacher, x)).abs() <= 1e-7);
        }
    }
}

#[test]
fn depth_width_and_parameter_bookkeeping() {
    let mut r = common::rng(18);
    let teacher = common::random_teacher(&mut r, 4, 2, 3);
    let data = common::random_data(&mut r, 5, 4);
    let out = interpolate_with(&teacher, &data, &DeepenOptions::new(4, 1)).unwrap();
    let rep = &out.report;
    let k = 1 + j1(4, 4) * 4 / 4 + 3 * 4;
    assert_eq!(rep.n_rep, 15);
    assert_eq!(rep.j1, j1(4, 4));
    assert_eq!(rep.j2, 3);
    assert_eq!(rep.j3, j3(k, 15, 4));
    assert_eq!(out.student.depth(), rep.j1 + rep.j2 + rep.j3);
    assert_eq!(rep.final_width, k + rep.j3 * 4);
    assert_eq!(out.student.widths().last().copied(), Some(rep.final_width));
    assert_eq!(rep.added_params.total(), rep.final_width + j1(4, 4) * (4 + 2) + 3);
    assert_eq!(rep.student_params, rep.teacher_params + rep.added_params.total());
    assert_eq!(out.plan.t_grid.len(), 15);
    assert!(out.plan.t_grid.windows(2).all(|w| w[0] < w[1]));
    assert!(out.plan.eps < out.plan.eps_star());
}

#[test]
fn slab_mass_shrinks_with_eps() {
    let mut r = common::rng(19);
    let teacher = common::random_teacher(&mut r, 4, 2, 2);
    let data = common::random_data(&mut r, 20, 4);
    let test = common::uniform_points(&mut r, 20000, 4, 1.0);
    let mut masses = Vec::new();
    for frac in [0.5, 0.25, 0.125] {
        let opts = DeepenOptions { eps_frac: frac, ..DeepenOptions::new(4, 2) };
        let out = interpolate_with(&teacher, &data, &opts).unwrap();
        masses.push(test.iter().filter(|x| out.plan.in_slab(x)).count());
    }
    assert!(masses[0] > masses[1] && masses[1] > masses[2], "{masses:?}");
}

#[test]
fn hat_function_shape() {
    let eps = 0.3;
    assert_eq!(hat(0.0, eps), 1.0);
    assert_eq!(hat(eps, eps), 0.0);
    assert_eq!(hat(-eps, eps), 0.0);
    for i in 0..=100 {
        let u = -2.0 * eps + 4.0 * eps * i as f64 / 100.0;
        let expect = (1.0 - u.abs() / eps).max(0.0);
        assert!((hat(u, eps) - expect).abs() <= 1e-12);
    }
}

#[test]
fn invalid_deepening_requests() {
    let mut r = common::rng(20);
    let teacher = common::random_teacher(&mut r, 4, 2, 2);
    let data = common::random_data(&mut r, 4, 4);
    assert!(interpolate(&teacher, &data, 3, 0).is_err());
    let even = DeepenOptions { n_rep: Some(14), ..DeepenOptions::new(4, 0) };
    assert!(interpolate_with(&teacher, &data, &even).is_err());
    let short = DeepenOptions { n_rep: Some(9), ..DeepenOptions::new(4, 0) };
    assert!(interpolate_with(&teacher, &data, &short).is_err());
    let dup = Dataset::new(vec![vec![0.1; 4], vec![0.1; 4]], vec![0.0, 1.0], 2.0).unwrap();
    assert!(interpolate(&teacher, &dup, 4, 0).is_err());
}

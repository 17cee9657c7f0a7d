#![allow(dead_code)]

use deepconv::dataset::Dataset;
use deepconv::dcnn::{BiasShape, ConvLayer, Dcnn};
use deepconv::FilterSeq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Teacher with filter length `big_s`, leading taps bounded away from zero,
/// untruncated head.
pub fn random_teacher(rng: &mut ChaCha8Rng, d: usize, big_s: usize, depth: usize) -> Dcnn {
    let mut layers = Vec::new();
    let mut w = d;
    for _ in 0..depth {
        let mut f: Vec<f64> = (0..=big_s).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        f[0] = sign * rng.gen_range(0.3..1.0);
        w += big_s;
        let b: Vec<f64> = (0..w).map(|_| rng.gen_range(-0.5..0.5)).collect();
        layers.push(ConvLayer::new(FilterSeq::new(f).unwrap(), b, BiasShape::Free, None));
    }
    let c: Vec<f64> = (0..w).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Dcnn::new(d, big_s, layers, c, rng.gen_range(-0.2..0.2), None).unwrap()
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, d: usize, h: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-h..h)).collect()).collect()
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let xs = uniform_points(rng, n, d, 1.0);
    let ys = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Dataset::new(xs, ys, 2.0).unwrap()
}

/// Teacher output without truncation.
pub fn teacher_head(t: &Dcnn, x: &[f64]) -> f64 {
    let mut t = t.clone();
    t.truncation = None;
    t.predict(x).unwrap()
}

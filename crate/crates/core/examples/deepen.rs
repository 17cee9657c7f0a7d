//! Deepening a small teacher into a student that interpolates a sample and
//! matches the teacher outside a thin slab.

use deepconv::dataset::Dataset;
use deepconv::deepen::{interpolate_with, DeepenOptions};
use deepconv::trainer::{init_net, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> deepconv::Result<()> {
    let (d, n) = (4, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut teacher = init_net(d, 2, 2, &TrainConfig::for_sample(n, 1, 3), None)?;
    teacher.out_coeffs.iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));

    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let data = Dataset::new(xs, ys, 2.0)?;

    let out = interpolate_with(&teacher, &data, &DeepenOptions::new(4, 0))?;
    let r = &out.report;
    println!("student depth {} = J1 {} + J2 {} + J3 {}", out.student.depth(), r.j1, r.j2, r.j3);
    println!("final width {}, added parameters {}", r.final_width, r.added_params.total());

    let fit = out.student.predict_precise_batch(&data.xs)?;
    let worst = fit.iter().zip(&data.ys).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max |student(x_i) - y_i| = {worst:.2e}");

    let probe: Vec<Vec<f64>> = (0..200).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let pred = out.student.predict_precise_batch(&probe)?;
    let (mut off, mut err) = (0, 0.0f64);
    for (x, v) in probe.iter().zip(&pred) {
        if !out.plan.in_slab(x) {
            off += 1;
            err = err.max((v - teacher.predict(x)?).abs());
        }
    }
    println!("{off}/200 probes off the slab, max |student - teacher| there {err:.2e}");
    Ok(())
}

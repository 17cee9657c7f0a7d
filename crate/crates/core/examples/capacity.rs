//! Pseudo-dimension, covering and learning-rate bounds for a DCNN.

use deepconv::capacity::{bound_report, excess_risk_rate, BoundInputs};

fn main() -> deepconv::Result<()> {
    let rep = bound_report(&BoundInputs { j: 2, s: 2, d: 2, n: 1000, delta: 0.05, c0: 1.0, c: 1.0, m: 2.0 })?;
    println!("R = {}", rep.r);
    println!("pseudo-dimension: general {:.2}, explicit {:.2}, c0 form {:.2}", rep.pdim_general, rep.pdim_dcnn_explicit, rep.pdim_dcnn_c0);
    for (eps, v) in &rep.covering_log {
        println!("log covering number at eps = {eps:.4}: {v:.2}");
    }
    for n in [1e3f64, 1e4, 1e5, 1e6] {
        let j = n.cbrt().ceil();
        println!("rate bound n = {n:.0e}, J = {j}: {:.3}", excess_risk_rate(n, 10.0, j, 0.05, 1.0)?);
    }
    Ok(())
}

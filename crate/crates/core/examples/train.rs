//! Simulating data and fitting a network by least squares.

use deepconv::harness::{simulate, sweep_depth, SimSpec};
use deepconv::trainer::{fit, init_net, TrainConfig};

fn main() -> deepconv::Result<()> {
    let spec = SimSpec { d: 10, n: 300, seed: 1, ..SimSpec::default() };
    let (train, test) = simulate(&spec)?;
    let depth = sweep_depth(train.len());
    let cfg = TrainConfig { tied_bias: false, ..TrainConfig::for_sample(train.len(), 200, 1) };
    let net = init_net(spec.d, depth, 2, &cfg, Some(train.m))?;
    let (_, rep) = fit(&net, &train, &test, &cfg)?;
    for (e, mse) in rep.train_mse.iter().enumerate().step_by(40) {
        println!("epoch {:>3}: train MSE {mse:.4}", e + 1);
    }
    println!("depth {depth}, test RMSE {:.4}, {:.2}s", rep.test_rmse, rep.wall_time_secs);
    Ok(())
}

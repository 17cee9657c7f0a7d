//! Building a small network, evaluating it, counting its parameters and
//! saving it as JSON.

use deepconv::dcnn::Dcnn;
use deepconv::trainer::{init_net, TrainConfig};

fn main() -> deepconv::Result<()> {
    let cfg = TrainConfig::for_sample(100, 1, 7);
    let mut net = init_net(5, 3, 2, &cfg, Some(2.0))?;
    net.out_coeffs.iter_mut().enumerate().for_each(|(i, c)| *c = 0.1 * i as f64);

    println!("widths {:?}", net.widths());
    println!("free parameters {} (budget 5dJ+2 = {})", net.count_free_params()?, 5 * 5 * 3 + 2);

    let x = [0.2, -0.4, 0.9, 0.0, -1.0];
    let (hs, y) = net.forward(&x)?;
    println!("last hidden layer {:?}", hs.last().unwrap());
    println!("output {y:.6}");

    let json = net.to_json()?;
    let back = Dcnn::from_json(&json)?;
    println!("JSON round trip identical: {}", back == net);
    Ok(())
}

//! Least-squares training of a [`Dcnn`] with exact backpropagation through the
//! convolution, downsampling and ReLU chain.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dcnn::{BiasShape, ConvLayer, Dcnn};
use crate::error::{Error, Result};
use crate::seqconv::FilterSeq;

/// Update rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    PlainSgd,
    /// Adaptive moment estimation with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Mini-batch policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Batch {
    Full,
    Size(usize),
}

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step_size: f64,
    pub optimizer: Optimizer,
    pub batch: Batch,
    pub seed: u64,
    /// Half-width of the uniform initialization is `init_scale / √(s+1)`.
    pub init_scale: f64,
    /// Whether fresh networks tie the middle bias entries of hidden layers.
    pub tied_bias: bool,
    /// Trains only the output coefficients and offset.
    pub freeze_conv: bool,
}

impl TrainConfig {
    /// Defaults for a sample of size `n`: Adam at step `1e-3`, full batch up to
    /// `n = 1000`, batches of 128 beyond.
    pub fn for_sample(n: usize, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            step_size: 1e-3,
            optimizer: Optimizer::default(),
            batch: if n <= 1000 { Batch::Full } else { Batch::Size(128) },
            seed,
            init_scale: 1.0,
            tied_bias: true,
            freeze_conv: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid("step size must be finite and nonnegative"));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::invalid("init_scale must be positive"));
        }
        if let Batch::Size(0) = self.batch {
            return Err(Error::invalid("batch size must be positive"));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            let unit = |b: f64| b > 0.0 && b < 1.0;
            if !unit(beta1) || !unit(beta2) || !(eps > 0.0) {
                return Err(Error::invalid("Adam needs beta1, beta2 in (0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

/// Outcome of [`fit`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    /// Training MSE after each epoch (untruncated outputs).
    pub train_mse: Vec<f64>,
    /// RMSE of the truncated outputs on the test sample.
    pub test_rmse: f64,
    pub wall_time_secs: f64,
}

/// Gradient with one entry per free parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    /// Per layer, `s + 1` taps.
    pub filters: Vec<Vec<f64>>,
    /// Per layer, one entry per distinct bias value (tied slots accumulate).
    pub biases: Vec<Vec<f64>>,
    pub out_coeffs: Vec<f64>,
    pub out_offset: f64,
}

impl Gradient {
    /// Entries in the order of [`flatten`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (f, b) in self.filters.iter().zip(&self.biases) {
            v.extend(f);
            v.extend(b);
        }
        v.extend(&self.out_coeffs);
        v.push(self.out_offset);
        v
    }
}

/// Bias slot of entry `p` in a layer of width `w`.
pub fn bias_slot(shape: BiasShape, w: usize, s: usize, p: usize) -> usize {
    match shape {
        BiasShape::Mid if s >= 1 && w >= 2 * s - 1 => {
            if p < s - 1 {
                p
            } else if p <= w - s {
                s - 1
            } else {
                p - (w + 1 - 2 * s)
            }
        }
        _ => p,
    }
}

/// Number of bias slots of a layer of width `w`.
pub fn bias_slots(shape: BiasShape, w: usize, s: usize) -> usize {
    match shape {
        BiasShape::Mid => w.min(2 * s - 1),
        BiasShape::Free => w,
    }
}

/// Free parameters as a flat vector: per layer `s + 1` taps then bias slots,
/// then the output coefficients and the offset.
pub fn flatten(net: &Dcnn) -> Vec<f64> {
    let s = net.filter_len;
    let widths = net.widths();
    let mut v = Vec::new();
    for (j, l) in net.layers.iter().enumerate() {
        let mut taps = l.filter.coeffs().to_vec();
        taps.resize(s + 1, 0.0);
        v.extend(taps);
        let w = widths[j + 1];
        let mut slots = vec![0.0; bias_slots(l.bias_shape, w, s)];
        for (p, &b) in l.bias.iter().enumerate() {
            slots[bias_slot(l.bias_shape, w, s, p)] = b;
        }
        v.extend(slots);
    }
    v.extend(&net.out_coeffs);
    v.push(net.out_offset);
    v
}

/// Writes a flat parameter vector back into `net`.
pub fn unflatten(net: &mut Dcnn, params: &[f64]) -> Result<()> {
    let s = net.filter_len;
    let widths = net.widths();
    let mut it = params.iter().copied();
    let mut take = |k: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = it.by_ref().take(k).collect();
        if v.len() == k {
            Ok(v)
        } else {
            Err(Error::invalid("parameter vector too short"))
        }
    };
    for (j, l) in net.layers.iter_mut().enumerate() {
        l.filter = FilterSeq::new(take(s + 1)?)?;
        let w = widths[j + 1];
        let slots = take(bias_slots(l.bias_shape, w, s))?;
        l.bias = (0..w).map(|p| slots[bias_slot(l.bias_shape, w, s, p)]).collect();
    }
    net.out_coeffs = take(net.out_coeffs.len())?;
    net.out_offset = take(1)?[0];
    if it.next().is_some() {
        return Err(Error::invalid("parameter vector too long"));
    }
    Ok(())
}

/// A fresh network of depth `depth` with filter length `s` on `d` inputs.
pub fn init_net(d: usize, depth: usize, s: usize, cfg: &TrainConfig, truncation: Option<f64>) -> Result<Dcnn> {
    if d == 0 || depth == 0 || s == 0 {
        return Err(Error::invalid("dimension, depth and filter length must be positive"));
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = cfg.init_scale / ((s + 1) as f64).sqrt();
    let mut layers = Vec::with_capacity(depth);
    let mut w = d;
    for j in 0..depth {
        w += s;
        let shape = if cfg.tied_bias && j + 1 < depth { BiasShape::Mid } else { BiasShape::Free };
        let taps: Vec<f64> = (0..=s).map(|_| rng.gen_range(-half..half)).collect();
        let slots: Vec<f64> = (0..bias_slots(shape, w, s)).map(|_| rng.gen_range(-half..half)).collect();
        let bias = (0..w).map(|p| slots[bias_slot(shape, w, s, p)]).collect();
        layers.push(ConvLayer::new(FilterSeq::new(taps)?, bias, shape, None));
    }
    Dcnn::new(d, s, layers, vec![0.0; w], 0.0, truncation)
}

/// Empirical risk `(1/n) Σ (f(x^i) − y^i)²` with untruncated outputs.
pub fn loss(net: &Dcnn, data: &Dataset) -> Result<f64> {
    let raw = raw(net);
    let mut acc = 0.0;
    for (x, y) in data.xs.iter().zip(&data.ys) {
        let r = raw.predict(x)? - y;
        acc += r * r;
    }
    Ok(acc / data.len().max(1) as f64)
}

fn raw(net: &Dcnn) -> Dcnn {
    let mut n = net.clone();
    n.truncation = None;
    n
}

/// Root mean squared error of the (truncated, if set) outputs.
pub fn rmse(net: &Dcnn, data: &Dataset) -> Result<f64> {
    let mut acc = 0.0;
    for (x, y) in data.xs.iter().zip(&data.ys) {
        let r = net.predict(x)? - y;
        acc += r * r;
    }
    Ok((acc / data.len().max(1) as f64).sqrt())
}

struct Layout {
    offsets: Vec<usize>,
    widths: Vec<usize>,
    head: usize,
    total: usize,
}

fn layout(net: &Dcnn) -> Layout {
    let s = net.filter_len;
    let widths = net.widths();
    let mut offsets = Vec::new();
    let mut at = 0;
    for (j, l) in net.layers.iter().enumerate() {
        offsets.push(at);
        at += s + 1 + bias_slots(l.bias_shape, widths[j + 1], s);
    }
    let head = at;
    Layout { offsets, widths, head, total: head + net.out_coeffs.len() + 1 }
}

/// Adds the gradient of `scale · (f(x) − y)²` into `g` (flat layout) and
/// returns the residual `f(x) − y`.
fn accumulate(net: &Dcnn, lay: &Layout, x: &[f64], y: f64, scale: f64, g: &mut [f64]) -> Result<f64> {
    let s = net.filter_len;
    let j_max = net.layers.len();
    let mut hs: Vec<Vec<f64>> = Vec::with_capacity(j_max + 1);
    hs.push(x.to_vec());
    for j in 1..=j_max {
        let h = net.layer_forward(j, &hs[j - 1])?;
        hs.push(h);
    }
    let last = &hs[j_max];
    let f = net.out_coeffs.iter().zip(last).map(|(c, v)| c * v).sum::<f64>() + net.out_offset;
    let r = f - y;
    let dy = 2.0 * scale * r;
    for (p, v) in last.iter().enumerate() {
        g[lay.head + p] += dy * v;
    }
    g[lay.head + net.out_coeffs.len()] += dy;
    // Activations are positive exactly where the pre-activation is, so the
    // ReLU derivative (0 at the kink) is read off the stored outputs.
    let mut delta: Vec<f64> = net.out_coeffs.iter().zip(last).map(|(c, v)| if *v > 0.0 { dy * c } else { 0.0 }).collect();
    for j in (1..=j_max).rev() {
        let l = &net.layers[j - 1];
        let off = lay.offsets[j - 1];
        let w = lay.widths[j];
        let h_prev = &hs[j - 1];
        let full = h_prev.len() + s;
        let mut du = vec![0.0; full];
        for (p, &dv) in delta.iter().enumerate() {
            g[off + s + 1 + bias_slot(l.bias_shape, w, s, p)] -= dv;
            let q = match l.downsample {
                Some(m) => (p + 1) * m - 1,
                None => p,
            };
            du[q] += dv;
        }
        let taps = l.filter.coeffs();
        for k in 0..taps.len() {
            let mut acc = 0.0;
            for (i, &hv) in h_prev.iter().enumerate() {
                acc += du[i + k] * hv;
            }
            g[off + k] += acc;
        }
        if j > 1 {
            let mut dh = vec![0.0; h_prev.len()];
            for (i, d) in dh.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &t) in taps.iter().enumerate() {
                    acc += du[i + k] * t;
                }
                *d = if h_prev[i] > 0.0 { acc } else { 0.0 };
            }
            delta = dh;
        }
    }
    Ok(r)
}

/// Gradient of [`loss`] with respect to every free parameter.
pub fn grad(net: &Dcnn, data: &Dataset) -> Result<Gradient> {
    net.validate()?;
    let lay = layout(net);
    let mut g = vec![0.0; lay.total];
    let scale = 1.0 / data.len().max(1) as f64;
    for (x, y) in data.xs.iter().zip(&data.ys) {
        if x.len() != net.input_dim {
            return Err(Error::invalid("data dimension does not match the network"));
        }
        accumulate(net, &lay, x, *y, scale, &mut g)?;
    }
    let s = net.filter_len;
    let mut filters = Vec::new();
    let mut biases = Vec::new();
    for (j, &off) in lay.offsets.iter().enumerate() {
        let nb = bias_slots(net.layers[j].bias_shape, lay.widths[j + 1], s);
        filters.push(g[off..off + s + 1].to_vec());
        biases.push(g[off + s + 1..off + s + 1 + nb].to_vec());
    }
    Ok(Gradient {
        filters,
        biases,
        out_coeffs: g[lay.head..lay.total - 1].to_vec(),
        out_offset: g[lay.total - 1],
    })
}

fn check_dims(net: &Dcnn, data: &Dataset) -> Result<()> {
    if !data.is_empty() && data.dim() != net.input_dim {
        return Err(Error::invalid(format!("data dimension {} differs from network input {}", data.dim(), net.input_dim)));
    }
    Ok(())
}

/// Minimizes [`loss`] from `net`; returns the trained net (truncated at the
/// training sample's `M`) and the report.
pub fn fit(net: &Dcnn, data: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<(Dcnn, TrainReport)> {
    cfg.validate()?;
    net.validate()?;
    check_dims(net, data)?;
    check_dims(net, test)?;
    if data.is_empty() {
        return Err(Error::invalid("empty training sample"));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cur = raw(net);
    // Filters are widened to `s + 1` taps so every tap is trainable.
    unflatten(&mut cur, &flatten(net))?;
    let lay = layout(&cur);
    let mut params = flatten(&cur);
    let mut m1 = vec![0.0; params.len()];
    let mut m2 = vec![0.0; params.len()];
    let mut step = 0i32;
    let n = data.len();
    let bsize = match cfg.batch {
        Batch::Full => n,
        Batch::Size(b) => b.min(n),
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        if bsize < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(bsize) {
            let mut g = vec![0.0; params.len()];
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                accumulate(&cur, &lay, &data.xs[i], data.ys[i], scale, &mut g)?;
            }
            if cfg.freeze_conv {
                g[..lay.head].iter_mut().for_each(|v| *v = 0.0);
            }
            step += 1;
            match cfg.optimizer {
                Optimizer::PlainSgd => {
                    for (p, gv) in params.iter_mut().zip(&g) {
                        *p -= cfg.step_size * gv;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(step);
                    let c2 = 1.0 - beta2.powi(step);
                    for i in 0..params.len() {
                        m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
                        m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
                        params[i] -= cfg.step_size * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                    }
                }
            }
            unflatten(&mut cur, &params)?;
        }
        let mse = loss(&cur, data)?;
        if !mse.is_finite() || params.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "training diverged at epoch {epoch}; last finite epoch was {}",
                epoch - 1
            )));
        }
        trace.push(mse);
    }
    cur.truncation = Some(data.m);
    let test_rmse = if test.is_empty() { f64::NAN } else { rmse(&cur, test)? };
    Ok((cur, TrainReport { train_mse: trace, test_rmse, wall_time_secs: start.elapsed().as_secs_f64() }))
}

/// Central finite difference of [`loss`] along flat coordinate `k`.
pub fn finite_difference(net: &Dcnn, data: &Dataset, k: usize, h: f64) -> Result<f64> {
    let base = flatten(net);
    if k >= base.len() {
        return Err(Error::invalid("coordinate out of range"));
    }
    let eval = |delta: f64| -> Result<f64> {
        let mut p = base.clone();
        p[k] += delta;
        let mut n = net.clone();
        unflatten(&mut n, &p)?;
        loss(&n, data)
    };
    Ok((eval(h)? - eval(-h)?) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> (Dcnn, Dataset) {
        let cfg = TrainConfig { init_scale: 1.0, ..TrainConfig::for_sample(8, 1, seed) };
        let mut net = init_net(3, 2, 2, &cfg, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for c in net.out_coeffs.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (net, Dataset::new(xs, ys, 2.0).unwrap())
    }

    #[test]
    fn flatten_round_trip_and_count() {
        let (net, _) = small(1);
        let p = flatten(&net);
        assert_eq!(p.len(), net.count_free_params().unwrap());
        let mut n2 = net.clone();
        unflatten(&mut n2, &p).unwrap();
        assert_eq!(n2, net);
    }

    #[test]
    fn gradient_matches_differences() {
        let (net, data) = small(2);
        let g = grad(&net, &data).unwrap().to_flat();
        for (k, gk) in g.iter().enumerate() {
            let fd = finite_difference(&net, &data, k, 1e-6).unwrap();
            assert!((fd - gk).abs() <= 1e-5 * (1.0 + gk.abs()), "k={k} fd={fd} g={gk}");
        }
    }

    #[test]
    fn loss_examples() {
        let net = Dcnn::new(
            1,
            1,
            vec![ConvLayer::new(FilterSeq::new(vec![1.0]).unwrap(), vec![0.0, 0.0], BiasShape::Free, None)],
            vec![0.0, 0.0],
            2.0,
            None,
        )
        .unwrap();
        let data = Dataset::new(vec![vec![0.5]], vec![0.0], 4.0).unwrap();
        assert_eq!(loss(&net, &data).unwrap(), 4.0);
    }

    #[test]
    fn zero_step_keeps_net() {
        let (net, data) = small(3);
        let cfg = TrainConfig { step_size: 0.0, epochs: 5, ..TrainConfig::for_sample(8, 5, 3) };
        let (out, rep) = fit(&net, &data, &data, &cfg).unwrap();
        assert_eq!(flatten(&out), flatten(&net));
        assert!(rep.train_mse.windows(2).all(|w| w[0] == w[1]));
    }
}

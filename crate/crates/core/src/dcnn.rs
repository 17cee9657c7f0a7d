//! The DCNN model: layers `h^(j) = σ(T^(j) h^(j−1) − b^(j))` with widths
//! growing by `s` per layer (or shrinking under downsampling), a linear head
//! `c · h^(J) + a`, and optional output truncation `π_M`.

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::seqconv::{apply_conv, downsample, FilterSeq};

/// Shape tag of a bias vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiasShape {
    /// Every entry is an independent parameter.
    #[serde(rename = "free")]
    Free,
    /// Entries `s-1 ..= d_j-s` (0-based) share one value.
    #[serde(rename = "mid")]
    Mid,
}

/// One convolutional layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayer {
    pub filter: FilterSeq,
    pub bias: Vec<f64>,
    pub bias_shape: BiasShape,
    /// Downsampling scale applied after the convolution and before the bias.
    pub downsample: Option<usize>,
}

impl ConvLayer {
    pub fn new(filter: FilterSeq, bias: Vec<f64>, bias_shape: BiasShape, downsample: Option<usize>) -> Self {
        ConvLayer { filter, bias, bias_shape, downsample }
    }
}

/// A deep convolutional network on inputs of dimension `input_dim`.
///
/// `filter_len` is the support bound `s`: every filter lives in `{0, …, s}` and
/// shorter filters are zero-padded, so an undownsampled layer adds `s` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dcnn {
    pub input_dim: usize,
    pub filter_len: usize,
    pub layers: Vec<ConvLayer>,
    pub out_coeffs: Vec<f64>,
    pub out_offset: f64,
    pub truncation: Option<f64>,
}

/// Clamp of `y` to `[-m, m]`.
pub fn truncate(y: f64, m: f64) -> f64 {
    y.clamp(-m, m)
}

/// Whether the middle block `s-1 ..= len-s` of `bias` is constant.
pub fn is_identical_in_middle(bias: &[f64], s: usize) -> bool {
    if s == 0 || bias.len() < 2 * s {
        return true;
    }
    let mid = &bias[s - 1..=bias.len() - s];
    mid.iter().all(|&v| v == mid[0])
}

impl Dcnn {
    /// Builds and validates a network.
    pub fn new(
        input_dim: usize,
        filter_len: usize,
        layers: Vec<ConvLayer>,
        out_coeffs: Vec<f64>,
        out_offset: f64,
        truncation: Option<f64>,
    ) -> Result<Self> {
        let net = Dcnn { input_dim, filter_len, layers, out_coeffs, out_offset, truncation };
        net.validate()?;
        Ok(net)
    }

    /// Depth `J`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Widths `d_0, d_1, …, d_J` implied by the width chain.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        for l in &self.layers {
            let full = w.last().unwrap() + self.filter_len;
            w.push(match l.downsample {
                Some(m) if m > 0 => full / m,
                _ => full,
            });
        }
        w
    }

    /// Checks the width chain, filter supports, bias shapes and head length.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        if let Some(m) = self.truncation {
            if !(m > 0.0) {
                return Err(Error::invalid("truncation level must be positive"));
            }
        }
        let widths = self.widths();
        for (j, l) in self.layers.iter().enumerate() {
            if l.filter.coeffs().is_empty() || l.filter.len() > self.filter_len + 1 {
                return Err(Error::invalid(format!(
                    "layer {}: filter length {} exceeds s + 1 = {}",
                    j + 1,
                    l.filter.len(),
                    self.filter_len + 1
                )));
            }
            if let Some(m) = l.downsample {
                if m == 0 || m > widths[j] + self.filter_len {
                    return Err(Error::invalid(format!("layer {}: empty downsample", j + 1)));
                }
            }
            if l.bias.len() != widths[j + 1] {
                return Err(Error::invalid(format!(
                    "layer {}: bias length {} does not match width {}",
                    j + 1,
                    l.bias.len(),
                    widths[j + 1]
                )));
            }
            if l.bias_shape == BiasShape::Mid && !is_identical_in_middle(&l.bias, self.filter_len) {
                return Err(Error::invalid(format!("layer {}: bias tagged mid is not identical in the middle", j + 1)));
            }
        }
        if self.out_coeffs.len() != *widths.last().unwrap() {
            return Err(Error::invalid(format!(
                "output coefficients have length {}, expected {}",
                self.out_coeffs.len(),
                widths.last().unwrap()
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::invalid(format!("input has length {}, expected {}", x.len(), self.input_dim)));
        }
        Ok(())
    }

    /// Output of layer `j` (1-based) given the previous activation.
    pub fn layer_forward(&self, j: usize, h: &[f64]) -> Result<Vec<f64>> {
        let l = &self.layers[j - 1];
        let mut z = apply_conv(l.filter.coeffs(), h, self.filter_len);
        if let Some(m) = l.downsample {
            z = downsample(&z, m).map_err(|_| Error::invalid(format!("layer {j}: empty downsample")))?;
        }
        if z.len() != l.bias.len() {
            return Err(Error::invalid(format!(
                "layer {j}: width {} does not match bias length {}",
                z.len(),
                l.bias.len()
            )));
        }
        Ok(z.iter().zip(&l.bias).map(|(v, b)| (v - b).max(0.0)).collect())
    }

    /// All layer outputs `h^(0) = x, …, h^(J)` and the head value `y`
    /// (truncated when a level is set).
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, f64)> {
        self.check_input(x)?;
        let mut hs = vec![x.to_vec()];
        for j in 1..=self.depth() {
            let h = self.layer_forward(j, hs.last().unwrap())?;
            hs.push(h);
        }
        let y = self.head(hs.last().unwrap())?;
        Ok((hs, y))
    }

    /// Head `c · h + a`, truncated when a level is set.
    pub fn head(&self, h: &[f64]) -> Result<f64> {
        if h.len() != self.out_coeffs.len() {
            return Err(Error::invalid("final width does not match output coefficients"));
        }
        let y = self.out_coeffs.iter().zip(h).map(|(c, v)| c * v).sum::<f64>() + self.out_offset;
        Ok(match self.truncation {
            Some(m) => truncate(y, m),
            None => y,
        })
    }

    /// Network output at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.forward(x).map(|(_, y)| y)
    }

    /// Network output evaluated with double-double activations.
    ///
    /// Parameters are the same `f64` values; only the arithmetic is carried
    /// with about 106 bits. Deep constructed networks that transport small
    /// signals on top of large constant shifts need this to reproduce their
    /// exact-arithmetic output.
    pub fn predict_precise(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_precise_batch(std::slice::from_ref(&x.to_vec()))?[0])
    }

    /// Batched [`Dcnn::predict_precise`].
    pub fn predict_precise_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        const CHUNK: usize = 32;
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(CHUNK) {
            for x in chunk {
                self.check_input(x)?;
            }
            let h = self.precise_final_layer(chunk);
            let b = chunk.len();
            for t in 0..b {
                let mut acc = Dd::new(self.out_offset);
                for (p, &c) in self.out_coeffs.iter().enumerate() {
                    if c != 0.0 {
                        acc = acc.mul_add_f64(c, h[p * b + t]);
                    }
                }
                let y = acc.to_f64();
                out.push(match self.truncation {
                    Some(m) => truncate(y, m),
                    None => y,
                });
            }
        }
        Ok(out)
    }

    /// Final activations for a batch, position-major (`h[p * batch + t]`).
    pub fn precise_final_layer(&self, xs: &[Vec<f64>]) -> Vec<Dd> {
        let b = xs.len();
        let mut width = self.input_dim;
        let mut h = vec![Dd::ZERO; width * b];
        for (t, x) in xs.iter().enumerate() {
            for (p, &v) in x.iter().enumerate() {
                h[p * b + t] = Dd::new(v);
            }
        }
        for l in &self.layers {
            let full = width + self.filter_len;
            let mut z = vec![Dd::ZERO; full * b];
            for (i, &w) in l.filter.coeffs().iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for k in 0..width {
                    let src = &h[k * b..(k + 1) * b];
                    let dst = &mut z[(i + k) * b..(i + k + 1) * b];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = d.mul_add_f64(w, s);
                    }
                }
            }
            let (z, w_out) = match l.downsample {
                Some(m) => {
                    let n = full / m;
                    let mut zz = Vec::with_capacity(n * b);
                    for i in 1..=n {
                        zz.extend_from_slice(&z[(i * m - 1) * b..(i * m) * b]);
                    }
                    (zz, n)
                }
                None => (z, full),
            };
            h = z;
            for p in 0..w_out {
                let bias = l.bias[p];
                for v in &mut h[p * b..(p + 1) * b] {
                    *v = v.sub_f64(bias).relu();
                }
            }
            width = w_out;
        }
        h
    }

    /// Free-parameter count `3s(J−1) + s + 2 + 2 d_J` of a network whose biases
    /// (except the last) are identical in the middle and that never downsamples.
    pub fn count_free_params(&self) -> Result<usize> {
        self.validate()?;
        let j = self.depth();
        if j == 0 {
            return Err(Error::invalid("parameter count needs at least one layer"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.downsample.is_some() {
                return Err(Error::invalid(format!("layer {} downsamples; the count does not apply", i + 1)));
            }
            if i + 1 < j && l.bias_shape != BiasShape::Mid {
                return Err(Error::invalid(format!("layer {} bias is not tagged identical-in-middle", i + 1)));
            }
        }
        let s = self.filter_len;
        Ok(3 * s * (j - 1) + s + 2 + 2 * self.widths()[j])
    }

    /// Structural free-parameter count of any valid network: every filter
    /// contributes `s + 1` taps, a `mid` bias `min(d_j, 2s − 1)` values, a
    /// `free` bias `d_j` values, plus the head.
    pub fn count_params(&self) -> Result<usize> {
        self.validate()?;
        let s = self.filter_len;
        let widths = self.widths();
        let mut total = 0;
        for (j, l) in self.layers.iter().enumerate() {
            let w = widths[j + 1];
            total += s + 1;
            total += match l.bias_shape {
                BiasShape::Mid => w.min(2 * s - 1),
                BiasShape::Free => w,
            };
        }
        Ok(total + self.out_coeffs.len() + 1)
    }

    /// JSON text in the fixed field order.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let net: Dcnn = serde_json::from_str(text)?;
        for (j, l) in net.layers.iter().enumerate() {
            if l.filter.coeffs().is_empty() {
                return Err(Error::Parse(format!("layer {}: empty filter", j + 1)));
            }
        }
        net.validate()?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(s: usize, d: usize, depth: usize) -> Dcnn {
        let mut layers = Vec::new();
        let mut w = d;
        for j in 0..depth {
            w += s;
            let shape = if j + 1 < depth { BiasShape::Mid } else { BiasShape::Free };
            let filt = FilterSeq::new((0..=s).map(|k| 0.1 * (k as f64 + 1.0)).collect()).unwrap();
            layers.push(ConvLayer::new(filt, vec![0.0; w], shape, None));
        }
        Dcnn::new(d, s, layers, vec![0.0; w], 0.0, None).unwrap()
    }

    #[test]
    fn identity_layer_reads_first_entry() {
        let layer = ConvLayer::new(FilterSeq::delta(), vec![0.0; 3], BiasShape::Free, None);
        let n = Dcnn::new(3, 0, vec![layer], vec![1.0, 0.0, 0.0], 0.0, None).unwrap();
        assert_eq!(n.predict(&[2.0, 5.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn truncation_clamps_head() {
        let layer = ConvLayer::new(FilterSeq::delta(), vec![0.0; 1], BiasShape::Free, None);
        let n = Dcnn::new(1, 0, vec![layer], vec![1.0], 3.7, Some(1.0)).unwrap();
        assert_eq!(n.predict(&[0.0]).unwrap(), 1.0);
        assert_eq!(truncate(0.5, 1.0), 0.5);
        assert_eq!(truncate(-3.0, 1.0), -1.0);
        assert_eq!(truncate(2.0, 2.0), 2.0);
    }

    #[test]
    fn free_param_examples() {
        assert_eq!(net(2, 4, 3).count_free_params().unwrap(), 36);
        assert_eq!(net(2, 4, 1).count_free_params().unwrap(), 16);
    }

    #[test]
    fn mismatched_input_names_problem() {
        let n = net(2, 4, 2);
        let e = n.predict(&[1.0]).unwrap_err();
        assert!(e.to_string().contains("input has length"));
    }

    #[test]
    fn missing_field_reported() {
        let e = Dcnn::from_json("{}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("missing field") && msg.contains("input_dim"), "{msg}");
    }

    #[test]
    fn unknown_field_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&net(2, 3, 1).to_json().unwrap()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(Dcnn::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn round_trip_with_downsampling() {
        let l1 = ConvLayer::new(FilterSeq::new(vec![1.0, -0.5, 0.25]).unwrap(), vec![0.1; 2], BiasShape::Free, Some(3));
        let n = Dcnn::new(4, 2, vec![l1], vec![0.3, -0.7], 0.125, Some(2.0)).unwrap();
        let back = Dcnn::from_json(&n.to_json().unwrap()).unwrap();
        assert_eq!(n, back);
        assert_eq!(back.layers[0].downsample, Some(3));
    }

    #[test]
    fn precise_forward_agrees_on_benign_net() {
        let mut n = net(2, 3, 3);
        n.out_coeffs.iter_mut().enumerate().for_each(|(i, c)| *c = (i as f64).sin());
        let x = vec![0.3, -0.2, 0.9];
        let a = n.predict(&x).unwrap();
        let b = n.predict_precise(&x).unwrap();
        assert!((a - b).abs() < 1e-13);
    }
}

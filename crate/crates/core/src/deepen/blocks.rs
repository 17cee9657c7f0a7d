//! Layer blocks that transport a linear image of their input through many
//! ReLU layers by riding on a constant shift large enough to keep every
//! pre-activation nonnegative.

use crate::dcnn::{is_identical_in_middle, BiasShape, ConvLayer, Dcnn};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::factorize::{ceil_div, factor_replication, factor_sequence};
use crate::seqconv::{apply_conv, downsample, FilterSeq};

/// Relative safety factor on certified sup-norm bounds.
const SAFETY: f64 = 1.0 + 1e-9;

/// A run of consecutive layers.
#[derive(Clone, Debug)]
pub struct Block {
    pub layers: Vec<ConvLayer>,
    pub in_dim: usize,
    pub out_dim: usize,
    /// Constant shift carried by the output (the last `B^(j)`).
    pub bound_b: f64,
}

/// Pre-activation of `layer` in double-double: convolution then optional downsampling.
pub(crate) fn layer_pre_dd(layer: &ConvLayer, h: &[Dd], s: usize) -> Vec<Dd> {
    let z = conv_dd(layer.filter.coeffs(), h, s);
    match layer.downsample {
        Some(m) => z.iter().skip(m - 1).step_by(m).copied().collect(),
        None => z,
    }
}

/// Zero-padded convolution in double-double, output length `h.len() + s`.
pub(crate) fn conv_dd(filter: &[f64], h: &[Dd], s: usize) -> Vec<Dd> {
    let mut out = vec![Dd::ZERO; h.len() + s];
    for (i, &w) in filter.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (k, &v) in h.iter().enumerate() {
            out[i + k] = out[i + k].mul_add_f64(w, v);
        }
    }
    out
}

/// Activations after `layers`, in double-double.
pub(crate) fn forward_dd(layers: &[ConvLayer], x: &[f64], s: usize) -> Vec<Dd> {
    let mut h: Vec<Dd> = x.iter().map(|&v| Dd::new(v)).collect();
    for l in layers {
        h = layer_pre_dd(l, &h, s).iter().zip(&l.bias).map(|(v, &b)| v.sub_f64(b).relu()).collect();
    }
    h
}

fn mid_or_free(bias: &[f64], s: usize, downsampled: bool) -> BiasShape {
    if !downsampled && is_identical_in_middle(bias, s) {
        BiasShape::Mid
    } else {
        BiasShape::Free
    }
}

/// Stacks `filters` into layers carrying `T^W U + B·1`, where `U` is the
/// input signal (`‖U‖_∞ ≤ b0`) sitting on a constant `input_shift`.
///
/// The shift after layer `j` is `B^(j) = ‖W^(j)‖₁ · b0` with `W^(j)` the
/// convolution of the first `j` filters. This bounds `|W^(j) * U|` entrywise,
/// so no ReLU ever clips, and unlike the product of per-filter norms it stays
/// finite over hundreds of layers. Intermediate biases are
/// `B^(j−1) T^(j) 1 − B^(j) 1`, identical in the middle.
pub(crate) fn block_from_filters(
    filters: &[FilterSeq],
    s: usize,
    in_dim: usize,
    input_shift: f64,
    b0: f64,
    downsample_last: Option<usize>,
    last_bias: Option<Vec<f64>>,
) -> Result<Block> {
    if filters.is_empty() {
        return Err(Error::invalid("a block needs at least one filter"));
    }
    if filters.iter().any(|f| f.len() > s + 1) {
        return Err(Error::invalid("block filter longer than s + 1"));
    }
    let mut width = in_dim;
    let mut partial = FilterSeq::delta();
    let mut prev_shift = input_shift;
    let mut layers = Vec::with_capacity(filters.len());
    let mut last_b = b0;
    for (j, f) in filters.iter().enumerate() {
        let last = j + 1 == filters.len();
        partial = partial.convolve(f);
        let bj = partial.l1_norm() * b0 * SAFETY;
        let mut carried: Vec<f64> = apply_conv(f.coeffs(), &vec![prev_shift; width], s);
        let ds = if last { downsample_last } else { None };
        if let Some(m) = ds {
            carried = downsample(&carried, m)?;
        }
        let bias = match (&last_bias, last) {
            (Some(b), true) => {
                if b.len() != carried.len() {
                    return Err(Error::invalid(format!("last bias has length {}, block width is {}", b.len(), carried.len())));
                }
                b.clone()
            }
            _ => carried.iter().map(|v| v - bj).collect(),
        };
        width = carried.len();
        let shape = mid_or_free(&bias, s, ds.is_some());
        layers.push(ConvLayer::new(f.clone(), bias, shape, ds));
        prev_shift = bj;
        last_b = bj;
    }
    Ok(Block { layers, in_dim, out_dim: width, bound_b: last_b })
}

/// Generic block for a target sequence `W`: factors it into
/// `J* = ⌈deg W/(s−1)⌉` filters (delta-padded) and stacks them. Without
/// `last_bias`, the output is `T^W U + B^(J*) 1`.
pub fn build_block(
    w: &FilterSeq,
    s: usize,
    in_dim: usize,
    input_shift: f64,
    b0: f64,
    last_bias: Option<Vec<f64>>,
) -> Result<Block> {
    let j_star = ceil_div(w.trimmed().degree(), s - 1).max(1);
    let fac = factor_sequence(w, s, Some(j_star))?;
    block_from_filters(&fac.filters, s, in_dim, input_shift, b0, None, last_bias)
}

/// Depth of the linear-feature block, `⌈(2d² − 1)/(s − 1)⌉`.
pub fn j1(d: usize, s: usize) -> usize {
    ceil_div(2 * d * d - 1, s - 1)
}

/// Depth of the replication block, `⌈(N − 1) K/(s − 1)⌉`.
pub fn j3(in_width: usize, n_rep: usize, s: usize) -> usize {
    ceil_div((n_rep - 1) * in_width, s - 1)
}

/// The length-`2d²` sequence whose convolution with `x`, downsampled by `d`,
/// lists `ξ·x, x₁, 0, x₂, 0, …, x_d, 0, …`: `W_k = ξ_{d−1−k}` for `k < d`
/// and `W_{2id−i} = 1` for `i = 1..d` (0-based `ξ`).
pub fn linear_feature_sequence(xi: &[f64]) -> FilterSeq {
    let d = xi.len();
    let mut w = vec![0.0; 2 * d * d];
    for k in 0..d {
        w[k] = xi[d - 1 - k];
    }
    for i in 1..=d {
        w[2 * i * d - i] = 1.0;
    }
    FilterSeq::new(w).expect("non-empty")
}

/// First `J1` layers: output `[ξ·x, x₁, 0, x₂, 0, …, x_d, 0, …] + B·1` of width
/// `1 + ⌊J1 s/d⌋`, with downsampling by `d` at the last layer.
pub fn linear_feature_block(xi: &[f64], s: usize, b0: f64) -> Result<Block> {
    let d = xi.len();
    if s < 2 || s > d {
        return Err(Error::invalid(format!("linear feature block needs 2 <= s <= d (s = {s}, d = {d})")));
    }
    if !(b0 > 0.0) {
        return Err(Error::invalid("input bound must be positive"));
    }
    let w = linear_feature_sequence(xi);
    let fac = factor_sequence(&w, s, Some(j1(d, s)))?;
    block_from_filters(&fac.filters, s, d, 0.0, b0, Some(d), None)
}

/// Free parameters of the linear-feature block, `J1 (s + 2) + 1`.
pub fn linear_feature_params(d: usize, s: usize) -> usize {
    j1(d, s) * (s + 2) + 1
}

/// Teacher layers embedded on the even slots of a wider student.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub block: Block,
    /// Exact constant carried by entry 0 after each embedded layer.
    pub slot0_shifts: Vec<Dd>,
    /// `Π w°₀` after each embedded layer.
    pub lead_products: Vec<f64>,
    /// Certified `‖H^(j)‖_∞` bounds of the teacher, `j = 0..=J2`.
    pub teacher_bounds: Vec<f64>,
    /// Bound on `|ξ·x|` over the input domain.
    pub xi_bound: f64,
}

/// Certified `‖H^(j)‖_∞` bounds by `‖w‖₁ ‖H^(j−1)‖_∞ + ‖b‖_∞` from `‖x‖_∞ ≤ b0`.
pub fn teacher_bounds(teacher: &Dcnn, b0: f64) -> Vec<f64> {
    let mut out = vec![b0];
    for l in &teacher.layers {
        let bmax = l.bias.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let prev = *out.last().unwrap();
        out.push((l.filter.l1_norm() * prev + bmax) * SAFETY);
    }
    out
}

fn zero_margin(v: f64, extra: f64) -> f64 {
    1e-9 * (1.0 + v.abs() + extra)
}

/// Embeds every teacher layer (filter length `S`) into a student layer with
/// filter length `s = 2S` and filter taps `w_{2i} = w°_i`: entry 0 carries
/// `(Π w°₀) ξ·x` plus a shift, entries `2k−1` (0-based) reproduce the teacher
/// activations `H_k` exactly, all other entries are zero.
pub fn embed_teacher(teacher: &Dcnn, linear: &Block, xi_l1: f64, b0: f64, s: usize) -> Result<Embedding> {
    let big_s = teacher.filter_len;
    if s != 2 * big_s {
        return Err(Error::invalid(format!("student filter length {s} must be twice the teacher's {big_s}")));
    }
    if teacher.layers.is_empty() {
        return Err(Error::invalid("teacher must have at least one layer"));
    }
    if teacher.layers.iter().any(|l| l.downsample.is_some()) {
        return Err(Error::invalid("teacher must not downsample"));
    }
    if teacher.layers.iter().any(|l| l.filter.coeffs()[0] == 0.0) {
        return Err(Error::invalid("zero leading filter tap"));
    }
    let d = teacher.input_dim;
    if linear.out_dim < 2 * d {
        return Err(Error::invalid("linear block output is narrower than 2d"));
    }
    let bounds = teacher_bounds(teacher, b0);
    let xi_bound = xi_l1 * b0;
    let zeros = vec![0.0; linear.in_dim];
    let mut shift: Vec<Dd> = forward_dd(&linear.layers, &zeros, s);
    let mut sig0 = xi_bound;
    let mut lead = 1.0;
    let mut layers = Vec::new();
    let mut slot0_shifts = Vec::new();
    let mut lead_products = Vec::new();
    let mut width = linear.out_dim;
    for (j, tl) in teacher.layers.iter().enumerate() {
        let wt = tl.filter.coeffs();
        let mut w = vec![0.0; 2 * wt.len() - 1];
        for (i, &v) in wt.iter().enumerate() {
            w[2 * i] = v;
        }
        let ts = conv_dd(&w, &shift, s);
        width += s;
        let dj = tl.bias.len();
        lead *= wt[0];
        let f_new = lead.abs() * xi_bound * SAFETY;
        let mut bias = vec![0.0; width];
        for (r, b) in bias.iter_mut().enumerate() {
            let t = ts[r].to_f64();
            *b = if r == 0 {
                (ts[0] - Dd::new(f_new)).to_f64()
            } else if r % 2 == 1 {
                let k = r.div_ceil(2);
                if k <= dj {
                    (ts[r] + Dd::new(tl.bias[k - 1])).to_f64()
                } else {
                    t + zero_margin(t, 0.0)
                }
            } else {
                let slot0 = w.get(r).map_or(0.0, |v| v.abs()) * sig0;
                t + slot0 + zero_margin(t, slot0)
            };
        }
        let new0 = shift[0] * Dd::new(w[0]) - Dd::new(bias[0]);
        shift = vec![Dd::ZERO; width];
        shift[0] = new0;
        sig0 = lead.abs() * xi_bound;
        slot0_shifts.push(new0);
        lead_products.push(lead);
        if 2 * dj > width {
            return Err(Error::invalid(format!("embedded layer {} is too narrow for the teacher", j + 1)));
        }
        layers.push(ConvLayer::new(FilterSeq::new(w)?, bias, BiasShape::Free, None));
    }
    let block = Block { layers, in_dim: linear.out_dim, out_dim: width, bound_b: slot0_shifts.last().unwrap().to_f64() };
    Ok(Embedding { block, slot0_shifts, lead_products, teacher_bounds: bounds, xi_bound })
}

/// Inputs describing the embedded output that the replication block copies.
#[derive(Clone, Debug)]
pub struct ReplicationInput {
    /// Width `K` of the embedded output.
    pub in_width: usize,
    /// Certified bound on every entry of the embedded output.
    pub bound: f64,
    /// Exact constant carried by entry 0.
    pub slot0_shift: Dd,
    /// `Π w°₀`.
    pub wstar: f64,
    /// Number of teacher entries `D_{J2}` on the odd (0-based) slots.
    pub teacher_width: usize,
    /// Positive offset kept on the teacher slots of the final output.
    pub teacher_offset: f64,
}

/// The replication block with the data needed to read its output.
#[derive(Clone, Debug)]
pub struct Replication {
    pub block: Block,
    /// Output positions `(k−1)K` of the ramps, `k = 1..3n`.
    pub ramp_positions: Vec<usize>,
    /// Exact gain of each ramp copy (the replicated sequence entry there).
    pub ramp_gains: Vec<f64>,
    /// Output positions `2m−1` of the teacher activations.
    pub teacher_positions: Vec<usize>,
    /// Exact gain on the teacher slots.
    pub teacher_gain: f64,
    /// Largest deviation of the realized product of filters from the ideal
    /// replication sequence.
    pub residual: f64,
}

/// `N` copies of the embedded output spaced `K` apart via
/// `J3 = ⌈(N−1)K/(s−1)⌉` layers whose filters factor `Σ_{k<N} z^{kK}`.
/// The final bias turns copy `k ≤ 3n` into the ramp
/// `|w*| σ(sgn(w*) ξ·x − t_k)`, keeps the teacher slots of the first copy
/// (offset by `teacher_offset`) and zeroes everything else.
pub fn replication_block(input: &ReplicationInput, n_rep: usize, s: usize, t_grid: &[f64]) -> Result<Replication> {
    let k = input.in_width;
    if s % 2 == 1 {
        return Err(Error::invalid("replication needs an even filter length"));
    }
    if n_rep < t_grid.len() || n_rep.is_multiple_of(2) {
        return Err(Error::invalid(format!("replication count N = {n_rep} must be odd and at least 3n = {}", t_grid.len())));
    }
    if k <= 2 * input.teacher_width {
        return Err(Error::invalid(format!(
            "ramp and teacher positions collide: width {k} is not above 2 D = {}",
            2 * input.teacher_width
        )));
    }
    let depth = j3(k, n_rep, s);
    let fac = factor_replication(k, n_rep, s, Some(depth))?;
    let mut block = block_from_filters(&fac.filters, s, k, 0.0, input.bound, None, None)?;
    let last = block.layers.pop().expect("non-empty");
    let zeros = vec![0.0; k];
    let h = forward_dd(&block.layers, &zeros, s);
    let shift_pre = layer_pre_dd(&last, &h, s);
    let mut product = vec![Dd::new(1.0)];
    for f in &fac.filters {
        product = crate::dd::convolve_dd(&product, f.coeffs());
    }
    let gain = |p: usize| product.get(p).copied().unwrap_or(Dd::ZERO);
    let width = shift_pre.len();
    let kill = product.iter().map(|v| v.to_f64().abs()).sum::<f64>() * input.bound * SAFETY;
    let mut bias: Vec<f64> = shift_pre.iter().map(|c| c.to_f64() + kill + zero_margin(c.to_f64(), kill)).collect();
    let mut ramp_positions = Vec::new();
    let mut ramp_gains = Vec::new();
    let abs_w = input.wstar.abs();
    for (i, &t) in t_grid.iter().enumerate() {
        let p = i * k;
        let g = gain(p);
        let threshold = input.slot0_shift + Dd::new(abs_w) * Dd::new(t);
        bias[p] = (shift_pre[p] + g * threshold).to_f64();
        ramp_positions.push(p);
        ramp_gains.push(g.to_f64());
    }
    let teacher_positions: Vec<usize> = (1..=input.teacher_width).map(|m| 2 * m - 1).collect();
    for &p in &teacher_positions {
        bias[p] = (shift_pre[p] - Dd::new(input.teacher_offset)).to_f64();
    }
    block.layers.push(ConvLayer::new(last.filter, bias, BiasShape::Free, None));
    block.out_dim = width;
    let residual = product
        .iter()
        .enumerate()
        .map(|(i, v)| (v.to_f64() - if i % k == 0 && i / k < n_rep { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    Ok(Replication {
        block,
        ramp_positions,
        ramp_gains,
        teacher_positions,
        teacher_gain: gain(0).to_f64(),
        residual,
    })
}

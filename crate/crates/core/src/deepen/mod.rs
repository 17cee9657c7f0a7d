//! Deepening a trained teacher network into a much deeper student that
//! interpolates the training sample and agrees with the teacher away from a
//! thin slab around the data.
//!
//! The student stacks three blocks:
//! 1. [`linear_feature_block`] extracts a projection `ξ·x` alongside `x`.
//! 2. [`embed_teacher`] runs the teacher on the odd slots while carrying `ξ·x`.
//! 3. [`replication_block`] copies the projection into `3n` ramps that the
//!    output layer combines into one hat function per data point.

mod blocks;

pub use blocks::{
    build_block, embed_teacher, j1, j3, linear_feature_block, linear_feature_params, linear_feature_sequence,
    replication_block, teacher_bounds, Block, Embedding, Replication, ReplicationInput,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dcnn::Dcnn;
use crate::dd::Dd;
use crate::error::{Error, Result};

/// Attempts at drawing a direction that separates the data.
pub const MAX_XI_RETRIES: usize = 64;
/// Relative separation demanded of the projected data points.
pub const TOL_PROJ: f64 = 1e-9;

/// The hat-function layout of the student.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterpolationPlan {
    /// Direction realized by the linear-feature block.
    pub xi: Vec<f64>,
    pub sign_wstar: f64,
    pub wstar_abs: f64,
    pub eps: f64,
    /// `sgn(w*) ξ·x^ℓ` in data order.
    pub u: Vec<f64>,
    /// Sorted ramp thresholds `u_ℓ − ε, u_ℓ, u_ℓ + ε`.
    pub t_grid: Vec<f64>,
    /// `y^ℓ − f*(x^ℓ)` in data order.
    pub corrections: Vec<f64>,
}

impl InterpolationPlan {
    /// `sgn(w*) ξ·x`.
    pub fn project(&self, x: &[f64]) -> f64 {
        self.sign_wstar * self.xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Distance from the projection of `x` to the nearest `u_ℓ`.
    pub fn slab_distance(&self, x: &[f64]) -> f64 {
        let p = self.project(x);
        self.u.iter().map(|u| (p - u).abs()).fold(f64::INFINITY, f64::min)
    }

    /// Whether `x` lies in the slab `X_ε` where the student may differ from the teacher.
    pub fn in_slab(&self, x: &[f64]) -> bool {
        self.slab_distance(x) < self.eps
    }

    /// Half the smallest gap between projected data points.
    pub fn eps_star(&self) -> f64 {
        eps_star(&self.u)
    }
}

/// The hat function `φ(u) = (σ(u+ε) − 2σ(u) + σ(u−ε))/ε`.
pub fn hat(u: f64, eps: f64) -> f64 {
    let r = |v: f64| v.max(0.0);
    (r(u + eps) - 2.0 * r(u) + r(u - eps)) / eps
}

fn eps_star(u: &[f64]) -> f64 {
    let mut v = u.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| 0.5 * (w[1] - w[0])).fold(f64::INFINITY, f64::min)
}

/// Knobs of [`interpolate_with`].
#[derive(Clone, Debug)]
pub struct DeepenOptions {
    /// Student filter length; twice the teacher's.
    pub s: usize,
    /// `ε = eps_frac · ε*`, in `(0, 1)`.
    pub eps_frac: f64,
    /// Replication count `N`; defaults to the smallest odd integer `≥ 3n`.
    pub n_rep: Option<usize>,
    /// Input sup-norm bound; defaults to `1.25 max_i ‖x^i‖_∞`.
    pub b0: Option<f64>,
    pub seed: u64,
}

impl DeepenOptions {
    pub fn new(s: usize, seed: u64) -> Self {
        DeepenOptions { s, eps_frac: 0.5, n_rep: None, b0: None, seed }
    }
}

/// Construction summary of a student.
#[derive(Clone, Debug, Serialize)]
pub struct DeepenReport {
    pub j1: usize,
    pub j2: usize,
    pub j3: usize,
    pub n_rep: usize,
    pub b0: f64,
    pub final_width: usize,
    /// Teacher parameters plus [`AddedParams::total`]; the embedded layers
    /// reuse the teacher's taps and biases, the replication layers are fixed.
    pub student_params: usize,
    pub teacher_params: usize,
    pub added_params: AddedParams,
    pub replication_residual: f64,
    pub xi_attempts: usize,
}

/// Free parameters the deepening adds on top of the teacher's.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct AddedParams {
    /// Output coefficients `d_J`.
    pub out_coeffs: usize,
    pub out_offset: usize,
    /// The linear-feature block, `J1 (s + 2) + 1`.
    pub linear_block: usize,
    /// The slab width `ε`.
    pub slab_width: usize,
}

impl AddedParams {
    pub fn new(final_width: usize, d: usize, s: usize) -> Self {
        AddedParams { out_coeffs: final_width, out_offset: 1, linear_block: linear_feature_params(d, s), slab_width: 1 }
    }

    /// `d_J + J1 (s + 2) + 3`.
    pub fn total(&self) -> usize {
        self.out_coeffs + self.out_offset + self.linear_block + self.slab_width
    }
}

/// Where the student's final layer keeps the ramps and the teacher output.
#[derive(Clone, Debug, Serialize)]
pub struct StudentLayout {
    /// Ramp positions in `t_grid` order.
    pub ramp_positions: Vec<usize>,
    /// Gain of each ramp; `1` up to the factorization residual.
    pub ramp_gains: Vec<f64>,
    /// Positions of the teacher's final activations.
    pub teacher_positions: Vec<usize>,
    pub teacher_gain: f64,
    /// Constant added to every teacher entry.
    pub teacher_offset: f64,
}

/// A student with its plan and report.
#[derive(Clone, Debug)]
pub struct Deepened {
    pub student: Dcnn,
    pub plan: InterpolationPlan,
    pub report: DeepenReport,
    pub layout: StudentLayout,
}

/// Deepens `teacher` into an interpolating student with default options.
pub fn interpolate(teacher: &Dcnn, data: &Dataset, s: usize, seed: u64) -> Result<(Dcnn, InterpolationPlan)> {
    let out = interpolate_with(teacher, data, &DeepenOptions::new(s, seed))?;
    Ok((out.student, out.plan))
}

fn untruncated(teacher: &Dcnn) -> Dcnn {
    let mut t = teacher.clone();
    t.truncation = None;
    t
}

fn draw_xi(data: &Dataset, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, usize)> {
    let d = data.dim();
    for attempt in 1..=MAX_XI_RETRIES {
        let mut xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            continue;
        }
        xi.iter_mut().for_each(|v| *v /= norm);
        let proj: Vec<f64> = data.xs.iter().map(|x| xi.iter().zip(x).map(|(a, b)| a * b).sum()).collect();
        let scale = proj.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if proj.len() < 2 || eps_star(&proj) * 2.0 > TOL_PROJ * scale {
            return Ok((xi, attempt));
        }
    }
    Err(Error::invalid(format!("no separating direction found after {MAX_XI_RETRIES} draws")))
}

/// Deepens `teacher` (filter length `s/2`) into a student of filter length `s`
/// that fits every sample of `data` and equals the untruncated teacher output
/// outside the slab of the returned plan.
pub fn interpolate_with(teacher: &Dcnn, data: &Dataset, opts: &DeepenOptions) -> Result<Deepened> {
    teacher.validate()?;
    let s = opts.s;
    let d = data.dim();
    if s % 2 == 1 || s < 2 {
        return Err(Error::invalid(format!("student filter length must be even and positive, got {s}")));
    }
    if teacher.input_dim != d {
        return Err(Error::invalid(format!("teacher input dimension {} differs from data dimension {d}", teacher.input_dim)));
    }
    if !(opts.eps_frac > 0.0 && opts.eps_frac < 1.0) {
        return Err(Error::invalid("eps_frac must lie in (0, 1)"));
    }
    data.check_distinct()?;
    let n = data.len();
    let n_rep = opts.n_rep.unwrap_or(if (3 * n) % 2 == 1 { 3 * n } else { 3 * n + 1 });
    let b0 = opts.b0.unwrap_or(1.25 * data.max_abs_input());
    if !(b0 > 0.0) || data.max_abs_input() > b0 {
        return Err(Error::invalid("input bound must be positive and cover the data"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (xi, attempts) = draw_xi(data, &mut rng)?;
    let xi_l1 = xi.iter().map(|v| v.abs()).sum::<f64>() * (1.0 + 1e-6);

    let linear = linear_feature_block(&xi, s, b0)?;
    let emb = embed_teacher(teacher, &linear, xi_l1, b0, s)?;
    let mut prefix = linear.layers.clone();
    prefix.extend(emb.block.layers.iter().cloned());

    // Realized slot-0 map `x ↦ P ξ_eff·x + C`, probed exactly.
    let zero = blocks::forward_dd(&prefix, &vec![0.0; d], s);
    let c0 = zero[0];
    let tau = 0.5 * b0;
    let wstar = *emb.lead_products.last().unwrap();
    let mut xi_eff = vec![0.0; d];
    for (m, v) in xi_eff.iter_mut().enumerate() {
        let mut e = vec![0.0; d];
        e[m] = tau;
        let out = blocks::forward_dd(&prefix, &e, s);
        *v = ((out[0] - c0).to_f64() / tau) / wstar;
    }
    let sign = wstar.signum();
    let mut plan = InterpolationPlan {
        xi: xi_eff,
        sign_wstar: sign,
        wstar_abs: wstar.abs(),
        eps: 0.0,
        u: Vec::new(),
        t_grid: Vec::new(),
        corrections: Vec::new(),
    };
    plan.u = data.xs.iter().map(|x| plan.project(x)).collect();
    let es = plan.eps_star();
    plan.eps = if n >= 2 { opts.eps_frac * es } else { opts.eps_frac * b0 * xi_l1.max(1.0) };
    if !(plan.eps > 0.0) {
        return Err(Error::invalid("projected data points collide"));
    }
    let f_star = untruncated(teacher);
    plan.corrections = data
        .xs
        .iter()
        .zip(&data.ys)
        .map(|(x, y)| f_star.predict(x).map(|v| y - v))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| plan.u[a].total_cmp(&plan.u[b]));
    let mut coef = Vec::with_capacity(3 * n);
    for &l in &order {
        let (u, r) = (plan.u[l], plan.corrections[l] / plan.eps);
        plan.t_grid.extend([u - plan.eps, u, u + plan.eps]);
        coef.extend([r, -2.0 * r, r]);
    }

    let tb = &emb.teacher_bounds;
    let g_teacher = *tb.last().unwrap();
    let slot0_bound = (c0 + Dd::new(wstar.abs() * xi_l1 * b0)).to_f64();
    let bound = slot0_bound.max(g_teacher) * (1.0 + 1e-9);
    let rin = ReplicationInput {
        in_width: emb.block.out_dim,
        bound,
        slot0_shift: c0,
        wstar,
        teacher_width: teacher.widths().last().copied().unwrap_or(d),
        teacher_offset: g_teacher,
    };
    let rep = replication_block(&rin, n_rep, s, &plan.t_grid)?;

    let final_width = rep.block.out_dim;
    let mut out_coeffs = vec![0.0; final_width];
    for ((&p, &g), &c) in rep.ramp_positions.iter().zip(&rep.ramp_gains).zip(&coef) {
        out_coeffs[p] = c / (g * plan.wstar_abs);
    }
    let mut out_offset = teacher.out_offset;
    for (&p, &c) in rep.teacher_positions.iter().zip(&teacher.out_coeffs) {
        out_coeffs[p] = c / rep.teacher_gain;
        out_offset -= out_coeffs[p] * g_teacher;
    }
    let j3 = rep.block.layers.len();
    let layout = StudentLayout {
        ramp_positions: rep.ramp_positions.clone(),
        ramp_gains: rep.ramp_gains.clone(),
        teacher_positions: rep.teacher_positions.clone(),
        teacher_gain: rep.teacher_gain,
        teacher_offset: g_teacher,
    };
    let mut layers = prefix;
    layers.extend(rep.block.layers);
    let student = Dcnn::new(d, s, layers, out_coeffs, out_offset, teacher.truncation)?;
    let added = AddedParams::new(final_width, d, s);
    let teacher_params = teacher.count_params()?;
    let report = DeepenReport {
        j1: linear.layers.len(),
        j2: emb.block.layers.len(),
        j3,
        n_rep,
        b0,
        final_width,
        student_params: teacher_params + added.total(),
        teacher_params,
        added_params: added,
        replication_residual: rep.residual,
        xi_attempts: attempts,
    };
    Ok(Deepened { student, plan, report, layout })
}

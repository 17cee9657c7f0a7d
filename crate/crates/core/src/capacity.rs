//! Evaluators for pseudo-dimension, covering-number and excess-risk bounds.
//!
//! Log conventions: the general pseudo-dimension bound and its explicit DCNN
//! specialization use base-2 logs; the `c0` form, the covering bound and the
//! rate bound use natural logs. The absolute constants `c0` and `C` are not
//! pinned down by the theory and are caller-supplied (default 1).

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};

/// Architecture description for the general pseudo-dimension bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArchSpec {
    /// Widths `d_1, …, d_J`.
    pub widths: Vec<usize>,
    /// Free parameters per layer `K_1, …, K_J`.
    pub params: Vec<usize>,
    /// Number of polynomial pieces of the activation.
    pub pieces: usize,
    /// Degree of the activation pieces.
    pub theta: usize,
}

impl ArchSpec {
    /// Depth `J`.
    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    fn check(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.len() != self.params.len() {
            return Err(Error::invalid("widths and parameter counts must be non-empty and of equal length"));
        }
        if self.pieces == 0 || self.theta == 0 || self.widths.contains(&0) || self.params.contains(&0) {
            return Err(Error::invalid("architecture entries must be positive integers"));
        }
        Ok(())
    }

    /// Layout of a ReLU DCNN with identical-in-middle biases:
    /// `d_i = d + iS`, `K_j = 3S` for `j < J`, `K_J = S + 1 + d + JS`.
    pub fn dcnn(j: usize, s: usize, d: usize) -> Self {
        let widths = (1..=j).map(|i| d + i * s).collect();
        let params = (1..=j).map(|i| if i < j { 3 * s } else { s + 1 + d + j * s }).collect();
        ArchSpec { widths, params, pieces: 1, theta: 1 }
    }
}

fn geometric(theta: f64, terms: usize) -> f64 {
    (0..terms).map(|k| theta.powi(k as i32)).sum()
}

/// `R = Σ_{k=0}^{J} θ^k + Σ_{i=1}^{J} d_i p Σ_{k=0}^{i-1} θ^k`.
pub fn r_value(spec: &ArchSpec) -> Result<f64> {
    spec.check()?;
    let theta = spec.theta as f64;
    let j = spec.depth();
    let tail: f64 = spec
        .widths
        .iter()
        .enumerate()
        .map(|(i, &d)| d as f64 * spec.pieces as f64 * geometric(theta, i + 1))
        .sum();
    Ok(geometric(theta, j + 1) + tail)
}

/// General bound `J + 1 + (d_J + Σ_j (J−j+2) K_j)(log₂(4eR) + log₂ log₂(2eR))`.
pub fn pdim_general(spec: &ArchSpec) -> Result<f64> {
    let r = r_value(spec)?;
    let j = spec.depth();
    let weighted: usize = spec.params.iter().enumerate().map(|(i, &k)| (j - (i + 1) + 2) * k).sum();
    let mult = (spec.widths[j - 1] + weighted) as f64;
    Ok((j + 1) as f64 + mult * ((4.0 * E * r).log2() + (2.0 * E * r).log2().log2()))
}

/// Explicit DCNN bound `J + 1 + (3d + 9J²S)·2·log₂(12e(J²S + Jd)²)`.
pub fn pdim_dcnn_explicit(j: usize, s: usize, d: usize) -> Result<f64> {
    if j < 2 || s == 0 || d == 0 {
        return Err(Error::invalid("explicit DCNN bound needs J >= 2 and positive S, d"));
    }
    let (jf, sf, df) = (j as f64, s as f64, d as f64);
    let inner = jf * jf * sf + jf * df;
    Ok(jf + 1.0 + (3.0 * df + 9.0 * jf * jf * sf) * 2.0 * (12.0 * E * inner * inner).log2())
}

/// Order-of-magnitude form `c0 (J²S + d) ln(Jd + J²S)`.
pub fn pdim_dcnn_c0(j: usize, s: usize, d: usize, c0: f64) -> Result<f64> {
    if j < 2 || s == 0 || d == 0 || !(c0 > 0.0) {
        return Err(Error::invalid("c0 form needs J >= 2, positive S, d and c0"));
    }
    let (jf, sf, df) = (j as f64, s as f64, d as f64);
    Ok(c0 * (jf * jf * sf + df) * (jf * df + jf * jf * sf).ln())
}

/// Natural log of the packing/covering bound
/// `2 ((2eM/ε) ln(2eM/ε))^{Pdim}`, valid for `0 < ε ≤ M`.
pub fn covering_log_bound(pdim: f64, m: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !(m > 0.0) || eps > m {
        return Err(Error::invalid(format!("covering bound requires 0 < eps <= M (eps = {eps}, M = {m})")));
    }
    if !(pdim >= 0.0) {
        return Err(Error::invalid("pseudo-dimension must be nonnegative"));
    }
    let q = 2.0 * E * m / eps;
    Ok(std::f64::consts::LN_2 + pdim * (q.ln() + q.ln().ln()))
}

/// Excess-risk rate
/// `C d ln d (1 + ln(2/δ)/√n)((ln n) J² ln J / n + 1/√n + ln J / J)`.
/// `n` and `J` are real so closed-form checks can use non-integer values.
pub fn excess_risk_rate(n: f64, d: f64, j: f64, delta: f64, c: f64) -> Result<f64> {
    if !(n >= 3.0) || !(d >= 2.0) || !(j >= 2.0) || !(delta > 0.0 && delta < 1.0) || !(c > 0.0) {
        return Err(Error::invalid("rate bound requires n >= 3, d >= 2, J >= 2, 0 < delta < 1, C > 0"));
    }
    let conf = 1.0 + (2.0 / delta).ln() / n.sqrt();
    let shape = n.ln() * j * j * j.ln() / n + 1.0 / n.sqrt() + j.ln() / j;
    Ok(c * d * d.ln() * conf * shape)
}

/// All bound evaluations for one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub r: f64,
    pub pdim_general: f64,
    pub pdim_dcnn_explicit: f64,
    pub pdim_dcnn_c0: f64,
    /// `(ε, log covering bound)` rows at `ε = M/2^k`.
    pub covering_log: Vec<(f64, f64)>,
    pub rate_bound: f64,
}

/// Parameters of [`bound_report`].
#[derive(Clone, Copy, Debug)]
pub struct BoundInputs {
    pub j: usize,
    pub s: usize,
    pub d: usize,
    pub n: usize,
    pub delta: f64,
    pub c0: f64,
    pub c: f64,
    pub m: f64,
}

/// Evaluates every bound for a DCNN of depth `J`, filter length `S`, input dimension `d`.
pub fn bound_report(p: &BoundInputs) -> Result<BoundReport> {
    let spec = ArchSpec::dcnn(p.j, p.s, p.d);
    let pdim_general = pdim_general(&spec)?;
    let covering_log = (1..=6)
        .map(|k| {
            let eps = p.m / f64::from(1u32 << k);
            covering_log_bound(pdim_general, p.m, eps).map(|v| (eps, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport {
        r: r_value(&spec)?,
        pdim_general,
        pdim_dcnn_explicit: pdim_dcnn_explicit(p.j, p.s, p.d)?,
        pdim_dcnn_c0: pdim_dcnn_c0(p.j, p.s, p.d, p.c0)?,
        covering_log,
        rate_bound: excess_risk_rate(p.n as f64, p.d as f64, p.j as f64, p.delta, p.c)?,
    })
}

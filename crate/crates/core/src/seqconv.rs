//! Finitely supported sequences, zero-padded 1-D convolution, convolutional
//! (Toeplitz-type) matrices and downsampling.
//!
//! Indexing is 0-based throughout: `coeffs[k]` holds `w_k`, and vector entry
//! `i` is the 1-based entry `i + 1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real sequence supported in `{0, …, len-1}`; entries outside are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilterSeq {
    coeffs: Vec<f64>,
}

impl FilterSeq {
    /// Wraps `coeffs`; fails on an empty list.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("filter sequence must be non-empty"));
        }
        Ok(FilterSeq { coeffs })
    }

    /// The delta sequence `[1]`, identity for convolution.
    pub fn delta() -> Self {
        FilterSeq { coeffs: vec![1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Degree of the support, `len - 1`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Entry `k`, zero outside the stored support.
    pub fn at(&self, k: isize) -> f64 {
        if k < 0 {
            0.0
        } else {
            self.coeffs.get(k as usize).copied().unwrap_or(0.0)
        }
    }

    /// `‖w‖₁`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Sequence-to-sequence convolution `self * v`.
    pub fn convolve(&self, v: &FilterSeq) -> FilterSeq {
        FilterSeq { coeffs: convolve_slices(&self.coeffs, &v.coeffs) }
    }

    /// `T^w x`: the zero-padded convolution of `x` (length `d`), length `d + degree`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        apply_conv(&self.coeffs, x, self.degree())
    }

    /// Dense `(in_dim + degree) × in_dim` convolutional matrix.
    pub fn materialize(&self, in_dim: usize) -> DMatrix<f64> {
        let rows = in_dim + self.degree();
        DMatrix::from_fn(rows, in_dim, |i, k| self.at(i as isize - k as isize))
    }

    /// Same sequence with trailing zeros removed (keeps at least one entry).
    pub fn trimmed(&self) -> FilterSeq {
        let mut c = self.coeffs.clone();
        while c.len() > 1 && *c.last().unwrap() == 0.0 {
            c.pop();
        }
        FilterSeq { coeffs: c }
    }
}

/// Full convolution of two non-empty slices.
pub fn convolve_slices(w: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.len() + v.len() - 1];
    for (k, &vk) in v.iter().enumerate() {
        for (i, &wi) in w.iter().enumerate() {
            out[i + k] += wi * vk;
        }
    }
    out
}

/// Zero-padded convolution of `x` by filter `w`, producing `x.len() + out_extra`
/// entries. `out_extra` is at least `w.len() - 1`; surplus rows come from the
/// implicit zero taps of a filter shorter than the layer's support.
pub fn apply_conv(w: &[f64], x: &[f64], out_extra: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + out_extra];
    for (k, &xk) in x.iter().enumerate() {
        for (i, &wi) in w.iter().enumerate() {
            out[i + k] += wi * xk;
        }
    }
    out
}

/// Convolution of a sequence by a list of filters in order.
pub fn convolve_all<'a>(filters: impl IntoIterator<Item = &'a FilterSeq>) -> FilterSeq {
    filters.into_iter().fold(FilterSeq::delta(), |acc, f| acc.convolve(f))
}

/// Downsampling `D_m`: keeps the `m`-th, `2m`-th, … entries (1-based), so the
/// output has `⌊K/m⌋` entries.
pub fn downsample(v: &[f64], m: usize) -> Result<Vec<f64>> {
    if m == 0 || m > v.len() {
        return Err(Error::invalid("empty downsample"));
    }
    Ok(v.iter().skip(m - 1).step_by(m).copied().collect())
}

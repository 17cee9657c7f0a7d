//! Double-double arithmetic (about 106 significant bits) built from
//! error-free transformations.
//!
//! Used by the high-precision forward pass of very deep constructed networks,
//! where large constant shifts ride along with small signals for hundreds of
//! layers and plain `f64` rounding would swamp the signal.

use std::ops::{Add, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline(always)]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline(always)]
    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Nearest `f64`.
    #[inline(always)]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// `self + w * x` with `w` an `f64` coefficient.
    #[inline(always)]
    pub fn mul_add_f64(self, w: f64, x: Dd) -> Dd {
        let (p, pe) = two_prod(w, x.hi);
        let pe = w.mul_add(x.lo, pe);
        let (s, e) = two_sum(self.hi, p);
        let e = e + self.lo + pe;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    /// `self - b` with `b` an `f64`.
    #[inline(always)]
    pub fn sub_f64(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, -b);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }

    /// `max(self, 0)`.
    #[inline(always)]
    pub fn relu(self) -> Dd {
        if self.hi > 0.0 {
            self
        } else {
            Dd::ZERO
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline(always)]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline(always)]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline(always)]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline(always)]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

/// Convolution of two `f64` sequences accumulated in double-double.
pub fn convolve_dd(w: &[Dd], v: &[f64]) -> Vec<Dd> {
    let mut out = vec![Dd::ZERO; w.len() + v.len() - 1];
    for (k, &vk) in v.iter().enumerate() {
        if vk == 0.0 {
            continue;
        }
        for (i, &wi) in w.iter().enumerate() {
            out[i + k] = out[i + k].mul_add_f64(vk, wi);
        }
    }
    out
}

//! One-dimensional Jacobi polynomials `J_k^{a,b}` with `a, b >= -1`.
//!
//! For parameters equal to `-1` the polynomials follow the hypergeometric
//! representation, except `J_1^{-1,-1}(z) = z`. Every coefficient function is
//! total: negative degrees give zero coefficients, matching `J_k = 0` for
//! `k < 0`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JacobiParams {
    pub alpha: f64,
    pub beta: f64,
}

impl JacobiParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for value in [alpha, beta] {
            if !(value >= -1.0) {
                return Err(Error::ParameterDomain { value });
            }
        }
        Ok(Self { alpha, beta })
    }

    /// Builds a pair without the domain check, for internal bookkeeping where
    /// a coefficient is multiplied by a vanishing factor anyway.
    pub(crate) const fn raw(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn swapped(self) -> Self {
        Self::raw(self.beta, self.alpha)
    }

    fn both_minus_one(self) -> bool {
        self.alpha == -1.0 && self.beta == -1.0
    }

    fn sum(self) -> f64 {
        self.alpha + self.beta
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeTermCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PromotionCoeffs {
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemotionCoeffs {
    pub e1: f64,
    pub e2: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

/// `z J_k = a1 J_{k+1} + a2 J_k + a3 J_{k-1}`.
pub fn three_term_coeffs(k: i64, p: JacobiParams) -> ThreeTermCoeffs {
    let (a, b) = (p.alpha, p.beta);
    let (a1, a2, a3) = if k < 0 {
        (0.0, 0.0, 0.0)
    } else if k == 0 && p.both_minus_one() {
        (1.0, 0.0, 0.0)
    } else if k == 0 {
        let s = a + b + 2.0;
        (2.0 / s, (b - a) / s, 0.0)
    } else if k == 1 && p.both_minus_one() {
        (4.0, 0.0, 1.0)
    } else if k == 2 && p.both_minus_one() {
        (0.5, 0.0, 0.0)
    } else {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        (
            2.0 * (k + 1.0) * (k + a + b + 1.0) / ((s + 1.0) * (s + 2.0)),
            (b * b - a * a) / (s * (s + 2.0)),
            2.0 * (k + a) * (k + b) / (s * (s + 1.0)),
        )
    };
    ThreeTermCoeffs { a1, a2, a3 }
}

/// `(b1, b2)` with `J_k^{a,b} = b1 J_k^{a+1,b} + b2 J_{k-1}^{a+1,b}`.
pub fn promotion_b(k: i64, p: JacobiParams) -> (f64, f64) {
    if k < 0 {
        (0.0, 0.0)
    } else if k == 0 {
        (1.0, 0.0)
    } else if k == 1 && p.both_minus_one() {
        (2.0, -1.0)
    } else {
        let k = k as f64;
        let den = 2.0 * k + p.sum() + 1.0;
        ((k + p.sum() + 1.0) / den, -(k + p.beta) / den)
    }
}

/// Promotion coefficients, including the two-step `c` composition
/// `J_k^{a,b} = c1 J_k^{a+2,b} + c2 J_{k-1}^{a+2,b} + c3 J_{k-2}^{a+2,b}`.
pub fn promotion_coeffs(k: i64, p: JacobiParams) -> PromotionCoeffs {
    let up = JacobiParams::raw(p.alpha + 1.0, p.beta);
    let (b1, b2) = promotion_b(k, p);
    let (u1, u2) = promotion_b(k, up);
    let (v1, v2) = promotion_b(k - 1, up);
    PromotionCoeffs { b1, b2, c1: b1 * u1, c2: b1 * u2 + b2 * v1, c3: b2 * v2 }
}

/// `(e1, e2)` with `(1-z)/2 J_k^{a+1,b} = e1 J_k^{a,b} + e2 J_{k+1}^{a,b}`.
pub fn demotion_e(k: i64, p: JacobiParams) -> (f64, f64) {
    if k < 0 {
        (0.0, 0.0)
    } else if k == 0 && p.both_minus_one() {
        (0.5, -0.5)
    } else if k == 1 && p.both_minus_one() {
        (0.0, -1.0)
    } else {
        let k = k as f64;
        let den = 2.0 * k + p.sum() + 2.0;
        ((k + p.alpha + 1.0) / den, -(k + 1.0) / den)
    }
}

/// Demotion coefficients, including
/// `((1-z)/2)^2 J_k^{a+2,b} = g1 J_{k+2}^{a,b} + g2 J_{k+1}^{a,b} + g3 J_k^{a,b}`.
pub fn demotion_coeffs(k: i64, p: JacobiParams) -> DemotionCoeffs {
    let up = JacobiParams::raw(p.alpha + 1.0, p.beta);
    let (e1, e2) = demotion_e(k, p);
    let (u1, u2) = demotion_e(k, up);
    let (w1, w2) = demotion_e(k + 1, p);
    DemotionCoeffs { e1, e2, g1: u2 * w2, g2: u1 * e2 + u2 * w1, g3: u1 * e1 }
}

/// `d` with `J_k^{a,b}' = d J_{k-1}^{a+1,b+1}`.
pub fn derivative_coeff(k: i64, p: JacobiParams) -> f64 {
    if k < 0 {
        0.0
    } else if k == 1 && p.both_minus_one() {
        1.0
    } else {
        (k as f64 + p.sum() + 1.0) / 2.0
    }
}

/// Values `J_0(z), ..., J_n(z)` by the three-term recurrence.
pub fn jacobi_eval_all(n: usize, p: JacobiParams, z: f64) -> Vec<f64> {
    jacobi_homogeneous_all(n, p, z, 1.0)
}

/// Values `v^j J_j(u / v)` for `j = 0..=n`, computed without dividing by `v`.
pub fn jacobi_homogeneous_all(n: usize, p: JacobiParams, u: f64, v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    let mut prev = 0.0;
    for j in 0..n {
        let c = three_term_coeffs(j as i64, p);
        let cur = out[j];
        let next = ((u - c.a2 * v) * cur - c.a3 * v * v * prev) / c.a1;
        prev = cur;
        out.push(next);
    }
    out
}

pub fn jacobi_eval(k: usize, p: JacobiParams, z: f64) -> f64 {
    jacobi_eval_all(k, p, z)[k]
}

/// Value and derivative of `J_n` at `z`.
pub fn jacobi_with_derivative(n: usize, p: JacobiParams, z: f64) -> (f64, f64) {
    let value = jacobi_eval(n, p, z);
    if n == 0 {
        return (value, 0.0);
    }
    let shifted = JacobiParams::raw(p.alpha + 1.0, p.beta + 1.0);
    let d = derivative_coeff(n as i64, p);
    (value, d * jacobi_eval(n - 1, shifted, z))
}

fn ln_gamma_checked(x: f64) -> Result<(f64, f64)> {
    if x <= 0.0 && x == x.floor() {
        return Err(Error::NormUndefined { arg: x });
    }
    let (lg, sign) = libm::lgamma_r(x);
    Ok((lg, sign as f64))
}

/// `h_k^{a,b}` with `int J_k J_j (1-z)^a (1+z)^b dz = 2^{a+b+1} h_k delta_{jk}`.
pub fn jacobi_norm(k: usize, p: JacobiParams) -> Result<f64> {
    let k = k as f64;
    let (a, b) = (p.alpha, p.beta);
    let den = 2.0 * k + a + b + 1.0;
    if den == 0.0 {
        return Err(Error::NormUndefined { arg: den });
    }
    let (l1, s1) = ln_gamma_checked(k + a + 1.0)?;
    let (l2, s2) = ln_gamma_checked(k + b + 1.0)?;
    let (l3, s3) = ln_gamma_checked(k + 1.0)?;
    let (l4, s4) = ln_gamma_checked(k + a + b + 1.0)?;
    Ok(s1 * s2 * s3 * s4 * (l1 + l2 - l3 - l4).exp() / den)
}

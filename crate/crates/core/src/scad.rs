//! SCAD penalty: rate function, its primitive, and the exact univariate
//! minimizer used by coordinate descent.
//!
//! With `t = |θ|` the rate is
//!
//! ```text
//! q(t) = λ                              t < λ
//!      = (aλ - t)₊ / (a - 1)            t ≥ λ
//! ```
//!
//! and the penalty `P(t) = ∫₀ᵗ q` is
//!
//! ```text
//! P(t) = λ t                            t ≤ λ
//!      = (2aλt - t² - λ²) / (2(a - 1))  λ < t ≤ aλ
//!      = (a + 1) λ² / 2                 t > aλ
//! ```

use crate::error::{Error, Result};

pub const DEFAULT_CONCAVITY: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScadParams {
    lambda: f64,
    a: f64,
}

impl ScadParams {
    pub fn new(lambda: f64, a: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(a > 2.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "SCAD concavity a must exceed 2, got {a}"
            )));
        }
        Ok(Self { lambda, a })
    }

    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, DEFAULT_CONCAVITY)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

/// Penalty rate `q_λ(|θ|)`.
pub fn scad_rate(theta_abs: f64, params: &ScadParams) -> f64 {
    let (lam, a) = (params.lambda, params.a);
    if lam == 0.0 {
        return 0.0;
    }
    if theta_abs < lam {
        lam
    } else {
        (a * lam - theta_abs).max(0.0) / (a - 1.0)
    }
}

/// Penalty value `P_λ(|θ|)` with `P_λ(0) = 0`.
pub fn scad_penalty(theta_abs: f64, params: &ScadParams) -> f64 {
    let (lam, a) = (params.lambda, params.a);
    let t = theta_abs;
    if t <= lam {
        lam * t
    } else if t <= a * lam {
        (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0))
    } else {
        (a + 1.0) * lam * lam / 2.0
    }
}

/// `½ c β² − z β + P_λ(|β|)`, which differs from `½ c (β − z/c)² + P_λ(|β|)`
/// by a constant.
pub fn univariate_objective(beta: f64, z: f64, c: f64, params: &ScadParams) -> f64 {
    0.5 * c * beta * beta - z * beta + scad_penalty(beta.abs(), params)
}

/// Global minimizer of `½ c (β − z/c)² + P_λ(|β|)`.
///
/// The objective is piecewise quadratic on `[0, λ]`, `[λ, aλ]` and
/// `[aλ, ∞)` (for `z ≥ 0`; the rule is odd in `z`). Each piece contributes
/// its stationary point clamped to the piece, or both endpoints when the
/// middle piece is concave (`c (a − 1) ≤ 1`), and the best candidate wins.
/// Ties go to the candidate of smallest magnitude.
///
/// For `c (a − 1) > 1` this is the familiar three-branch rule
///
/// ```text
/// S(z, λ)/c                               |z| ≤ λ (1 + c)
/// ((a−1) z − sign(z) aλ) / ((a−1) c − 1)  λ (1 + c) < |z| ≤ a λ c
/// z / c                                   |z| > a λ c
/// ```
///
/// where `S` is soft-thresholding.
pub fn scad_threshold(z: f64, c: f64, params: &ScadParams) -> f64 {
    debug_assert!(c > 0.0, "curvature must be positive");
    let (lam, a) = (params.lambda, params.a);
    let r = z.abs();
    if lam == 0.0 {
        return z / c;
    }
    let f = |b: f64| 0.5 * c * b * b - r * b + scad_penalty(b, params);

    let soft = ((r - lam) / c).clamp(0.0, lam);
    let knee = a * lam;
    let flat = (r / c).max(knee);
    let curv_mid = (a - 1.0) * c - 1.0;
    let mid = if curv_mid > 0.0 {
        Some((((a - 1.0) * r - a * lam) / curv_mid).clamp(lam, knee))
    } else {
        None
    };

    let mut best = 0.0;
    let mut best_val = 0.0;
    let candidates = [Some(soft), Some(lam), mid, Some(knee), Some(flat)];
    for b in candidates.into_iter().flatten() {
        let v = f(b);
        if v < best_val {
            best = b;
            best_val = v;
        }
    }
    best.copysign(z)
}

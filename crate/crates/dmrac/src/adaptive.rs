//! Real-time half of the controller: projection-bounded outer-weight
//! update, the adaptive term, and the total control law.
//!
//! The outer weight matrix W multiplies the feature vector to produce the
//! uncertainty estimate. Its continuous-time update direction is
//! `Γ proj(W, Φ (eᵀ P B))`, discretized by explicit Euler at the control
//! step. The `B` factor keeps the direction k x m when the input and
//! state dimensions differ; with B square identity it reduces to the
//! textbook law.

use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, sub_vec, Matrix};

/// Outer adaptive weights with a smooth projection bound.
///
/// Invariant: `||W||_F <= w_bound * (1 + eps_proj)` after every update.
/// A non-finite `w_bound` disables the projection and the clamp entirely,
/// which is the classic unconstrained law.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterWeights {
    pub w: Matrix, // k x m
    pub w_bound: f64,
    pub eps_proj: f64,
}

impl OuterWeights {
    pub fn zeros(k: usize, m: usize, w_bound: f64, eps_proj: f64) -> Self {
        assert!(w_bound > 0.0, "projection bound must be positive");
        assert!(eps_proj > 0.0, "projection softness must be positive");
        OuterWeights {
            w: Matrix::zeros(k, m),
            w_bound,
            eps_proj,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn norm(&self) -> f64 {
        self.w.frobenius_norm()
    }

    /// Hard ceiling the invariant is measured against.
    pub fn hard_limit(&self) -> f64 {
        self.w_bound * (1.0 + self.eps_proj)
    }
}

/// Per-run gains: state feedback, feed-forward, adaptation rate, and the
/// Lyapunov pair (P, Q) for the scenario reference model.
#[derive(Clone, Debug)]
pub struct GainSet {
    pub k: Matrix,     // m x n
    pub k_r: Matrix,   // m x r
    pub gamma: Matrix, // k x k, SPD
    pub p: Matrix,     // n x n, solves A_rmᵀP + PA_rm + Q = 0
    pub q: Matrix,     // n x n, SPD
}

/// `e = x_rm - x`.
pub fn tracking_error(x_rm: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x_rm.len() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "tracking_error",
            expected: format!("{}", x_rm.len()),
            got: format!("{}", x.len()),
        });
    }
    Ok(sub_vec(x_rm, x))
}

/// `nu_ad = Wᵀ Φ`.
pub fn adaptive_term(weights: &OuterWeights, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != weights.feature_dim() {
        return Err(Error::DimensionMismatch {
            context: "adaptive_term",
            expected: format!("{}", weights.feature_dim()),
            got: format!("{}", phi.len()),
        });
    }
    Ok(weights.w.transpose_mul_vec(phi))
}

/// `u = -K x + K_r r - nu_ad`.
pub fn total_control(gains: &GainSet, x: &[f64], r: &[f64], nu_ad: &[f64]) -> Result<Vec<f64>> {
    let m = gains.k.rows();
    if x.len() != gains.k.cols() || r.len() != gains.k_r.cols() || nu_ad.len() != m {
        return Err(Error::DimensionMismatch {
            context: "total_control",
            expected: format!(
                "x len {}, r len {}, nu_ad len {m}",
                gains.k.cols(),
                gains.k_r.cols()
            ),
            got: format!("x len {}, r len {}, nu_ad len {}", x.len(), r.len(), nu_ad.len()),
        });
    }
    let fb = gains.k.mul_vec(x);
    let ff = gains.k_r.mul_vec(r);
    Ok((0..m).map(|i| -fb[i] + ff[i] - nu_ad[i]).collect())
}

/// Raw update direction `Y = Φ (eᵀ P B)`, a k x m matrix.
pub fn raw_update_direction(phi: &[f64], e: &[f64], p: &Matrix, b: &Matrix) -> Result<Matrix> {
    if e.len() != p.rows() || p.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            context: "raw_update_direction",
            expected: format!("e len {}, P {0}x{0} matching B rows", p.rows()),
            got: format!("e len {}, B {}x{}", e.len(), b.rows(), b.cols()),
        });
    }
    // row vector eᵀ P B of length m
    let pe = p.transpose_mul_vec(e); // Pᵀe = Pe for symmetric P; transpose form keeps it exact either way
    let epb = b.transpose_mul_vec(&pe);
    Ok(Matrix::outer(phi, &epb))
}

/// Smooth projection of a candidate direction `Y` at the current weights.
///
/// With `f(W) = (||W||_F² - W_b²) / (eps * W_b²)` the direction passes
/// through unchanged while `f <= 0` (interior) or while it points inward;
/// otherwise the outward component is removed in proportion to `f`.
pub fn project(weights: &OuterWeights, y: &Matrix) -> Matrix {
    if !weights.w_bound.is_finite() {
        return y.clone();
    }
    let wb2 = weights.w_bound * weights.w_bound;
    let denom = weights.eps_proj * wb2;
    let f = (weights.w.frobenius_norm().powi(2) - wb2) / denom;
    if f <= 0.0 {
        return y.clone();
    }
    // grad f = 2W / (eps * W_b²)
    let grad = weights.w.scale(2.0 / denom);
    let inner = dot(grad.data(), y.data());
    if inner <= 0.0 {
        return y.clone();
    }
    let gnorm2 = grad.frobenius_norm().powi(2);
    let mut out = y.clone();
    out.add_scaled(-f * inner / gnorm2, &grad);
    out
}

/// One explicit Euler step of the weight law:
/// `W <- W + dt * Γ * proj(W, Φ (eᵀ P B))`, followed by a hard norm clamp
/// in case the discrete step overshoots the soft bound.
pub fn outer_step(
    weights: &OuterWeights,
    phi: &[f64],
    e: &[f64],
    gains: &GainSet,
    b: &Matrix,
    dt: f64,
) -> Result<OuterWeights> {
    assert!(dt > 0.0, "outer_step requires dt > 0");
    if phi.len() != weights.feature_dim() {
        return Err(Error::DimensionMismatch {
            context: "outer_step",
            expected: format!("{}", weights.feature_dim()),
            got: format!("{}", phi.len()),
        });
    }
    let y = raw_update_direction(phi, e, &gains.p, b)?;
    let direction = gains.gamma.matmul(&project(weights, &y));
    let mut out = weights.clone();
    out.w.add_scaled(dt, &direction);
    if out.w_bound.is_finite() {
        let limit = out.hard_limit();
        let norm = out.w.frobenius_norm();
        if norm > limit {
            out.w = out.w.scale(limit / norm);
        }
    }
    Ok(out)
}

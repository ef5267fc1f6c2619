//! Calculators for the analytic quantities that accompany the controller:
//! the ultimate-bound radius on the tracking error, the generalization
//! tolerance that keeps the frozen-network loop contracting, the sample
//! complexity of the feature trainer, and the Lyapunov function monitors.

use crate::error::{Error, Result};
use crate::numerics::linalg::{require_spd, sym_eig_bounds};
use crate::numerics::matrix::Matrix;
use crate::sim::SimTrace;

/// Summary of every analytic quantity for a scenario; each field is a
/// pure function of the inputs recorded next to it.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub uub_radius: f64,
    pub eps_bar: f64,
    pub eps_bar_source: EpsBarSource,
    pub generalization_tolerance: f64,
    pub e_norm_reference: f64,
    pub sample_complexity: u64,
    pub sample_eps: f64,
    pub sample_delta: f64,
    pub k_bits: u64,
    pub n_weights: u64,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub lambda_min_q: f64,
    pub lambda_max_q: f64,
}

/// Where the approximation-error bound came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpsBarSource {
    /// Supplied by the user or the scenario file.
    Configured,
    /// Max observed `||Delta(x) - nu_ad||` over a calibration run.
    Empirical,
}

impl std::fmt::Display for EpsBarSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpsBarSource::Configured => write!(f, "configured"),
            EpsBarSource::Empirical => write!(f, "empirical"),
        }
    }
}

impl BoundReport {
    /// Single-document structured text rendering.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("bound-report:\n");
        s.push_str(&format!(
            "  uub_radius: {}\n  eps_bar: {}\n  eps_bar_source: {}\n",
            self.uub_radius, self.eps_bar, self.eps_bar_source
        ));
        s.push_str(&format!(
            "  generalization_tolerance: {}\n  e_norm_reference: {}\n",
            self.generalization_tolerance, self.e_norm_reference
        ));
        s.push_str(&format!(
            "  sample_complexity: {}\n  sample_eps: {}\n  sample_delta: {}\n  k_bits: {}\n  n_weights: {}\n",
            self.sample_complexity, self.sample_eps, self.sample_delta, self.k_bits, self.n_weights
        ));
        s.push_str(&format!(
            "  lambda_min_p: {}\n  lambda_max_p: {}\n  lambda_min_q: {}\n  lambda_max_q: {}\n",
            self.lambda_min_p, self.lambda_max_p, self.lambda_min_q, self.lambda_max_q
        ));
        s
    }
}

/// Ultimate-bound radius `2 λ_max(P) ε̄ / λ_min(Q)`: outside this ball the
/// Lyapunov derivative is negative.
pub fn uub_radius(p: &Matrix, q: &Matrix, eps_bar: f64) -> Result<f64> {
    require_spd(p, "uub_radius P")?;
    require_spd(q, "uub_radius Q")?;
    assert!(eps_bar >= 0.0, "eps_bar must be nonnegative");
    let (_, lmax_p) = sym_eig_bounds(p)?;
    let (lmin_q, _) = sym_eig_bounds(q)?;
    Ok(2.0 * lmax_p * eps_bar / lmin_q)
}

/// Generalization tolerance `λ_max(Q) ||e|| / λ_min(P)`: the estimate
/// error a frozen network may carry while the loop still contracts at
/// tracking error `||e||`. Implemented exactly as printed in the source
/// analysis, including its P/Q placement.
pub fn generalization_tolerance(p: &Matrix, q: &Matrix, e_norm: f64) -> Result<f64> {
    require_spd(p, "generalization_tolerance P")?;
    require_spd(q, "generalization_tolerance Q")?;
    assert!(e_norm >= 0.0, "e_norm must be nonnegative");
    let (lmin_p, _) = sym_eig_bounds(p)?;
    let (_, lmax_q) = sym_eig_bounds(q)?;
    Ok(lmax_q * e_norm / lmin_p)
}

/// Sample-complexity bound `ceil((1/ε²)(k N ln 2 + ln(2/δ)))` for a
/// squared-error trainer over a hypothesis class of N weights at k bits
/// each.
pub fn sample_complexity(eps: f64, delta: f64, k_bits: u64, n_weights: u64) -> Result<u64> {
    if eps <= 0.0 {
        return Err(Error::InvalidTolerance(eps));
    }
    if delta <= 0.0 || delta > 2.0 {
        return Err(Error::InvalidConfidence(delta));
    }
    let raw = (1.0 / (eps * eps))
        * ((k_bits as f64) * (n_weights as f64) * std::f64::consts::LN_2 + (2.0 / delta).ln());
    Ok(raw.max(0.0).ceil() as u64)
}

/// Lyapunov candidate `eᵀPe + tr(W̃ᵀ Γ⁻¹ W̃)/2`; the weight term needs
/// the parameter error and is only available in structured scenarios.
/// With `w_tilde` absent the reduced monitor `eᵀPe` is returned.
pub fn lyapunov_value(
    e: &[f64],
    w_tilde: Option<&Matrix>,
    p: &Matrix,
    gamma: &Matrix,
) -> Result<f64> {
    require_spd(p, "lyapunov_value P")?;
    let quad = p.quadratic_form(e);
    let Some(wt) = w_tilde else {
        return Ok(quad);
    };
    require_spd(gamma, "lyapunov_value Gamma")?;
    // tr(W̃ᵀ Γ⁻¹ W̃) column by column: solve Γ z = w_col, accumulate w_colᵀ z
    let mut tr = 0.0;
    for j in 0..wt.cols() {
        let col: Vec<f64> = (0..wt.rows()).map(|i| wt.get(i, j)).collect();
        let z = crate::numerics::linalg::solve_linear(gamma, &col)?;
        tr += crate::numerics::matrix::dot(&col, &z);
    }
    Ok(quad + 0.5 * tr)
}

/// Lyapunov monitor series for a structured trace: the candidate value at
/// every sample. The weight-error term enters as `tr(W̃ᵀ Γ⁻¹ W̃)` — for
/// the rate-Γ update law this combination is the one whose derivative is
/// exactly `-eᵀQe` when the approximation error vanishes.
pub fn lyapunov_series(
    trace: &SimTrace,
    p: &Matrix,
    gamma: &Matrix,
    w_star: &Matrix,
) -> Result<Vec<f64>> {
    require_spd(p, "lyapunov_series P")?;
    require_spd(gamma, "lyapunov_series Gamma")?;
    if trace.steps.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let w0 = &trace.steps[0].w;
    if w0.rows() != w_star.rows() || w0.cols() != w_star.cols() {
        return Err(Error::UnstructuredScenario);
    }
    // tr(W̃ᵀΓ⁻¹W̃) = the printed half-form at doubled rate
    let half_gamma = gamma.scale(0.5);
    trace
        .steps
        .iter()
        .map(|s| {
            let wt = w_star.sub(&s.w);
            lyapunov_value(&s.e, Some(&wt), p, &half_gamma)
        })
        .collect()
}

/// Per-step residual series `FD dV/dt - (-eᵀQe)` over a structured trace,
/// with the finite difference taken centrally on the interior samples.
/// Returns the per-step residuals (first and last sample excluded).
pub fn vdot_residual(
    trace: &SimTrace,
    p: &Matrix,
    q: &Matrix,
    gamma: &Matrix,
    w_star: &Matrix,
) -> Result<Vec<f64>> {
    require_spd(q, "vdot_residual Q")?;
    let v = lyapunov_series(trace, p, gamma, w_star)?;
    let dt = trace.dt;
    let mut residuals = Vec::with_capacity(v.len().saturating_sub(2));
    for i in 1..v.len().saturating_sub(1) {
        let dv = (v[i + 1] - v[i - 1]) / (2.0 * dt);
        let decay = -q.quadratic_form(&trace.steps[i].e);
        residuals.push(dv - decay);
    }
    Ok(residuals)
}

/// Assembles the full report from the scenario quantities.
#[allow(clippy::too_many_arguments)]
pub fn bound_report(
    p: &Matrix,
    q: &Matrix,
    eps_bar: f64,
    eps_bar_source: EpsBarSource,
    e_norm_reference: f64,
    sample_eps: f64,
    sample_delta: f64,
    k_bits: u64,
    n_weights: u64,
) -> Result<BoundReport> {
    let (lambda_min_p, lambda_max_p) = sym_eig_bounds(p)?;
    let (lambda_min_q, lambda_max_q) = sym_eig_bounds(q)?;
    Ok(BoundReport {
        uub_radius: uub_radius(p, q, eps_bar)?,
        eps_bar,
        eps_bar_source,
        generalization_tolerance: generalization_tolerance(p, q, e_norm_reference)?,
        e_norm_reference,
        sample_complexity: sample_complexity(sample_eps, sample_delta, k_bits, n_weights)?,
        sample_eps,
        sample_delta,
        k_bits,
        n_weights,
        lambda_min_p,
        lambda_max_p,
        lambda_min_q,
        lambda_max_q,
    })
}

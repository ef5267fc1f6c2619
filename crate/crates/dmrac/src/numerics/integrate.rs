//! Fixed-step classical Runge-Kutta integration.

use crate::error::{Error, Result};
use crate::numerics::matrix::axpy;

/// One classical 4th-order Runge-Kutta step for `dx/dt = f(t, x)`.
///
/// Fails with `NonFiniteDerivative` if any stage evaluation produces a
/// non-finite component, which is how divergence surfaces before the
/// state itself overflows.
pub fn rk4_step<F>(f: F, x: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    assert!(dt > 0.0, "rk4_step requires dt > 0");
    let check = |v: Vec<f64>| -> Result<Vec<f64>> {
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Error::NonFiniteDerivative { t })
        }
    };
    let k1 = check(f(t, x))?;
    let k2 = check(f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1)))?;
    let k3 = check(f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2)))?;
    let k4 = check(f(t + dt, &axpy(x, dt, &k3)))?;
    let mut out = x.to_vec();
    for i in 0..out.len() {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

//! Independent reference computations for the self-check suite.
//!
//! Each function here recomputes a quantity along a different algorithmic
//! route than the production code: symmetric eigenvalues by Sturm-sequence
//! bisection instead of Jacobi rotations, linear solves by Gauss-Jordan
//! instead of LU, gradients by central finite differences instead of
//! reverse-mode accumulation. The invariant runner and the test suites
//! compare the two routes against each other.

use crate::deepnet::{batch_loss, DeepFeatureNetwork, TrainBatch};
use crate::numerics::matrix::Matrix;

/// Householder tridiagonalization of a symmetric matrix; returns the
/// diagonal and subdiagonal.
fn tridiagonalize(s: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = s.rows();
    let mut a = s.symmetrized();
    for k in 0..n.saturating_sub(2) {
        let mut x = vec![0.0; n - k - 1];
        for i in (k + 1)..n {
            x[i - k - 1] = a.get(i, k);
        }
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 {
            continue;
        }
        let alpha = if x[0] >= 0.0 { -nx } else { nx };
        let mut v = x;
        v[0] -= alpha;
        let vn2: f64 = v.iter().map(|q| q * q).sum();
        if vn2 == 0.0 {
            continue;
        }
        for j in 0..n {
            let mut dotv = 0.0;
            for i in (k + 1)..n {
                dotv += v[i - k - 1] * a.get(i, j);
            }
            let f = 2.0 * dotv / vn2;
            for i in (k + 1)..n {
                a.set(i, j, a.get(i, j) - f * v[i - k - 1]);
            }
        }
        for i in 0..n {
            let mut dotv = 0.0;
            for j in (k + 1)..n {
                dotv += a.get(i, j) * v[j - k - 1];
            }
            let f = 2.0 * dotv / vn2;
            for j in (k + 1)..n {
                a.set(i, j, a.get(i, j) - f * v[j - k - 1]);
            }
        }
    }
    let d: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let e: Vec<f64> = (1..n).map(|i| a.get(i, i - 1)).collect();
    (d, e)
}

/// Number of eigenvalues strictly below `x`, from the Sturm sequence of
/// the tridiagonal form.
fn count_below(d: &[f64], e: &[f64], x: f64) -> usize {
    let n = d.len();
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        if q == 0.0 {
            q = 1e-300;
        }
        q = (d[i] - x) - e[i - 1] * e[i - 1] / q;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin_bracket(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if n == 1 {
            0.0
        } else if i == 0 {
            e[0].abs()
        } else if i == n - 1 {
            e[n - 2].abs()
        } else {
            e[i - 1].abs() + e[i].abs()
        };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo - 1.0, hi + 1.0)
}

fn bisect_kth(d: &[f64], e: &[f64], target: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin_bracket(d, e);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(d, e, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Extreme eigenvalues of a symmetric matrix by Sturm bisection.
pub fn sturm_extreme_eigenvalues(s: &Matrix) -> (f64, f64) {
    let (d, e) = tridiagonalize(s);
    (bisect_kth(&d, &e, 1), bisect_kth(&d, &e, d.len()))
}

/// Smallest eigenvalue of a symmetric matrix by Sturm bisection.
pub fn sturm_min_eigenvalue(s: &Matrix) -> f64 {
    sturm_extreme_eigenvalues(s).0
}

/// Dense solve of `A x = b` by Gauss-Jordan elimination with partial
/// pivoting; independent of the LU path.
pub fn gauss_jordan_solve(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut aug = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            aug[i][j] = a.get(i, j);
        }
        aug[i][n] = b[i];
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        for j in col..=n {
            aug[col][j] /= d;
        }
        for i in 0..n {
            if i != col && aug[i][col] != 0.0 {
                let f = aug[i][col];
                for j in col..=n {
                    aug[i][j] -= f * aug[col][j];
                }
            }
        }
    }
    (0..n).map(|i| aug[i][n]).collect()
}

/// Solves the vectorized Lyapunov system independently of the production
/// solver: same mathematical system, Gauss-Jordan elimination.
pub fn lyapunov_by_gauss_jordan(a_rm: &Matrix, q: &Matrix) -> Matrix {
    let n = a_rm.rows();
    let nn = n * n;
    let mut big = Matrix::zeros(nn, nn);
    let mut rhs = vec![0.0; nn];
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                let col1 = k * n + j;
                big.set(row, col1, big.get(row, col1) + a_rm.get(k, i));
                let col2 = i * n + k;
                big.set(row, col2, big.get(row, col2) + a_rm.get(k, j));
            }
            rhs[row] = -q.get(i, j);
        }
    }
    Matrix::from_vec(n, n, gauss_jordan_solve(&big, &rhs))
}

/// Central finite-difference derivative of the batch loss with respect to
/// the flat parameter at `idx`.
pub fn fd_loss_gradient(net: &DeepFeatureNetwork, batch: &TrainBatch, idx: usize, h: f64) -> f64 {
    let base = net.param_get(idx);
    let mut plus = net.clone();
    plus.param_set(idx, base + h);
    let mut minus = net.clone();
    minus.param_set(idx, base - h);
    (batch_loss(&plus, batch).unwrap() - batch_loss(&minus, batch).unwrap()) / (2.0 * h)
}

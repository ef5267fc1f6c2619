//! Dense linear algebra: LU solves, symmetric eigenvalues by Jacobi
//! rotations, general eigenvalues by QR iteration on the Hessenberg form,
//! and the continuous-time Lyapunov equation via Kronecker vectorization.
//!
//! All of it targets small dense matrices (n ≲ 12 for system matrices,
//! a few hundred for feature Gram matrices), where the simple algorithms
//! are both fast enough and easy to trust.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Eigenvalue with real and imaginary part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

// ── LU with partial pivoting ────────────────────────────────────────

/// Solve `A x = b` by LU with partial pivoting. `A` is consumed as a copy.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    assert!(a.is_square() && a.rows() == b.len());
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // pivot search
        let mut p = k;
        let mut best = lu.get(k, k).abs();
        for i in (k + 1)..n {
            let v = lu.get(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::EigenNoConvergence);
        }
        if p != k {
            for j in 0..n {
                let tmp = lu.get(k, j);
                lu.set(k, j, lu.get(p, j));
                lu.set(p, j, tmp);
            }
            perm.swap(k, p);
            x.swap(k, p);
        }
        let pivot = lu.get(k, k);
        for i in (k + 1)..n {
            let factor = lu.get(i, k) / pivot;
            lu.set(i, k, factor);
            if factor != 0.0 {
                for j in (k + 1)..n {
                    lu.set(i, j, lu.get(i, j) - factor * lu.get(k, j));
                }
                x[i] -= factor * x[k];
            }
        }
    }
    // back substitution
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= lu.get(i, j) * x[j];
        }
        x[i] = acc / lu.get(i, i);
    }
    Ok(x)
}

// ── symmetric eigenvalues: cyclic Jacobi ────────────────────────────

const JACOBI_MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a.get(i, j) * a.get(i, j);
            }
        }
    }
    acc.sqrt()
}

/// All eigenvalues of a symmetric matrix, ascending. Cyclic Jacobi sweeps
/// until the off-diagonal norm drops below `1e-12 * max(1, ||S||_F)`.
pub fn sym_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    if !s.is_square() {
        return Err(Error::NotSymmetric {
            context: "sym_eigenvalues",
        });
    }
    let n = s.rows();
    let scale = s.frobenius_norm().max(1.0);
    if !s.is_symmetric(1e-10 * scale) {
        return Err(Error::NotSymmetric {
            context: "sym_eigenvalues",
        });
    }
    let mut a = s.symmetrized();
    let tol = 1e-12 * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
            eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return Ok(eig);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol / (n * n) as f64 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_rot = t * c;

                // rotate rows/columns p and q
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s_rot * akq);
                    a.set(k, q, s_rot * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s_rot * aqk);
                    a.set(q, k, s_rot * apk + c * aqk);
                }
            }
        }
    }
    Err(Error::EigenNoConvergence)
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn sym_eig_bounds(s: &Matrix) -> Result<(f64, f64)> {
    let eig = sym_eigenvalues(s)?;
    Ok((eig[0], *eig.last().unwrap()))
}

// ── general eigenvalues: Hessenberg + double-shift QR ───────────────

/// Householder similarity reduction to upper Hessenberg form.
fn hessenberg(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        // build the Householder vector annihilating h[k+2.., k]
        let mut x = vec![0.0; n - k - 1];
        for i in (k + 1)..n {
            x[i - k - 1] = h.get(i, k);
        }
        let alpha = {
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if x[0] >= 0.0 {
                -nx
            } else {
                nx
            }
        };
        if alpha == 0.0 {
            continue;
        }
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|q| q * q).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // H ← P H P with P = I - 2vvᵀ/vᵀv acting on rows/cols k+1..n
        // rows
        for j in 0..n {
            let mut dot = 0.0;
            for i in (k + 1)..n {
                dot += v[i - k - 1] * h.get(i, j);
            }
            let f = 2.0 * dot / vnorm2;
            for i in (k + 1)..n {
                h.set(i, j, h.get(i, j) - f * v[i - k - 1]);
            }
        }
        // columns
        for i in 0..n {
            let mut dot = 0.0;
            for j in (k + 1)..n {
                dot += h.get(i, j) * v[j - k - 1];
            }
            let f = 2.0 * dot / vnorm2;
            for j in (k + 1)..n {
                h.set(i, j, h.get(i, j) - f * v[j - k - 1]);
            }
        }
        // enforce exact zeros below the subdiagonal in column k
        for i in (k + 2)..n {
            h.set(i, k, 0.0);
        }
    }
    h
}

/// Eigenvalues of a 2x2 block.
fn eig2x2(a: f64, b: f64, c: f64, d: f64) -> [Eigenvalue; 2] {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        [
            Eigenvalue {
                re: 0.5 * tr + sq,
                im: 0.0,
            },
            Eigenvalue {
                re: 0.5 * tr - sq,
                im: 0.0,
            },
        ]
    } else {
        let sq = (-disc).sqrt();
        [
            Eigenvalue {
                re: 0.5 * tr,
                im: sq,
            },
            Eigenvalue {
                re: 0.5 * tr,
                im: -sq,
            },
        ]
    }
}

/// Householder QR, returning Q explicitly. Used by the explicit
/// double-shift iteration below on the (small) active block.
fn qr_q(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut r = m.clone();
    let mut q = Matrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let mut v = vec![0.0; n - k];
        for i in k..n {
            v[i - k] = r.get(i, k);
        }
        let nx: f64 = v.iter().map(|q| q * q).sum::<f64>().sqrt();
        if nx == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -nx } else { nx };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|q| q * q).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // apply P = I - 2vvᵀ/vᵀv to R (left) and accumulate into Q (right)
        for j in 0..n {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * r.get(i, j);
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                r.set(i, j, r.get(i, j) - f * v[i - k]);
            }
        }
        for i in 0..n {
            let mut dot = 0.0;
            for j in k..n {
                dot += q.get(i, j) * v[j - k];
            }
            let f = 2.0 * dot / vnorm2;
            for j in k..n {
                q.set(i, j, q.get(i, j) - f * v[j - k]);
            }
        }
    }
    q
}

const QR_MAX_ITERS_PER_EIG: usize = 60;

/// All eigenvalues of a general real square matrix.
///
/// QR iteration on the Hessenberg form with explicit Francis double
/// shifts: per step the shift polynomial `H² - s H + p I` of the active
/// block is formed and its Q applied as a similarity. At desk scale the
/// extra multiplications are irrelevant and the explicit form is easy to
/// audit.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Eigenvalue>> {
    assert!(a.is_square(), "eigenvalues of a square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut h = hessenberg(a);
    let mut eig = Vec::with_capacity(n);
    let mut hi = n; // active block is h[lo..hi, lo..hi]
    let mut iters = 0usize;
    let max_iters = QR_MAX_ITERS_PER_EIG * n;
    let hnorm = h.frobenius_norm().max(1.0);

    while hi > 0 {
        if hi == 1 {
            eig.push(Eigenvalue {
                re: h.get(0, 0),
                im: 0.0,
            });
            hi = 0;
            continue;
        }
        // zero-out negligible subdiagonals
        for i in 1..hi {
            let s = h.get(i - 1, i - 1).abs() + h.get(i, i).abs();
            let s = if s == 0.0 { hnorm } else { s };
            if h.get(i, i - 1).abs() <= f64::EPSILON * s {
                h.set(i, i - 1, 0.0);
            }
        }
        // deflate trailing 1x1
        if h.get(hi - 1, hi - 2) == 0.0 {
            eig.push(Eigenvalue {
                re: h.get(hi - 1, hi - 1),
                im: 0.0,
            });
            hi -= 1;
            continue;
        }
        // deflate trailing 2x2
        if hi == 2 || h.get(hi - 2, hi - 3) == 0.0 {
            let e2 = eig2x2(
                h.get(hi - 2, hi - 2),
                h.get(hi - 2, hi - 1),
                h.get(hi - 1, hi - 2),
                h.get(hi - 1, hi - 1),
            );
            eig.extend_from_slice(&e2);
            hi -= 2;
            continue;
        }
        if iters >= max_iters {
            return Err(Error::EigenNoConvergence);
        }
        iters += 1;

        // find the start of the active block
        let mut lo = hi - 1;
        while lo > 0 && h.get(lo, lo - 1) != 0.0 {
            lo -= 1;
        }
        let b = hi - lo;

        // Francis shifts from the trailing 2x2 of the active block;
        // occasionally replace with an exceptional shift to break cycles.
        let (mut s_sum, mut s_prod) = {
            let a11 = h.get(hi - 2, hi - 2);
            let a12 = h.get(hi - 2, hi - 1);
            let a21 = h.get(hi - 1, hi - 2);
            let a22 = h.get(hi - 1, hi - 1);
            (a11 + a22, a11 * a22 - a12 * a21)
        };
        if iters % 16 == 0 {
            let w = h.get(hi - 1, hi - 2).abs() + h.get(hi - 2, hi - 3).abs();
            s_sum = 1.5 * w;
            s_prod = -0.4375 * w * w;
        }

        // active block copy
        let mut blk = Matrix::zeros(b, b);
        for i in 0..b {
            for j in 0..b {
                blk.set(i, j, h.get(lo + i, lo + j));
            }
        }
        // shift polynomial M = B² - s B + p I
        let b2 = blk.matmul(&blk);
        let mut m = b2;
        m.add_scaled(-s_sum, &blk);
        for i in 0..b {
            m.set(i, i, m.get(i, i) + s_prod);
        }
        let q = qr_q(&m);
        // similarity B ← Qᵀ B Q
        let new_blk = q.transpose().matmul(&blk).matmul(&q);
        for i in 0..b {
            for j in 0..b {
                h.set(lo + i, lo + j, new_blk.get(i, j));
            }
        }
        // restore Hessenberg structure of the block (roundoff cleanup is
        // handled by the negligibility test; structural zeros re-imposed)
        for i in 0..b {
            for j in 0..b {
                if i > j + 1 {
                    h.set(lo + i, lo + j, 0.0);
                }
            }
        }
    }
    Ok(eig)
}

/// Largest eigenvalue real part of a general square matrix.
pub fn max_real_part(a: &Matrix) -> Result<f64> {
    let eig = eigenvalues(a)?;
    Ok(eig.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.re)))
}

/// Hurwitz tolerance: all eigenvalue real parts must sit strictly left of
/// this margin.
pub const HURWITZ_MARGIN: f64 = -1e-9;

/// True when every eigenvalue real part is below `HURWITZ_MARGIN`.
pub fn is_hurwitz(a: &Matrix) -> Result<bool> {
    Ok(max_real_part(a)? < HURWITZ_MARGIN)
}

fn check_hurwitz(a: &Matrix) -> Result<()> {
    let max_re = max_real_part(a)?;
    if max_re < HURWITZ_MARGIN {
        Ok(())
    } else {
        Err(Error::NotHurwitz { max_re })
    }
}

// ── Lyapunov equation ───────────────────────────────────────────────

fn check_spd(m: &Matrix, context: &'static str) -> Result<()> {
    let scale = m.frobenius_norm().max(1.0);
    if !m.is_square() || !m.is_symmetric(1e-10 * scale) {
        return Err(Error::NotSymmetric { context });
    }
    let (lo, _) = sym_eig_bounds(m)?;
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            context,
            min_eig: lo,
        });
    }
    Ok(())
}

/// Positive definite solution `P` of `A_rmᵀ P + P A_rm + Q = 0`.
///
/// The equation is vectorized over the n² unknowns of `P` and solved by
/// dense LU; the result is symmetrized to kill roundoff asymmetry.
pub fn solve_lyapunov(a_rm: &Matrix, q: &Matrix) -> Result<Matrix> {
    assert!(a_rm.is_square());
    let n = a_rm.rows();
    assert_eq!(q.rows(), n);
    check_spd(q, "lyapunov right-hand side Q")?;
    check_hurwitz(a_rm)?;

    // Unknown p_{kj} at flat index k*n + j. Equation (i,j):
    //   sum_k A_{ki} p_{kj} + sum_k p_{ik} A_{kj} = -q_{ij}
    let nn = n * n;
    let mut big = Matrix::zeros(nn, nn);
    let mut rhs = vec![0.0; nn];
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                let c1 = a_rm.get(k, i);
                if c1 != 0.0 {
                    let col = k * n + j;
                    big.set(row, col, big.get(row, col) + c1);
                }
                let c2 = a_rm.get(k, j);
                if c2 != 0.0 {
                    let col = i * n + k;
                    big.set(row, col, big.get(row, col) + c2);
                }
            }
            rhs[row] = -q.get(i, j);
        }
    }
    let p_flat = solve_linear(&big, &rhs)?;
    let p = Matrix::from_vec(n, n, p_flat).symmetrized();
    Ok(p)
}

/// Verify the SPD preconditions used across the adaptive-law gain set.
pub fn require_spd(m: &Matrix, context: &'static str) -> Result<()> {
    check_spd(m, context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngState;

    fn random_matrix(rng: &mut RngState, n: usize, scale: f64) -> Matrix {
        let data: Vec<f64> = (0..n * n).map(|_| rng.uniform_range(-scale, scale)).collect();
        Matrix::from_vec(n, n, data)
    }

    fn random_spd(rng: &mut RngState, n: usize) -> Matrix {
        let m = random_matrix(rng, n, 1.0);
        let mut g = m.transpose().matmul(&m);
        for i in 0..n {
            g.set(i, i, g.get(i, i) + 0.5);
        }
        g
    }

    /// Random orthogonal via QR of a random matrix.
    fn random_orthogonal(rng: &mut RngState, n: usize) -> Matrix {
        qr_q(&random_matrix(rng, n, 1.0))
    }

    #[test]
    fn solve_linear_recovers_known_solution() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x_true = [1.0, -2.0];
        let b = a.mul_vec(&x_true);
        let x = solve_linear(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_scalar_case() {
        // -2P + Q = 0 with Q = 2 gives P = 1
        let a = Matrix::from_rows(&[vec![-1.0]]);
        let q = Matrix::from_rows(&[vec![2.0]]);
        let p = solve_lyapunov(&a, &q).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_decoupled_diagonal_case() {
        let a = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -2.0]]);
        let q = Matrix::identity(2);
        let p = solve_lyapunov(&a, &q).unwrap();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-14);
        assert!((p.get(1, 1) - 0.25).abs() < 1e-14);
        assert!(p.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_rejects_non_hurwitz() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let q = Matrix::identity(2);
        assert!(matches!(
            solve_lyapunov(&a, &q),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn lyapunov_rejects_asymmetric_q() {
        let a = Matrix::from_rows(&[vec![-1.0]]);
        let q = Matrix::from_rows(&[vec![-2.0]]);
        assert!(matches!(
            solve_lyapunov(&a, &q),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let a2 = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]);
        let q2 = Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.5, 1.0]]);
        assert!(matches!(
            solve_lyapunov(&a2, &q2),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn lyapunov_matches_independent_gauss_jordan_oracle() {
        let mut rng = RngState::new(7);
        for _ in 0..10 {
            let n = 4;
            // stable by construction: random orthogonal similarity of a
            // negative-diagonal matrix
            let q_orth = random_orthogonal(&mut rng, n);
            let mut d = Matrix::zeros(n, n);
            for i in 0..n {
                d.set(i, i, rng.uniform_range(-3.0, -0.3));
            }
            let a_rm = q_orth.transpose().matmul(&d).matmul(&q_orth);
            let q = random_spd(&mut rng, n);
            let p = solve_lyapunov(&a_rm, &q).unwrap();

            let p_oracle = crate::oracles::lyapunov_by_gauss_jordan(&a_rm, &q);
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        (p.get(i, j) - p_oracle.get(i, j)).abs() <= 1e-9,
                        "oracle mismatch at ({i},{j})"
                    );
                }
            }
            // residual certificate
            let mut resid = a_rm.transpose().matmul(&p).add(&p.matmul(&a_rm));
            resid = resid.add(&q);
            assert!(resid.frobenius_norm() <= 1e-10 * q.frobenius_norm());
        }
    }

    #[test]
    fn sym_eig_identity_and_diagonal() {
        assert_eq!(sym_eig_bounds(&Matrix::identity(2)).unwrap(), (1.0, 1.0));
        let d = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]]);
        assert_eq!(sym_eig_bounds(&d).unwrap(), (1.0, 4.0));
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(
            sym_eig_bounds(&m),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn sym_eig_matches_sturm_bisection_oracle() {
        let mut rng = RngState::new(11);
        for _ in 0..20 {
            let n = 5;
            let m = random_matrix(&mut rng, n, 2.0);
            let s = m.add(&m.transpose()).scale(0.5);
            let (lo, hi) = sym_eig_bounds(&s).unwrap();
            let (olo, ohi) = crate::oracles::sturm_extreme_eigenvalues(&s);
            let scale = hi.abs().max(lo.abs()).max(1.0);
            assert!((lo - olo).abs() <= 1e-9 * scale, "min {lo} vs oracle {olo}");
            assert!((hi - ohi).abs() <= 1e-9 * scale, "max {hi} vs oracle {ohi}");
        }
    }

    #[test]
    fn sym_eig_sandwiches_rayleigh_quotients() {
        let mut rng = RngState::new(13);
        let n = 6;
        let m = random_matrix(&mut rng, n, 1.5);
        let s = m.add(&m.transpose()).scale(0.5);
        let (lo, hi) = sym_eig_bounds(&s).unwrap();
        for _ in 0..100 {
            let v: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let nv = crate::numerics::matrix::norm(&v);
            if nv < 1e-9 {
                continue;
            }
            let u: Vec<f64> = v.iter().map(|x| x / nv).collect();
            let r = s.quadratic_form(&u);
            assert!(r >= lo - 1e-9 && r <= hi + 1e-9);
        }
    }

    #[test]
    fn eigenvalues_of_known_quasi_triangular_similarity() {
        // Eigenvalues fixed by construction: orthogonal similarity of a
        // block-diagonal matrix with one real block and one rotation block.
        let mut rng = RngState::new(17);
        for trial in 0..20 {
            let n = 5;
            let (a_re, b_im) = (rng.uniform_range(-3.0, -0.5), rng.uniform_range(0.2, 2.0));
            let mut d = Matrix::zeros(n, n);
            d.set(0, 0, -1.5);
            d.set(1, 1, 0.75);
            d.set(2, 2, -0.25);
            d.set(3, 3, a_re);
            d.set(3, 4, b_im);
            d.set(4, 3, -b_im);
            d.set(4, 4, a_re);
            let q = random_orthogonal(&mut rng, n);
            let a = q.transpose().matmul(&d).matmul(&q);
            let mut eig = eigenvalues(&a).unwrap();
            eig.sort_by(|x, y| {
                x.re.partial_cmp(&y.re)
                    .unwrap()
                    .then(x.im.partial_cmp(&y.im).unwrap())
            });
            let mut expect = vec![
                Eigenvalue { re: -1.5, im: 0.0 },
                Eigenvalue { re: 0.75, im: 0.0 },
                Eigenvalue { re: -0.25, im: 0.0 },
                Eigenvalue { re: a_re, im: b_im },
                Eigenvalue { re: a_re, im: -b_im },
            ];
            expect.sort_by(|x, y| {
                x.re.partial_cmp(&y.re)
                    .unwrap()
                    .then(x.im.partial_cmp(&y.im).unwrap())
            });
            for (got, want) in eig.iter().zip(&expect) {
                assert!(
                    (got.re - want.re).abs() < 1e-8 && (got.im - want.im).abs() < 1e-8,
                    "trial {trial}: got ({}, {}), want ({}, {})",
                    got.re,
                    got.im,
                    want.re,
                    want.im
                );
            }
        }
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        // companion of (s+1)(s+2)(s+3) = s^3 + 6s^2 + 11s + 6
        let a = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![-6.0, -11.0, -6.0],
        ]);
        let mut re: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|e| e.re).collect();
        re.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((re[0] + 3.0).abs() < 1e-9);
        assert!((re[1] + 2.0).abs() < 1e-9);
        assert!((re[2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn hurwitz_check_on_margin_cases() {
        let stable = Matrix::from_rows(&[vec![0.0, 1.0], vec![-16.0, -4.0]]);
        assert!(is_hurwitz(&stable).unwrap());
        let marginal = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, -4.0]]);
        assert!(!is_hurwitz(&marginal).unwrap());
        let unstable = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.0, -1.0]]);
        assert!(!is_hurwitz(&unstable).unwrap());
    }

    #[test]
    fn lyapunov_solution_positive_definite_on_random_inputs() {
        let mut rng = RngState::new(21);
        for _ in 0..20 {
            let n = 3 + rng.index(3);
            let q_orth = random_orthogonal(&mut rng, n);
            let mut d = Matrix::zeros(n, n);
            for i in 0..n {
                d.set(i, i, rng.uniform_range(-4.0, -0.2));
            }
            let a_rm = q_orth.transpose().matmul(&d).matmul(&q_orth);
            let q = random_spd(&mut rng, n);
            let p = solve_lyapunov(&a_rm, &q).unwrap();
            assert!(p.is_symmetric(0.0), "exact symmetry after symmetrize");
            for _ in 0..100 {
                let x: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                if crate::numerics::matrix::norm(&x) < 1e-9 {
                    continue;
                }
                assert!(p.quadratic_form(&x) > 0.0);
            }
        }
    }
}

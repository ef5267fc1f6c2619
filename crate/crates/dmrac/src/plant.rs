//! Uncertain plant dynamics, the linear reference model, the matching
//! condition that ties them together, and a small library of scalar basis
//! functions used both for test uncertainties and for fixed-basis
//! adaptive baselines.

use crate::error::{Error, Result};
use crate::numerics::linalg;
use crate::numerics::matrix::{add_vec, Matrix};

// ── scalar basis functions ──────────────────────────────────────────

/// One scalar function of the state vector.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisFn {
    /// Constant 1.
    One,
    /// `x_i`.
    Coord(usize),
    /// `x_i^p`.
    Pow { index: usize, exponent: u32 },
    /// `sin(freq * x_i)`.
    Sin { index: usize, freq: f64 },
    /// `cos(freq * x_i)`.
    Cos { index: usize, freq: f64 },
    /// `|x_i| * x_j`, the classic wing-rock cross term.
    AbsCross { abs_index: usize, lin_index: usize },
}

impl BasisFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            BasisFn::One => 1.0,
            BasisFn::Coord(i) => x[i],
            BasisFn::Pow { index, exponent } => x[index].powi(exponent as i32),
            BasisFn::Sin { index, freq } => (freq * x[index]).sin(),
            BasisFn::Cos { index, freq } => (freq * x[index]).cos(),
            BasisFn::AbsCross {
                abs_index,
                lin_index,
            } => x[abs_index].abs() * x[lin_index],
        }
    }

    /// Largest state index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        match *self {
            BasisFn::One => None,
            BasisFn::Coord(i) => Some(i),
            BasisFn::Pow { index, .. } | BasisFn::Sin { index, .. } | BasisFn::Cos { index, .. } => {
                Some(index)
            }
            BasisFn::AbsCross {
                abs_index,
                lin_index,
            } => Some(abs_index.max(lin_index)),
        }
    }
}

/// An ordered list of scalar basis functions; evaluates to the feature
/// vector of a fixed-basis adaptive element.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedBasis {
    pub funcs: Vec<BasisFn>,
}

impl FixedBasis {
    pub fn new(funcs: Vec<BasisFn>) -> Self {
        FixedBasis { funcs }
    }

    pub fn dim(&self) -> usize {
        self.funcs.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.funcs.iter().map(|f| f.eval(x)).collect()
    }

    /// State coordinates `[x_0 .. x_{n-1}]`.
    pub fn state(n: usize) -> Self {
        FixedBasis {
            funcs: (0..n).map(BasisFn::Coord).collect(),
        }
    }
}

/// One additive term of a polynomial/trigonometric uncertainty.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyTrigTerm {
    pub coeff: f64,
    pub f: BasisFn,
}

// ── uncertainty ─────────────────────────────────────────────────────

/// Matched uncertainty Δ(x) entering through the control channel.
#[derive(Clone, Debug, PartialEq)]
pub enum UncertaintySpec {
    /// Δ ≡ 0 with the given output dimension.
    Zero { dim: usize },
    /// Δ(x) = W*ᵀ Φ(x) + offset, with a known ideal weight matrix over a
    /// fixed basis. The constant offset doubles as an injected
    /// disturbance of known norm in structured experiments.
    LinearInBasis {
        w_star: Matrix, // k x m
        basis: FixedBasis,
        offset: Vec<f64>, // length m
    },
    /// Row-wise sums of coefficient-weighted monomials and sinusoids.
    PolyTrig { rows: Vec<Vec<PolyTrigTerm>> },
}

impl UncertaintySpec {
    pub fn output_dim(&self) -> usize {
        match self {
            UncertaintySpec::Zero { dim } => *dim,
            UncertaintySpec::LinearInBasis { w_star, .. } => w_star.cols(),
            UncertaintySpec::PolyTrig { rows } => rows.len(),
        }
    }

    /// Deterministic evaluation of the configured Δ; total on finite inputs.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            UncertaintySpec::Zero { dim } => vec![0.0; *dim],
            UncertaintySpec::LinearInBasis {
                w_star,
                basis,
                offset,
            } => {
                let phi = basis.eval(x);
                add_vec(&w_star.transpose_mul_vec(&phi), offset)
            }
            UncertaintySpec::PolyTrig { rows } => rows
                .iter()
                .map(|terms| terms.iter().map(|t| t.coeff * t.f.eval(x)).sum())
                .collect(),
        }
    }
}

/// Free-function form of [`UncertaintySpec::eval`].
pub fn eval_uncertainty(spec: &UncertaintySpec, x: &[f64]) -> Vec<f64> {
    spec.eval(x)
}

// ── plant and reference model ───────────────────────────────────────

/// The uncertain system `dx/dt = A x + B (u + Δ(x))`.
#[derive(Clone, Debug)]
pub struct PlantModel {
    pub a: Matrix, // n x n
    pub b: Matrix, // n x m
    pub delta: UncertaintySpec,
}

impl PlantModel {
    pub fn new(a: Matrix, b: Matrix, delta: UncertaintySpec) -> Result<Self> {
        if !a.is_square() || a.rows() != b.rows() {
            return Err(Error::DimensionMismatch {
                context: "plant model",
                expected: format!("A n x n and B n x m with n = {}", a.rows()),
                got: format!("A {}x{}, B {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
            });
        }
        if delta.output_dim() != b.cols() {
            return Err(Error::DimensionMismatch {
                context: "plant uncertainty",
                expected: format!("output dimension {}", b.cols()),
                got: format!("{}", delta.output_dim()),
            });
        }
        Ok(PlantModel { a, b, delta })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }
}

/// The designer-chosen stable linear target dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceModel {
    pub a_rm: Matrix, // n x n
    pub b_rm: Matrix, // n x r
}

impl ReferenceModel {
    /// Constructs and enforces the Hurwitz invariant.
    pub fn new(a_rm: Matrix, b_rm: Matrix) -> Result<Self> {
        if !a_rm.is_square() || a_rm.rows() != b_rm.rows() {
            return Err(Error::DimensionMismatch {
                context: "reference model",
                expected: format!("A_rm n x n and B_rm n x r with n = {}", a_rm.rows()),
                got: format!(
                    "A_rm {}x{}, B_rm {}x{}",
                    a_rm.rows(),
                    a_rm.cols(),
                    b_rm.rows(),
                    b_rm.cols()
                ),
            });
        }
        let max_re = linalg::max_real_part(&a_rm)?;
        if max_re >= linalg::HURWITZ_MARGIN {
            return Err(Error::NotHurwitz { max_re });
        }
        Ok(ReferenceModel { a_rm, b_rm })
    }

    pub fn state_dim(&self) -> usize {
        self.a_rm.rows()
    }

    pub fn command_dim(&self) -> usize {
        self.b_rm.cols()
    }
}

/// `dx/dt = A x + B (u + Δ(x))`.
pub fn plant_derivative(plant: &PlantModel, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (plant.state_dim(), plant.input_dim());
    if x.len() != n || u.len() != m {
        return Err(Error::DimensionMismatch {
            context: "plant_derivative",
            expected: format!("x len {n}, u len {m}"),
            got: format!("x len {}, u len {}", x.len(), u.len()),
        });
    }
    let delta = plant.delta.eval(x);
    let forced = add_vec(u, &delta);
    Ok(add_vec(&plant.a.mul_vec(x), &plant.b.mul_vec(&forced)))
}

/// `dx_rm/dt = A_rm x_rm + B_rm r`.
pub fn reference_derivative(refmodel: &ReferenceModel, x_rm: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    if x_rm.len() != refmodel.state_dim() || r.len() != refmodel.command_dim() {
        return Err(Error::DimensionMismatch {
            context: "reference_derivative",
            expected: format!(
                "x_rm len {}, r len {}",
                refmodel.state_dim(),
                refmodel.command_dim()
            ),
            got: format!("x_rm len {}, r len {}", x_rm.len(), r.len()),
        });
    }
    Ok(add_vec(
        &refmodel.a_rm.mul_vec(x_rm),
        &refmodel.b_rm.mul_vec(r),
    ))
}

/// Builds the matched reference model `A_rm = A - B K`, `B_rm = B K_r`,
/// failing when the result is not Hurwitz.
pub fn build_matched_pair(a: &Matrix, b: &Matrix, k: &Matrix, k_r: &Matrix) -> Result<ReferenceModel> {
    let n = a.rows();
    let m = b.cols();
    if k.rows() != m || k.cols() != n || k_r.rows() != m {
        return Err(Error::DimensionMismatch {
            context: "build_matched_pair",
            expected: format!("K {m}x{n}, K_r {m}x r"),
            got: format!("K {}x{}, K_r {}x{}", k.rows(), k.cols(), k_r.rows(), k_r.cols()),
        });
    }
    let a_rm = a.sub(&b.matmul(k));
    let b_rm = b.matmul(k_r);
    ReferenceModel::new(a_rm, b_rm)
}

/// Controllability of (A, B): rank of `[B, AB, ..., A^{n-1}B]` equals n,
/// decided through the Gram spectrum of the controllability matrix.
pub fn is_controllable(a: &Matrix, b: &Matrix) -> Result<bool> {
    let n = a.rows();
    let m = b.cols();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n * m);
    let mut block = b.clone();
    for _ in 0..n {
        for j in 0..m {
            cols.push((0..n).map(|i| block.get(i, j)).collect());
        }
        block = a.matmul(&block);
    }
    // Gram matrix of the stacked columns
    let mut gram = Matrix::zeros(n, n);
    for c in &cols {
        for i in 0..n {
            for j in 0..n {
                gram.set(i, j, gram.get(i, j) + c[i] * c[j]);
            }
        }
    }
    let eig = linalg::sym_eigenvalues(&gram)?;
    let top = eig.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(false);
    }
    let rank = eig.iter().filter(|&&l| l > 1e-10 * top).count();
    Ok(rank == n)
}

// ── reference signals ───────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    Step,
    Sinusoid,
    Square,
    CircularPair,
    TwoSine,
}

/// Bounded, piecewise continuous command `r(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSignal {
    pub kind: SignalKind,
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    pub phase: f64,
    // second component, used by the two-sine kind only
    pub amplitude2: f64,
    pub frequency2: f64,
    pub phase2: f64,
}

impl ReferenceSignal {
    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64) -> Self {
        ReferenceSignal {
            kind: SignalKind::Sinusoid,
            amplitude,
            frequency,
            phase,
            amplitude2: 0.0,
            frequency2: 0.0,
            phase2: 0.0,
        }
    }

    pub fn two_sine(a1: f64, w1: f64, p1: f64, a2: f64, w2: f64, p2: f64) -> Self {
        ReferenceSignal {
            kind: SignalKind::TwoSine,
            amplitude: a1,
            frequency: w1,
            phase: p1,
            amplitude2: a2,
            frequency2: w2,
            phase2: p2,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SignalKind::CircularPair => 2,
            _ => 1,
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        match self.kind {
            SignalKind::Step => {
                // phase doubles as the step instant
                vec![if t >= self.phase { self.amplitude } else { 0.0 }]
            }
            SignalKind::Sinusoid => vec![self.amplitude * (self.frequency * t + self.phase).sin()],
            SignalKind::Square => {
                let s = (self.frequency * t + self.phase).sin();
                vec![if s >= 0.0 { self.amplitude } else { -self.amplitude }]
            }
            SignalKind::CircularPair => vec![
                self.amplitude * (self.frequency * t + self.phase).cos(),
                self.amplitude * (self.frequency * t + self.phase).sin(),
            ],
            SignalKind::TwoSine => vec![
                self.amplitude * (self.frequency * t + self.phase).sin()
                    + self.amplitude2 * (self.frequency2 * t + self.phase2).sin(),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngState;

    fn double_integrator() -> (Matrix, Matrix) {
        (
            Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]),
            Matrix::from_rows(&[vec![0.0], vec![1.0]]),
        )
    }

    #[test]
    fn pure_control_feedthrough() {
        let a = Matrix::zeros(1, 1);
        let b = Matrix::identity(1);
        let plant = PlantModel::new(a, b, UncertaintySpec::Zero { dim: 1 }).unwrap();
        assert_eq!(plant_derivative(&plant, &[1.0], &[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn hand_evaluated_derivative_with_linear_uncertainty() {
        let (a, b) = double_integrator();
        let delta = UncertaintySpec::PolyTrig {
            rows: vec![vec![PolyTrigTerm {
                coeff: 0.5,
                f: BasisFn::Coord(0),
            }]],
        };
        let plant = PlantModel::new(a, b, delta).unwrap();
        // A x = [0, 0]; B (u + 0.5*x0) = [0, 1]
        assert_eq!(
            plant_derivative(&plant, &[2.0, 0.0], &[0.0]).unwrap(),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn zero_uncertainty_matches_matrix_multiply_oracle() {
        let mut rng = RngState::new(3);
        for _ in 0..20 {
            let n = 3;
            let m = 2;
            let a = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.uniform_range(-2.0, 2.0)).collect());
            let b = Matrix::from_vec(n, m, (0..n * m).map(|_| rng.uniform_range(-2.0, 2.0)).collect());
            let plant =
                PlantModel::new(a.clone(), b.clone(), UncertaintySpec::Zero { dim: m }).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let u: Vec<f64> = (0..m).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let got = plant_derivative(&plant, &x, &u).unwrap();
            // oracle: explicit loops, no Matrix helpers
            let mut want = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    want[i] += a.get(i, j) * x[j];
                }
                for j in 0..m {
                    want[i] += b.get(i, j) * u[j];
                }
            }
            for i in 0..n {
                assert!((got[i] - want[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_equilibrium_and_hand_case() {
        let a_rm = Matrix::from_rows(&[vec![0.0, 1.0], vec![-16.0, -4.0]]);
        let b_rm = Matrix::from_rows(&[vec![0.0], vec![16.0]]);
        let rm = ReferenceModel::new(a_rm, b_rm).unwrap();
        assert_eq!(
            reference_derivative(&rm, &[0.0, 0.0], &[0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        // -16*1 + 16*1 = 0 in the second component
        assert_eq!(
            reference_derivative(&rm, &[1.0, 0.0], &[1.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn matched_pair_from_second_order_design() {
        // natural frequency 4 rad/s, damping 0.5: K = [16, 4], K_r = [16]
        let (a, b) = double_integrator();
        let k = Matrix::from_rows(&[vec![16.0, 4.0]]);
        let k_r = Matrix::from_rows(&[vec![16.0]]);
        let rm = build_matched_pair(&a, &b, &k, &k_r).unwrap();
        assert_eq!(
            rm.a_rm,
            Matrix::from_rows(&[vec![0.0, 1.0], vec![-16.0, -4.0]])
        );
        assert_eq!(rm.b_rm, Matrix::from_rows(&[vec![0.0], vec![16.0]]));
    }

    #[test]
    fn matched_pair_zero_feedback_keeps_hurwitz_a() {
        let a = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -2.0]]);
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]);
        let k = Matrix::zeros(1, 2);
        let k_r = Matrix::identity(1);
        let rm = build_matched_pair(&a, &b, &k, &k_r).unwrap();
        assert_eq!(rm.a_rm, a);
    }

    #[test]
    fn matched_pair_rejects_marginal_eigenvalue() {
        // A - BK keeps an eigenvalue at 0
        let (a, b) = double_integrator();
        let k = Matrix::from_rows(&[vec![0.0, 4.0]]);
        let k_r = Matrix::from_rows(&[vec![1.0]]);
        assert!(matches!(
            build_matched_pair(&a, &b, &k, &k_r),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn matched_pair_identity_is_bitwise() {
        let (a, b) = double_integrator();
        let k = Matrix::from_rows(&[vec![16.0, 4.0]]);
        let k_r = Matrix::from_rows(&[vec![16.0]]);
        let rm = build_matched_pair(&a, &b, &k, &k_r).unwrap();
        let resid = a.sub(&b.matmul(&k)).sub(&rm.a_rm);
        assert!(resid.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uncertainty_zero_and_hand_cases() {
        let zero = UncertaintySpec::Zero { dim: 1 };
        assert_eq!(zero.eval(&[1.0, -3.0]), vec![0.0]);

        let lin = UncertaintySpec::LinearInBasis {
            w_star: Matrix::from_rows(&[vec![1.0], vec![-2.0]]),
            basis: FixedBasis::state(2),
            offset: vec![0.0],
        };
        assert_eq!(lin.eval(&[3.0, 1.0]), vec![1.0]);

        let pt = UncertaintySpec::PolyTrig {
            rows: vec![vec![
                PolyTrigTerm {
                    coeff: 0.2,
                    f: BasisFn::One,
                },
                PolyTrigTerm {
                    coeff: 0.1,
                    f: BasisFn::Coord(0),
                },
                PolyTrigTerm {
                    coeff: 0.5,
                    f: BasisFn::Sin { index: 0, freq: 1.0 },
                },
            ]],
        };
        assert_eq!(pt.eval(&[0.0, 7.0]), vec![0.2]);
    }

    #[test]
    fn uncertainty_evaluation_is_bitwise_deterministic() {
        let pt = UncertaintySpec::PolyTrig {
            rows: vec![vec![
                PolyTrigTerm {
                    coeff: 0.31,
                    f: BasisFn::Sin { index: 1, freq: 2.3 },
                },
                PolyTrigTerm {
                    coeff: -1.7,
                    f: BasisFn::AbsCross {
                        abs_index: 0,
                        lin_index: 1,
                    },
                },
            ]],
        };
        let x = [0.123456, -0.98765];
        let a = pt.eval(&x);
        let b = pt.eval(&x);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn controllability_detects_rank_deficiency() {
        let (a, b) = double_integrator();
        assert!(is_controllable(&a, &b).unwrap());
        // B in the left null space direction of reachability
        let b_bad = Matrix::from_rows(&[vec![1.0], vec![0.0]]);
        let a_diag = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -2.0]]);
        assert!(!is_controllable(&a_diag, &b_bad).unwrap());
    }

    #[test]
    fn signals_are_bounded_and_shaped() {
        let s = ReferenceSignal::two_sine(1.0, 0.8, 0.0, 0.5, 2.0, 0.4);
        for i in 0..200 {
            let t = i as f64 * 0.31;
            let v = s.eval(t);
            assert_eq!(v.len(), 1);
            assert!(v[0].abs() <= 1.5 + 1e-12);
        }
        let c = ReferenceSignal {
            kind: SignalKind::CircularPair,
            amplitude: 2.0,
            frequency: 1.0,
            phase: 0.0,
            amplitude2: 0.0,
            frequency2: 0.0,
            phase2: 0.0,
        };
        let v = c.eval(0.0);
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], 2.0);
    }
}

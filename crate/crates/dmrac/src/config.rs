//! Scenario configuration: a flat, sectioned key-value text format, its
//! parser and canonical serializer, the shipped built-in scenarios, and
//! resolution into runnable episode setups.
//!
//! A file may start from a built-in with `scenario = <name>` and override
//! individual keys; unknown keys are rejected. Floats serialize with 17
//! significant digits so a serialize/parse round trip is bit-exact.

use crate::adaptive::GainSet;
use crate::deepnet::DeepFeatureNetwork;
use crate::error::{Error, Result};
use crate::numerics::linalg::{require_spd, solve_lyapunov};
use crate::numerics::matrix::Matrix;
use crate::numerics::rng::RngState;
use crate::plant::{
    build_matched_pair, is_controllable, BasisFn, FixedBasis, PlantModel, PolyTrigTerm,
    ReferenceModel, ReferenceSignal, SignalKind, UncertaintySpec,
};
use crate::sim::{DmracConfig, EpisodeSetup, Mode};

pub const BUILTIN_NAMES: [&str; 3] = ["desk-attitude", "structured", "retention"];

/// Which reference signal a run follows; retention-style scenarios carry a
/// training task and a shifted evaluation task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Train,
    Eval,
}

/// Fully resolved, validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub base: String,
    // plant
    pub a: Matrix,
    pub b: Matrix,
    pub x0: Vec<f64>,
    pub x_rm0: Vec<f64>,
    pub domain: Vec<f64>,
    // gains
    pub k_fb: Matrix,
    pub k_r: Matrix,
    pub q: Matrix,
    pub gamma_scale: f64,
    pub w_bound: f64,
    pub eps_proj: f64,
    // uncertainty
    pub delta: UncertaintySpec,
    // signals
    pub signal: ReferenceSignal,
    pub eval_signal: Option<ReferenceSignal>,
    // network
    pub hidden: Vec<usize>,
    // episode knobs
    pub sim: DmracConfig,
    // fixed basis for the classic baseline mode
    pub baseline_basis: FixedBasis,
    // bound inputs
    pub eps_bar: Option<f64>,
    pub bound_eps: f64,
    pub bound_delta: f64,
    pub k_bits: u64,
    pub n_weights_override: Option<u64>,
    // default output paths
    pub trace_path: Option<String>,
    pub summary_path: Option<String>,
}

impl ScenarioConfig {
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn plant(&self) -> Result<PlantModel> {
        PlantModel::new(self.a.clone(), self.b.clone(), self.delta.clone())
    }

    pub fn refmodel(&self) -> Result<ReferenceModel> {
        build_matched_pair(&self.a, &self.b, &self.k_fb, &self.k_r)
    }

    /// Gain set with the adaptation rate sized for `feature_dim`.
    pub fn gains(&self, feature_dim: usize) -> Result<GainSet> {
        let refmodel = self.refmodel()?;
        let p = solve_lyapunov(&refmodel.a_rm, &self.q)?;
        Ok(GainSet {
            k: self.k_fb.clone(),
            k_r: self.k_r.clone(),
            gamma: Matrix::scaled_identity(feature_dim, self.gamma_scale),
            p,
            q: self.q.clone(),
        })
    }

    /// Network dimension list including the input width.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.state_dim()];
        dims.extend_from_slice(&self.hidden);
        dims
    }

    pub fn build_network(&self, rng: &mut RngState) -> DeepFeatureNetwork {
        DeepFeatureNetwork::new_seeded(&self.layer_dims(), self.input_dim(), rng)
    }

    /// Tunable parameter count for the sample-complexity bound, unless
    /// overridden.
    pub fn n_weights(&self) -> u64 {
        self.n_weights_override.unwrap_or_else(|| {
            DeepFeatureNetwork::zeroed(&self.layer_dims(), self.input_dim()).param_count() as u64
        })
    }

    pub fn setup(&self, task: Task) -> Result<EpisodeSetup> {
        let signal = match task {
            Task::Train => self.signal.clone(),
            Task::Eval => self
                .eval_signal
                .clone()
                .ok_or_else(|| Error::Validation("scenario has no eval_signal".into()))?,
        };
        Ok(EpisodeSetup {
            config: self.sim.clone(),
            plant: self.plant()?,
            refmodel: self.refmodel()?,
            signal,
            x0: self.x0.clone(),
            x_rm0: self.x_rm0.clone(),
            domain: self.domain.clone(),
            w_bound: self.w_bound,
            eps_proj: self.eps_proj,
        })
    }
}

// ── built-in scenarios ──────────────────────────────────────────────

fn second_order_feedback(a: &Matrix, omega_n: f64, zeta: f64) -> (Matrix, Matrix) {
    // companion-form 2-state plant: pole placement at the standard
    // second-order characteristic polynomial, unity dc gain
    let k1 = a.get(1, 0) + omega_n * omega_n;
    let k2 = a.get(1, 1) + 2.0 * zeta * omega_n;
    (
        Matrix::from_rows(&[vec![k1, k2]]),
        Matrix::from_rows(&[vec![omega_n * omega_n]]),
    )
}

fn desk_attitude() -> ScenarioConfig {
    let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
    let b = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
    let (k_fb, k_r) = second_order_feedback(&a, 4.0, 0.5);
    ScenarioConfig {
        base: "desk-attitude".into(),
        a,
        b,
        x0: vec![0.0, 0.0],
        x_rm0: vec![0.0, 0.0],
        domain: vec![5.0, 5.0],
        k_fb,
        k_r,
        q: Matrix::scaled_identity(2, 50.0),
        gamma_scale: 0.5,
        w_bound: 100.0,
        eps_proj: 0.1,
        delta: UncertaintySpec::PolyTrig {
            rows: vec![vec![
                PolyTrigTerm {
                    coeff: 5.0,
                    f: BasisFn::One,
                },
                PolyTrigTerm {
                    coeff: 3.0,
                    f: BasisFn::Sin { index: 0, freq: 1.0 },
                },
                PolyTrigTerm {
                    coeff: 1.5,
                    f: BasisFn::Coord(1),
                },
                PolyTrigTerm {
                    coeff: -1.0,
                    f: BasisFn::AbsCross {
                        abs_index: 0,
                        lin_index: 1,
                    },
                },
            ]],
        },
        signal: ReferenceSignal::two_sine(1.0, 0.8, 0.0, 0.5, 2.0, 0.3),
        eval_signal: None,
        hidden: vec![20, 10],
        sim: DmracConfig {
            dt: 0.05,
            t_final: 150.0,
            eta: 0.01,
            zeta_tol: 0.2,
            p_max: 250,
            minibatch: 8,
            train_every: 400,
            epochs_per_round: 400,
            noise_variance: 0.01,
            mode: Mode::DmracAdaptive,
            seed: 42,
            parallel_trainer: false,
        },
        // classic adaptation over raw state features; misses the constant
        // and nonlinear parts of the shipped uncertainty
        baseline_basis: FixedBasis::new(vec![BasisFn::Coord(0), BasisFn::Coord(1)]),
        eps_bar: None,
        bound_eps: 0.1,
        bound_delta: 0.05,
        k_bits: 8,
        n_weights_override: None,
        trace_path: None,
        summary_path: None,
    }
}

fn structured() -> ScenarioConfig {
    let mut cfg = desk_attitude();
    cfg.base = "structured".into();
    let basis = FixedBasis::new(vec![BasisFn::Sin { index: 0, freq: 1.0 }, BasisFn::Coord(1)]);
    cfg.delta = UncertaintySpec::LinearInBasis {
        w_star: Matrix::from_rows(&[vec![0.4], vec![0.2]]),
        basis: basis.clone(),
        offset: vec![0.0],
    };
    cfg.baseline_basis = basis;
    cfg.q = Matrix::scaled_identity(2, 20.0);
    cfg.gamma_scale = 10.0;
    cfg.w_bound = 50.0;
    cfg.signal = ReferenceSignal::two_sine(0.5, 0.7, 0.0, 0.25, 1.9, 0.5);
    cfg.sim = DmracConfig {
        dt: 0.005,
        t_final: 40.0,
        eta: 0.01,
        zeta_tol: 0.2,
        p_max: 250,
        minibatch: 8,
        train_every: 0,
        epochs_per_round: 0,
        noise_variance: 0.0,
        mode: Mode::MracFixedBasis,
        seed: 17,
        parallel_trainer: false,
    };
    cfg
}

fn retention() -> ScenarioConfig {
    let mut cfg = desk_attitude();
    cfg.base = "retention".into();
    cfg.eval_signal = Some(ReferenceSignal::two_sine(1.0, 0.8, 1.0, 0.5, 2.0, 1.3));
    cfg
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "desk-attitude" => Some(desk_attitude()),
        "structured" => Some(structured()),
        "retention" => Some(retention()),
        _ => None,
    }
}

// ── parsing ─────────────────────────────────────────────────────────

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| perr(line, format!("expected a number, got '{}'", s.trim())))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| perr(line, format!("expected a nonnegative integer, got '{}'", s.trim())))
}

fn parse_u64(s: &str, line: usize) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| perr(line, format!("expected a nonnegative integer, got '{}'", s.trim())))
}

fn parse_bool(s: &str, line: usize) -> Result<bool> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(perr(line, format!("expected true or false, got '{other}'"))),
    }
}

fn parse_vector(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace().map(|t| parse_f64(t, line)).collect()
}

/// Rows separated by `;`, entries by whitespace.
fn parse_matrix(s: &str, line: usize) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| parse_vector(r, line))
        .collect::<Result<_>>()?;
    if rows.is_empty() || rows[0].is_empty() {
        return Err(perr(line, "empty matrix"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(perr(line, "ragged matrix rows"));
    }
    Ok(Matrix::from_rows(&rows))
}

/// Square matrix shorthand: a single scalar `c` means `c * I` (dimension
/// resolved against the plant).
enum SquareSpec {
    Scale(f64),
    Full(Matrix),
}

fn parse_square(s: &str, line: usize) -> Result<SquareSpec> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    if toks.len() == 1 && !s.contains(';') {
        return Ok(SquareSpec::Scale(parse_f64(toks[0], line)?));
    }
    Ok(SquareSpec::Full(parse_matrix(s, line)?))
}

/// One basis factor: `1`, `x0`, `x0^3`, `sin(x0)`, `sin(2.5 x0)`,
/// `cos(...)`, `abs(x0) x1`.
fn parse_basis_fn(s: &str, line: usize) -> Result<BasisFn> {
    let s = s.trim();
    let coord = |t: &str| -> Option<usize> {
        t.strip_prefix('x').and_then(|d| d.parse::<usize>().ok())
    };
    if s == "1" {
        return Ok(BasisFn::One);
    }
    if let Some(rest) = s.strip_prefix("abs(") {
        let (inside, tail) = rest
            .split_once(')')
            .ok_or_else(|| perr(line, "unterminated abs("))?;
        let abs_index = coord(inside.trim())
            .ok_or_else(|| perr(line, format!("bad state '{inside}' in abs")))?;
        let lin_index = coord(tail.trim()).ok_or_else(|| {
            perr(line, format!("abs(x_i) must be followed by a state, got '{tail}'"))
        })?;
        return Ok(BasisFn::AbsCross {
            abs_index,
            lin_index,
        });
    }
    for (name, is_sin) in [("sin(", true), ("cos(", false)] {
        if let Some(rest) = s.strip_prefix(name) {
            let inside = rest
                .strip_suffix(')')
                .ok_or_else(|| perr(line, format!("unterminated {name}")))?;
            let toks: Vec<&str> = inside.split_whitespace().collect();
            let (freq, var) = match toks.len() {
                1 => (1.0, toks[0]),
                2 => (parse_f64(toks[0], line)?, toks[1]),
                _ => return Err(perr(line, format!("bad argument '{inside}'"))),
            };
            let index =
                coord(var).ok_or_else(|| perr(line, format!("bad state '{var}' in {name})")))?;
            return Ok(if is_sin {
                BasisFn::Sin { index, freq }
            } else {
                BasisFn::Cos { index, freq }
            });
        }
    }
    if let Some((base, exp)) = s.split_once('^') {
        let index = coord(base.trim()).ok_or_else(|| perr(line, format!("bad state '{base}'")))?;
        let exponent = exp
            .trim()
            .parse::<u32>()
            .map_err(|_| perr(line, format!("bad exponent '{exp}'")))?;
        return Ok(BasisFn::Pow { index, exponent });
    }
    if let Some(index) = coord(s) {
        return Ok(BasisFn::Coord(index));
    }
    Err(perr(line, format!("unrecognized basis function '{s}'")))
}

/// Comma-separated basis list.
fn parse_basis(s: &str, line: usize) -> Result<FixedBasis> {
    let funcs: Vec<BasisFn> = s
        .split(',')
        .map(|t| parse_basis_fn(t, line))
        .collect::<Result<_>>()?;
    if funcs.is_empty() {
        return Err(perr(line, "empty basis"));
    }
    Ok(FixedBasis::new(funcs))
}

/// `+`-separated terms, each a coefficient optionally followed by one
/// basis factor, e.g. `5 + 3 sin(x0) + 1.5 x1 + -1 abs(x0) x1`.
fn parse_terms(s: &str, line: usize) -> Result<Vec<PolyTrigTerm>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    let cleaned = s.replace('*', " ");
    cleaned
        .split('+')
        .map(|term| {
            let term = term.trim();
            let (coeff_tok, rest) = match term.split_once(char::is_whitespace) {
                Some((c, r)) => (c, r.trim()),
                None => (term, ""),
            };
            let coeff = parse_f64(coeff_tok, line)?;
            let f = if rest.is_empty() {
                BasisFn::One
            } else {
                parse_basis_fn(rest, line)?
            };
            Ok(PolyTrigTerm { coeff, f })
        })
        .collect()
}

fn parse_signal_kind(s: &str, line: usize) -> Result<SignalKind> {
    match s.trim() {
        "step" => Ok(SignalKind::Step),
        "sinusoid" => Ok(SignalKind::Sinusoid),
        "square" => Ok(SignalKind::Square),
        "circular-pair" => Ok(SignalKind::CircularPair),
        "two-sine" => Ok(SignalKind::TwoSine),
        other => Err(perr(line, format!("unknown signal kind '{other}'"))),
    }
}

#[derive(Default)]
struct UncertaintyDraft {
    kind: Option<String>,
    rows: Vec<(usize, usize, String)>, // (row index, line, text)
    w_star: Option<Matrix>,
    basis: Option<FixedBasis>,
    offset: Option<Vec<f64>>,
}

impl UncertaintyDraft {
    fn touched(&self) -> bool {
        self.kind.is_some()
            || !self.rows.is_empty()
            || self.w_star.is_some()
            || self.basis.is_some()
            || self.offset.is_some()
    }
}

#[derive(Default)]
struct GainDraft {
    omega_n: Option<f64>,
    zeta: Option<f64>,
}

/// Parses a scenario document into a fully resolved configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut base_delta = desk_attitude().delta;
    let mut cfg = desk_attitude();
    let mut section = String::new();
    let mut unc = UncertaintyDraft::default();
    let mut gd = GainDraft::default();
    let mut x_rm0_set = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw.trim(),
        };
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| perr(line, "unterminated section header"))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| perr(line, "expected 'key = value'"))?;
        let key = key.trim();
        let value = value.trim();

        if section.is_empty() {
            match key {
                "scenario" => {
                    let b = builtin(value).ok_or_else(|| {
                        perr(line, format!("unknown built-in scenario '{value}'"))
                    })?;
                    base_delta = b.delta.clone();
                    cfg = b;
                    unc = UncertaintyDraft::default();
                    gd = GainDraft::default();
                    x_rm0_set = false;
                }
                other => return Err(perr(line, format!("unknown top-level key '{other}'"))),
            }
            continue;
        }

        match (section.as_str(), key) {
            ("plant", "a") => cfg.a = parse_matrix(value, line)?,
            ("plant", "b") => cfg.b = parse_matrix(value, line)?,
            ("plant", "x0") => cfg.x0 = parse_vector(value, line)?,
            ("plant", "x_rm0") => {
                cfg.x_rm0 = parse_vector(value, line)?;
                x_rm0_set = true;
            }
            ("plant", "domain") => cfg.domain = parse_vector(value, line)?,

            ("gains", "k") => cfg.k_fb = parse_matrix(value, line)?,
            ("gains", "k_r") => cfg.k_r = parse_matrix(value, line)?,
            ("gains", "omega_n") => gd.omega_n = Some(parse_f64(value, line)?),
            ("gains", "zeta") => gd.zeta = Some(parse_f64(value, line)?),
            ("gains", "q") => {
                cfg.q = match parse_square(value, line)? {
                    SquareSpec::Scale(c) => Matrix::scaled_identity(cfg.a.rows(), c),
                    SquareSpec::Full(m) => m,
                }
            }
            ("gains", "gamma") => cfg.gamma_scale = parse_f64(value, line)?,
            ("gains", "w_bound") => cfg.w_bound = parse_f64(value, line)?,
            ("gains", "eps_proj") => cfg.eps_proj = parse_f64(value, line)?,

            ("uncertainty", "kind") => unc.kind = Some(value.to_string()),
            ("uncertainty", "w_star") => unc.w_star = Some(parse_matrix(value, line)?),
            ("uncertainty", "basis") => unc.basis = Some(parse_basis(value, line)?),
            ("uncertainty", "offset") => unc.offset = Some(parse_vector(value, line)?),
            ("uncertainty", k) if k.starts_with("row") => {
                let row = k[3..]
                    .parse::<usize>()
                    .map_err(|_| perr(line, format!("bad uncertainty row key '{k}'")))?;
                unc.rows.push((row, line, value.to_string()));
            }

            ("signal", _) | ("eval_signal", _) => {
                let is_eval = section == "eval_signal";
                if is_eval && cfg.eval_signal.is_none() {
                    cfg.eval_signal =
                        Some(ReferenceSignal::two_sine(0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
                }
                let sig = if is_eval {
                    cfg.eval_signal.as_mut().unwrap()
                } else {
                    &mut cfg.signal
                };
                match key {
                    "kind" => sig.kind = parse_signal_kind(value, line)?,
                    "amplitude" => sig.amplitude = parse_f64(value, line)?,
                    "frequency" => sig.frequency = parse_f64(value, line)?,
                    "phase" => sig.phase = parse_f64(value, line)?,
                    "amplitude2" => sig.amplitude2 = parse_f64(value, line)?,
                    "frequency2" => sig.frequency2 = parse_f64(value, line)?,
                    "phase2" => sig.phase2 = parse_f64(value, line)?,
                    other => {
                        return Err(perr(line, format!("unknown key '{other}' in [{section}]")))
                    }
                }
            }

            ("network", "hidden") => {
                cfg.hidden = value
                    .split_whitespace()
                    .map(|t| parse_usize(t, line))
                    .collect::<Result<_>>()?
            }

            ("dmrac", "dt") => cfg.sim.dt = parse_f64(value, line)?,
            ("dmrac", "t_final") => cfg.sim.t_final = parse_f64(value, line)?,
            ("dmrac", "eta") => cfg.sim.eta = parse_f64(value, line)?,
            ("dmrac", "zeta_tol") => cfg.sim.zeta_tol = parse_f64(value, line)?,
            ("dmrac", "p_max") => cfg.sim.p_max = parse_usize(value, line)?,
            ("dmrac", "minibatch") => cfg.sim.minibatch = parse_usize(value, line)?,
            ("dmrac", "train_every") => cfg.sim.train_every = parse_usize(value, line)?,
            ("dmrac", "epochs_per_round") => {
                cfg.sim.epochs_per_round = parse_usize(value, line)?
            }
            ("dmrac", "noise_variance") => cfg.sim.noise_variance = parse_f64(value, line)?,
            ("dmrac", "mode") => {
                cfg.sim.mode = Mode::parse(value)
                    .ok_or_else(|| perr(line, format!("unknown mode '{value}'")))?
            }
            ("dmrac", "seed") => cfg.sim.seed = parse_u64(value, line)?,
            ("dmrac", "parallel_trainer") => cfg.sim.parallel_trainer = parse_bool(value, line)?,

            ("baseline", "basis") => cfg.baseline_basis = parse_basis(value, line)?,

            ("bounds", "eps_bar") => cfg.eps_bar = Some(parse_f64(value, line)?),
            ("bounds", "eps") => cfg.bound_eps = parse_f64(value, line)?,
            ("bounds", "delta") => cfg.bound_delta = parse_f64(value, line)?,
            ("bounds", "k_bits") => cfg.k_bits = parse_u64(value, line)?,
            ("bounds", "n_weights") => cfg.n_weights_override = Some(parse_u64(value, line)?),

            ("output", "trace") => cfg.trace_path = Some(value.to_string()),
            ("output", "summary") => cfg.summary_path = Some(value.to_string()),

            (sec, k) => return Err(perr(line, format!("unknown key '{k}' in section [{sec}]"))),
        }
    }

    // second-order shorthand overrides explicit gains
    if gd.omega_n.is_some() || gd.zeta.is_some() {
        let omega_n = gd
            .omega_n
            .ok_or_else(|| Error::Validation("zeta given without omega_n".into()))?;
        let zeta = gd
            .zeta
            .ok_or_else(|| Error::Validation("omega_n given without zeta".into()))?;
        let companion = cfg.a.rows() == 2
            && cfg.b.rows() == 2
            && cfg.b.cols() == 1
            && cfg.a.get(0, 0) == 0.0
            && cfg.a.get(0, 1) == 1.0
            && cfg.b.get(0, 0) == 0.0
            && cfg.b.get(1, 0) == 1.0;
        if !companion {
            return Err(Error::Validation(
                "omega_n/zeta shorthand requires the companion-form 2-state single-input plant"
                    .into(),
            ));
        }
        if omega_n <= 0.0 || zeta <= 0.0 {
            return Err(Error::Validation("omega_n and zeta must be positive".into()));
        }
        let (k_fb, k_r) = second_order_feedback(&cfg.a, omega_n, zeta);
        cfg.k_fb = k_fb;
        cfg.k_r = k_r;
    }

    // rebuild the uncertainty if any key touched it
    if unc.touched() {
        let kind = match &unc.kind {
            Some(k) => k.clone(),
            None => match &base_delta {
                UncertaintySpec::Zero { .. } => "zero".into(),
                UncertaintySpec::LinearInBasis { .. } => "linear-basis".into(),
                UncertaintySpec::PolyTrig { .. } => "poly-trig".into(),
            },
        };
        cfg.delta = match kind.as_str() {
            "zero" => UncertaintySpec::Zero { dim: cfg.b.cols() },
            "linear-basis" => {
                let (fw, fb2, fo) = match &base_delta {
                    UncertaintySpec::LinearInBasis {
                        w_star,
                        basis,
                        offset,
                    } => (
                        Some(w_star.clone()),
                        Some(basis.clone()),
                        Some(offset.clone()),
                    ),
                    _ => (None, None, None),
                };
                let w_star = unc.w_star.or(fw).ok_or_else(|| {
                    Error::Validation("linear-basis uncertainty needs w_star".into())
                })?;
                let basis = unc.basis.or(fb2).ok_or_else(|| {
                    Error::Validation("linear-basis uncertainty needs basis".into())
                })?;
                let offset = unc
                    .offset
                    .or(fo)
                    .unwrap_or_else(|| vec![0.0; w_star.cols()]);
                UncertaintySpec::LinearInBasis {
                    w_star,
                    basis,
                    offset,
                }
            }
            "poly-trig" => {
                let mut rows: Vec<Vec<PolyTrigTerm>> = match (&unc.kind, &base_delta) {
                    // same-kind override keeps the base rows
                    (_, UncertaintySpec::PolyTrig { rows }) if unc.kind.is_none() => rows.clone(),
                    _ => vec![Vec::new(); cfg.b.cols()],
                };
                if rows.len() != cfg.b.cols() {
                    rows = vec![Vec::new(); cfg.b.cols()];
                }
                for (row, line, text) in &unc.rows {
                    if *row >= rows.len() {
                        return Err(perr(
                            *line,
                            format!(
                                "uncertainty row {row} out of range for {} inputs",
                                rows.len()
                            ),
                        ));
                    }
                    rows[*row] = parse_terms(text, *line)?;
                }
                UncertaintySpec::PolyTrig { rows }
            }
            other => {
                return Err(Error::Validation(format!(
                    "unknown uncertainty kind '{other}'"
                )))
            }
        };
    }

    if !x_rm0_set && cfg.x_rm0.len() != cfg.x0.len() {
        cfg.x_rm0 = cfg.x0.clone();
    }

    validate(&cfg)?;
    Ok(cfg)
}

/// Named-constraint validation of a resolved configuration.
pub fn validate(cfg: &ScenarioConfig) -> Result<()> {
    let n = cfg.a.rows();
    let m = cfg.b.cols();
    let fail = |msg: &str| Err(Error::Validation(msg.into()));

    if !cfg.a.is_square() || cfg.b.rows() != n {
        return fail("plant matrices must be A n x n and B n x m");
    }
    if cfg.x0.len() != n {
        return fail("x0 length must match the state dimension");
    }
    if cfg.x_rm0.len() != n {
        return fail("x_rm0 length must match the state dimension");
    }
    if cfg.domain.len() != n || cfg.domain.iter().any(|d| *d <= 0.0) {
        return fail("domain needs one positive half-width per state");
    }
    if !is_controllable(&cfg.a, &cfg.b)? {
        return fail("plant (A,B) must be controllable");
    }
    if cfg.k_fb.rows() != m || cfg.k_fb.cols() != n {
        return fail("K must be m x n");
    }
    if cfg.k_r.rows() != m {
        return fail("K_r must have m rows");
    }
    build_matched_pair(&cfg.a, &cfg.b, &cfg.k_fb, &cfg.k_r).map_err(|e| match e {
        Error::NotHurwitz { max_re } => Error::Validation(format!(
            "A - B K must be Hurwitz (max eigenvalue real part {max_re:.3e})"
        )),
        other => other,
    })?;
    require_spd(&cfg.q, "gain Q")
        .map_err(|_| Error::Validation("Q must be symmetric positive definite".into()))?;
    if cfg.q.rows() != n {
        return fail("Q must be n x n");
    }
    if cfg.gamma_scale <= 0.0 {
        return fail("gamma must be positive");
    }
    if cfg.w_bound <= 0.0 {
        return fail("w_bound must be positive");
    }
    if cfg.eps_proj <= 0.0 {
        return fail("eps_proj must be positive");
    }
    if cfg.delta.output_dim() != m {
        return fail("uncertainty output dimension must match the input dimension");
    }
    let check_basis = |basis: &FixedBasis, what: &str| -> Result<()> {
        for f in &basis.funcs {
            if let Some(i) = f.max_index() {
                if i >= n {
                    return Err(Error::Validation(format!(
                        "{what} references state x{i} outside the {n}-state plant"
                    )));
                }
            }
        }
        Ok(())
    };
    match &cfg.delta {
        UncertaintySpec::LinearInBasis {
            w_star,
            basis,
            offset,
        } => {
            check_basis(basis, "uncertainty basis")?;
            if w_star.rows() != basis.dim() {
                return fail("w_star must have one row per basis function");
            }
            if offset.len() != m {
                return fail("uncertainty offset length must match the input dimension");
            }
        }
        UncertaintySpec::PolyTrig { rows } => {
            for terms in rows {
                for t in terms {
                    if let Some(i) = t.f.max_index() {
                        if i >= n {
                            return fail("uncertainty term references a state outside the plant");
                        }
                    }
                }
            }
        }
        UncertaintySpec::Zero { .. } => {}
    }
    check_basis(&cfg.baseline_basis, "baseline basis")?;
    let r = cfg.k_r.cols();
    if cfg.signal.dim() != r {
        return fail("reference signal dimension must match K_r columns");
    }
    if let Some(sig) = &cfg.eval_signal {
        if sig.dim() != r {
            return fail("eval signal dimension must match K_r columns");
        }
    }
    if cfg.sim.dt <= 0.0 {
        return fail("dt must be positive");
    }
    if cfg.sim.t_final < cfg.sim.dt {
        return fail("t_final must be at least dt");
    }
    if cfg.sim.eta <= 0.0 {
        return fail("eta must be positive");
    }
    if cfg.sim.zeta_tol <= 0.0 {
        return fail("zeta_tol must be positive");
    }
    if cfg.sim.p_max < 1 {
        return fail("p_max must be at least 1");
    }
    if cfg.sim.train_every > 0 {
        if cfg.sim.minibatch < 1 {
            return fail("minibatch must be at least 1");
        }
        if cfg.sim.minibatch > cfg.sim.p_max {
            return fail("minibatch cannot exceed p_max");
        }
        if cfg.sim.epochs_per_round < 1 {
            return fail("epochs_per_round must be at least 1 when training is scheduled");
        }
    }
    if cfg.sim.noise_variance < 0.0 {
        return fail("noise_variance must be nonnegative");
    }
    if cfg.bound_eps <= 0.0 {
        return fail("bounds eps must be positive");
    }
    if cfg.bound_delta <= 0.0 || cfg.bound_delta > 2.0 {
        return fail("bounds delta must lie in (0, 2]");
    }
    if let Some(eb) = cfg.eps_bar {
        if eb < 0.0 {
            return fail("eps_bar must be nonnegative");
        }
    }
    Ok(())
}

// ── serialization ───────────────────────────────────────────────────

/// 17 significant digits: enough to reproduce any finite f64 exactly.
fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

fn fmt_vector(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

fn fmt_matrix(m: &Matrix) -> String {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| fmt_f64(m.get(i, j)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn fmt_basis_fn(f: &BasisFn) -> String {
    match f {
        BasisFn::One => "1".into(),
        BasisFn::Coord(i) => format!("x{i}"),
        BasisFn::Pow { index, exponent } => format!("x{index}^{exponent}"),
        BasisFn::Sin { index, freq } => format!("sin({} x{index})", fmt_f64(*freq)),
        BasisFn::Cos { index, freq } => format!("cos({} x{index})", fmt_f64(*freq)),
        BasisFn::AbsCross {
            abs_index,
            lin_index,
        } => format!("abs(x{abs_index}) x{lin_index}"),
    }
}

fn fmt_basis(b: &FixedBasis) -> String {
    b.funcs.iter().map(fmt_basis_fn).collect::<Vec<_>>().join(", ")
}

fn fmt_terms(terms: &[PolyTrigTerm]) -> String {
    terms
        .iter()
        .map(|t| match t.f {
            BasisFn::One => fmt_f64(t.coeff),
            _ => format!("{} {}", fmt_f64(t.coeff), fmt_basis_fn(&t.f)),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn fmt_signal(out: &mut String, section: &str, sig: &ReferenceSignal) {
    let kind = match sig.kind {
        SignalKind::Step => "step",
        SignalKind::Sinusoid => "sinusoid",
        SignalKind::Square => "square",
        SignalKind::CircularPair => "circular-pair",
        SignalKind::TwoSine => "two-sine",
    };
    out.push_str(&format!("[{section}]\nkind = {kind}\n"));
    out.push_str(&format!("amplitude = {}\n", fmt_f64(sig.amplitude)));
    out.push_str(&format!("frequency = {}\n", fmt_f64(sig.frequency)));
    out.push_str(&format!("phase = {}\n", fmt_f64(sig.phase)));
    out.push_str(&format!("amplitude2 = {}\n", fmt_f64(sig.amplitude2)));
    out.push_str(&format!("frequency2 = {}\n", fmt_f64(sig.frequency2)));
    out.push_str(&format!("phase2 = {}\n", fmt_f64(sig.phase2)));
}

/// Canonical text rendering; `parse_config(serialize_config(c)) == c`.
pub fn serialize_config(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenario = {}\n\n", cfg.base));
    out.push_str("[plant]\n");
    out.push_str(&format!("a = {}\n", fmt_matrix(&cfg.a)));
    out.push_str(&format!("b = {}\n", fmt_matrix(&cfg.b)));
    out.push_str(&format!("x0 = {}\n", fmt_vector(&cfg.x0)));
    out.push_str(&format!("x_rm0 = {}\n", fmt_vector(&cfg.x_rm0)));
    out.push_str(&format!("domain = {}\n", fmt_vector(&cfg.domain)));

    out.push_str("\n[gains]\n");
    out.push_str(&format!("k = {}\n", fmt_matrix(&cfg.k_fb)));
    out.push_str(&format!("k_r = {}\n", fmt_matrix(&cfg.k_r)));
    out.push_str(&format!("q = {}\n", fmt_matrix(&cfg.q)));
    out.push_str(&format!("gamma = {}\n", fmt_f64(cfg.gamma_scale)));
    out.push_str(&format!("w_bound = {}\n", fmt_f64(cfg.w_bound)));
    out.push_str(&format!("eps_proj = {}\n", fmt_f64(cfg.eps_proj)));

    out.push_str("\n[uncertainty]\n");
    match &cfg.delta {
        UncertaintySpec::Zero { .. } => out.push_str("kind = zero\n"),
        UncertaintySpec::LinearInBasis {
            w_star,
            basis,
            offset,
        } => {
            out.push_str("kind = linear-basis\n");
            out.push_str(&format!("basis = {}\n", fmt_basis(basis)));
            out.push_str(&format!("w_star = {}\n", fmt_matrix(w_star)));
            out.push_str(&format!("offset = {}\n", fmt_vector(offset)));
        }
        UncertaintySpec::PolyTrig { rows } => {
            out.push_str("kind = poly-trig\n");
            for (i, terms) in rows.iter().enumerate() {
                out.push_str(&format!("row{i} = {}\n", fmt_terms(terms)));
            }
        }
    }

    out.push('\n');
    fmt_signal(&mut out, "signal", &cfg.signal);
    if let Some(sig) = &cfg.eval_signal {
        out.push('\n');
        fmt_signal(&mut out, "eval_signal", sig);
    }

    out.push_str("\n[network]\n");
    out.push_str(&format!(
        "hidden = {}\n",
        cfg.hidden
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    ));

    out.push_str("\n[dmrac]\n");
    out.push_str(&format!("dt = {}\n", fmt_f64(cfg.sim.dt)));
    out.push_str(&format!("t_final = {}\n", fmt_f64(cfg.sim.t_final)));
    out.push_str(&format!("eta = {}\n", fmt_f64(cfg.sim.eta)));
    out.push_str(&format!("zeta_tol = {}\n", fmt_f64(cfg.sim.zeta_tol)));
    out.push_str(&format!("p_max = {}\n", cfg.sim.p_max));
    out.push_str(&format!("minibatch = {}\n", cfg.sim.minibatch));
    out.push_str(&format!("train_every = {}\n", cfg.sim.train_every));
    out.push_str(&format!("epochs_per_round = {}\n", cfg.sim.epochs_per_round));
    out.push_str(&format!(
        "noise_variance = {}\n",
        fmt_f64(cfg.sim.noise_variance)
    ));
    out.push_str(&format!("mode = {}\n", cfg.sim.mode.as_str()));
    out.push_str(&format!("seed = {}\n", cfg.sim.seed));
    out.push_str(&format!("parallel_trainer = {}\n", cfg.sim.parallel_trainer));

    out.push_str("\n[baseline]\n");
    out.push_str(&format!("basis = {}\n", fmt_basis(&cfg.baseline_basis)));

    out.push_str("\n[bounds]\n");
    if let Some(eb) = cfg.eps_bar {
        out.push_str(&format!("eps_bar = {}\n", fmt_f64(eb)));
    }
    out.push_str(&format!("eps = {}\n", fmt_f64(cfg.bound_eps)));
    out.push_str(&format!("delta = {}\n", fmt_f64(cfg.bound_delta)));
    out.push_str(&format!("k_bits = {}\n", cfg.k_bits));
    if let Some(nw) = cfg.n_weights_override {
        out.push_str(&format!("n_weights = {nw}\n"));
    }

    if cfg.trace_path.is_some() || cfg.summary_path.is_some() {
        out.push_str("\n[output]\n");
        if let Some(p) = &cfg.trace_path {
            out.push_str(&format!("trace = {p}\n"));
        }
        if let Some(p) = &cfg.summary_path {
            out.push_str(&format!("summary = {p}\n"));
        }
    }
    out
}

/// Loads a scenario by built-in name or file path.
pub fn load_scenario(name_or_path: &str) -> Result<ScenarioConfig> {
    if let Some(cfg) = builtin(name_or_path) {
        return Ok(cfg);
    }
    let text = std::fs::read_to_string(name_or_path)
        .map_err(|e| Error::Validation(format!("cannot read scenario '{name_or_path}': {e}")))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            let cfg = builtin(name).unwrap();
            validate(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn minimal_config_resolves_to_builtin() {
        let cfg = parse_config("scenario = desk-attitude\n").unwrap();
        assert_eq!(cfg, builtin("desk-attitude").unwrap());
        // defaults carry the reported hyperparameters
        assert_eq!(cfg.sim.dt, 0.05);
        assert_eq!(cfg.sim.t_final, 150.0);
        assert_eq!(cfg.sim.eta, 0.01);
        assert_eq!(cfg.sim.zeta_tol, 0.2);
        assert_eq!(cfg.sim.p_max, 250);
        assert_eq!(cfg.gamma_scale, 0.5);
        assert_eq!(cfg.sim.noise_variance, 0.01);
    }

    #[test]
    fn negative_zeta_tol_is_rejected_by_name() {
        let err = parse_config("scenario = desk-attitude\n[dmrac]\nzeta_tol = -1\n").unwrap_err();
        match err {
            Error::Validation(msg) => assert_eq!(msg, "zeta_tol must be positive"),
            other => panic!("wrong error {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = parse_config("scenario = desk-attitude\n[dmrac]\nbogus = 1\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            other => panic!("wrong error {other}"),
        }
    }

    #[test]
    fn roundtrip_is_exact_for_all_builtins() {
        for name in BUILTIN_NAMES {
            let cfg = builtin(name).unwrap();
            let text = serialize_config(&cfg);
            let back = parse_config(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(back, cfg, "round trip for {name}");
            // and a second generation is stable too
            assert_eq!(serialize_config(&back), text);
        }
    }

    #[test]
    fn overrides_apply_on_top_of_base() {
        let cfg = parse_config(
            "scenario = structured\n[uncertainty]\noffset = 0.1\n[bounds]\neps_bar = 0.1\n",
        )
        .unwrap();
        match &cfg.delta {
            UncertaintySpec::LinearInBasis { offset, w_star, .. } => {
                assert_eq!(offset, &vec![0.1]);
                assert_eq!(w_star.rows(), 2);
            }
            other => panic!("wrong uncertainty {other:?}"),
        }
        assert_eq!(cfg.eps_bar, Some(0.1));
        // untouched keys keep the base values
        assert_eq!(cfg.sim.dt, 0.005);
        assert_eq!(cfg.sim.mode, Mode::MracFixedBasis);
    }

    #[test]
    fn omega_n_shorthand_builds_gains() {
        let cfg =
            parse_config("scenario = desk-attitude\n[gains]\nomega_n = 4\nzeta = 0.5\n").unwrap();
        assert_eq!(cfg.k_fb, Matrix::from_rows(&[vec![16.0, 4.0]]));
        assert_eq!(cfg.k_r, Matrix::from_rows(&[vec![16.0]]));
    }

    #[test]
    fn poly_trig_expression_parsing() {
        let cfg = parse_config(
            "scenario = desk-attitude\n[uncertainty]\nkind = poly-trig\nrow0 = 0.2 + 0.1 x0 + 0.5 sin(x0) + 2 x1^3 + -1 abs(x0) x1 + 0.3 cos(2.5 x1)\n",
        )
        .unwrap();
        let rows = match &cfg.delta {
            UncertaintySpec::PolyTrig { rows } => rows,
            _ => unreachable!(),
        };
        assert_eq!(rows[0].len(), 6);
        assert_eq!(rows[0][0].f, BasisFn::One);
        assert_eq!(rows[0][3].f, BasisFn::Pow { index: 1, exponent: 3 });
        assert_eq!(
            rows[0][4].f,
            BasisFn::AbsCross {
                abs_index: 0,
                lin_index: 1
            }
        );
        assert_eq!(rows[0][5].f, BasisFn::Cos { index: 1, freq: 2.5 });
        // 0.2 + 0.3*cos(0) at the origin
        assert!((cfg.delta.eval(&[0.0, 0.0])[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_hurwitz_gains_are_rejected() {
        let err = parse_config("scenario = desk-attitude\n[gains]\nk = 0 4\n").unwrap_err();
        match err {
            Error::Validation(msg) => assert!(msg.contains("Hurwitz"), "{msg}"),
            other => panic!("wrong error {other}"),
        }
    }

    #[test]
    fn retention_has_a_shifted_eval_task() {
        let cfg = builtin("retention").unwrap();
        let train = cfg.setup(Task::Train).unwrap();
        let eval = cfg.setup(Task::Eval).unwrap();
        assert_ne!(train.signal, eval.signal);
        assert!(builtin("desk-attitude").unwrap().setup(Task::Eval).is_err());
    }

    #[test]
    fn scenario_file_loading_errors() {
        assert!(matches!(
            load_scenario("/nonexistent/path.cfg"),
            Err(Error::Validation(_))
        ));
        assert!(builtin("nope").is_none());
    }
}

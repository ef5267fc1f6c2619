//! Closed-loop orchestration: the dual time-scale episode runner, its
//! trace record, and the episode summary statistics.
//!
//! One unified loop drives every mode. Per control step it reads the
//! command, forms the adaptive term from the current feature snapshot,
//! applies the total control law, advances plant and reference model by
//! RK4 with optional per-step state noise, Euler-steps the outer weights,
//! qualifies the new sample for the replay buffer, and on schedule
//! retrains the feature network from buffered data before atomically
//! swapping it into the loop.

use std::sync::mpsc;
use std::thread;

use crate::adaptive::{
    adaptive_term, outer_step, total_control, tracking_error, GainSet, OuterWeights,
};
use crate::buffer::{sample_minibatch, try_insert, BufferEntry, ReplayBuffer};
use crate::deepnet::{batch_loss, sgd_step, swap_features, DeepFeatureNetwork};
use crate::error::{Error, Result};
use crate::numerics::integrate::rk4_step;
use crate::numerics::matrix::{axpy, norm, Matrix};
use crate::numerics::rng::RngState;
use crate::plant::{
    plant_derivative, reference_derivative, FixedBasis, PlantModel, ReferenceModel,
    ReferenceSignal,
};

// ── configuration ───────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    DmracAdaptive,
    DmracFrozen,
    MracFixedBasis,
    NoAdaptation,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::DmracAdaptive => "dmrac-adaptive",
            Mode::DmracFrozen => "dmrac-frozen",
            Mode::MracFixedBasis => "mrac-fixed-basis",
            Mode::NoAdaptation => "no-adaptation",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "dmrac-adaptive" => Some(Mode::DmracAdaptive),
            "dmrac-frozen" => Some(Mode::DmracFrozen),
            "mrac-fixed-basis" => Some(Mode::MracFixedBasis),
            "no-adaptation" => Some(Mode::NoAdaptation),
            _ => None,
        }
    }
}

/// Episode-level knobs. `train_every = 0` disables feature training.
#[derive(Clone, Debug, PartialEq)]
pub struct DmracConfig {
    pub dt: f64,
    pub t_final: f64,
    pub eta: f64,
    pub zeta_tol: f64,
    pub p_max: usize,
    pub minibatch: usize,
    pub train_every: usize,
    pub epochs_per_round: usize,
    pub noise_variance: f64,
    pub mode: Mode,
    pub seed: u64,
    pub parallel_trainer: bool,
}

/// Everything the loop needs besides the gains and the feature source.
#[derive(Clone, Debug)]
pub struct EpisodeSetup {
    pub config: DmracConfig,
    pub plant: PlantModel,
    pub refmodel: ReferenceModel,
    pub signal: ReferenceSignal,
    pub x0: Vec<f64>,
    pub x_rm0: Vec<f64>,
    /// Operating-domain box half-widths; the run aborts when the state
    /// leaves the 10x inflated box.
    pub domain: Vec<f64>,
    pub w_bound: f64,
    pub eps_proj: f64,
}

/// Feature generator for the adaptive baselines.
#[derive(Clone, Debug)]
pub enum BaselineBasis {
    Fixed(FixedBasis),
    /// Classic adaptation over the frozen features of a network.
    NetworkFeatures(DeepFeatureNetwork),
}

// ── trace ───────────────────────────────────────────────────────────

/// Per-step record. The full outer-weight matrix and projection flag are
/// kept in memory for the stability monitors; the CSV schema carries the
/// scalar diagnostics only.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub t: f64,
    pub x: Vec<f64>,
    pub x_rm: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub nu_ad: Vec<f64>,
    pub delta_true: Vec<f64>,
    pub delta_gen: Vec<f64>,
    pub w_fro: f64,
    pub buf_size: usize,
    pub train_loss: f64,
    pub train_rounds: u64,
    pub w: Matrix,
    pub projection_active: bool,
    pub feature_version: u64,
}

/// Uniform-grid episode trace; length is `floor(T/dt) + 1`.
#[derive(Clone, Debug)]
pub struct SimTrace {
    pub dt: f64,
    pub steps: Vec<StepRecord>,
    /// Feature-network snapshot tags published to the control loop, in
    /// publication order. Every step's tag must appear here.
    pub published_versions: Vec<u64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// RMS of the tracking error norm over rows `[start, end)`.
    pub fn rms_error(&self, start: usize, end: usize) -> f64 {
        let slice = &self.steps[start..end];
        let acc: f64 = slice
            .iter()
            .map(|s| s.e.iter().map(|v| v * v).sum::<f64>())
            .sum();
        (acc / slice.len() as f64).sqrt()
    }

    /// RMS of the error norm over the final quarter of the trace.
    pub fn rms_error_final_quarter(&self) -> f64 {
        let start = 3 * self.len() / 4;
        self.rms_error(start, self.len())
    }

    /// CSV rendering with the stable column schema
    /// `t,x0..,xrm0..,e_norm,u0..,nu_ad0..,delta_true0..,delta_gen0..,W_fro,buf_size,train_loss,train_rounds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let first = match self.steps.first() {
            Some(f) => f,
            None => return out,
        };
        out.push('t');
        for i in 0..first.x.len() {
            out.push_str(&format!(",x{i}"));
        }
        for i in 0..first.x_rm.len() {
            out.push_str(&format!(",xrm{i}"));
        }
        out.push_str(",e_norm");
        for i in 0..first.u.len() {
            out.push_str(&format!(",u{i}"));
        }
        for i in 0..first.nu_ad.len() {
            out.push_str(&format!(",nu_ad{i}"));
        }
        for i in 0..first.delta_true.len() {
            out.push_str(&format!(",delta_true{i}"));
        }
        for i in 0..first.delta_gen.len() {
            out.push_str(&format!(",delta_gen{i}"));
        }
        out.push_str(",W_fro,buf_size,train_loss,train_rounds\n");
        for s in &self.steps {
            out.push_str(&format!("{}", s.t));
            for v in s.x.iter().chain(&s.x_rm) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}", norm(&s.e)));
            for v in s.u.iter().chain(&s.nu_ad).chain(&s.delta_true).chain(&s.delta_gen) {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(
                ",{},{},{},{}\n",
                s.w_fro, s.buf_size, s.train_loss, s.train_rounds
            ));
        }
        out
    }
}

/// Derived statistics of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub rms_error_full: f64,
    pub rms_error_final_quarter: f64,
    pub max_error_norm: f64,
    pub uub_radius: f64,
    pub eps_bar: f64,
    pub eps_bar_source: crate::bounds::EpsBarSource,
    pub fraction_inside_radius: f64,
    pub final_buffer_len: usize,
    pub admitted: u64,
    pub rejected: u64,
    pub train_rounds: u64,
}

impl EpisodeSummary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("episode-summary:\n");
        s.push_str(&format!("  rms_error_full: {}\n", self.rms_error_full));
        s.push_str(&format!(
            "  rms_error_final_quarter: {}\n",
            self.rms_error_final_quarter
        ));
        s.push_str(&format!("  max_error_norm: {}\n", self.max_error_norm));
        s.push_str(&format!("  uub_radius: {}\n", self.uub_radius));
        s.push_str(&format!("  eps_bar: {}\n", self.eps_bar));
        s.push_str(&format!("  eps_bar_source: {}\n", self.eps_bar_source));
        s.push_str(&format!(
            "  fraction_inside_radius: {}\n",
            self.fraction_inside_radius
        ));
        s.push_str(&format!("  final_buffer_len: {}\n", self.final_buffer_len));
        s.push_str(&format!("  admitted: {}\n", self.admitted));
        s.push_str(&format!("  rejected: {}\n", self.rejected));
        s.push_str(&format!("  train_rounds: {}\n", self.train_rounds));
        s
    }
}

/// Episode statistics from a trace. A configured `eps_bar` is used as is;
/// otherwise the empirical `max ||Delta(x) - nu_ad||` over the trace
/// stands in, labeled accordingly.
pub fn summarize(
    trace: &SimTrace,
    p: &Matrix,
    q: &Matrix,
    eps_bar: Option<f64>,
    buffer: Option<&ReplayBuffer>,
) -> Result<EpisodeSummary> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let (eps_bar, source) = match eps_bar {
        Some(v) => (v, crate::bounds::EpsBarSource::Configured),
        None => {
            let emp = trace
                .steps
                .iter()
                .map(|s| {
                    norm(&s
                        .delta_true
                        .iter()
                        .zip(&s.nu_ad)
                        .map(|(d, n)| d - n)
                        .collect::<Vec<_>>())
                })
                .fold(0.0f64, f64::max);
            (emp, crate::bounds::EpsBarSource::Empirical)
        }
    };
    let radius = crate::bounds::uub_radius(p, q, eps_bar)?;
    let inside = trace
        .steps
        .iter()
        .filter(|s| norm(&s.e) <= radius)
        .count();
    Ok(EpisodeSummary {
        rms_error_full: trace.rms_error(0, trace.len()),
        rms_error_final_quarter: trace.rms_error_final_quarter(),
        max_error_norm: trace.steps.iter().map(|s| norm(&s.e)).fold(0.0, f64::max),
        uub_radius: radius,
        eps_bar,
        eps_bar_source: source,
        fraction_inside_radius: inside as f64 / trace.len() as f64,
        final_buffer_len: buffer.map_or(0, |b| b.len()),
        admitted: buffer.map_or(0, |b| b.admitted()),
        rejected: buffer.map_or(0, |b| b.rejected()),
        train_rounds: trace.steps.last().map_or(0, |s| s.train_rounds),
    })
}

// ── run outputs ─────────────────────────────────────────────────────

/// Everything an adaptive episode leaves behind.
pub struct RunOutput {
    pub trace: SimTrace,
    pub net: Option<DeepFeatureNetwork>,
    pub buffer: Option<ReplayBuffer>,
    pub weights: Option<OuterWeights>,
}

// ── internal loop machinery ─────────────────────────────────────────

enum Features {
    Network(DeepFeatureNetwork),
    Fixed(FixedBasis),
}

impl Features {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Features::Network(net) => net.forward_features(x),
            Features::Fixed(basis) => basis.eval(x),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Features::Network(net) => net.feature_dim(),
            Features::Fixed(basis) => basis.dim(),
        }
    }

    fn version(&self) -> u64 {
        match self {
            Features::Network(net) => net.version(),
            Features::Fixed(_) => 0,
        }
    }
}

struct LoopPolicy {
    adapt_weights: bool,
    frozen_output: bool,
    maintain_buffer: bool,
    train: bool,
}

struct TrainerResult {
    net: DeepFeatureNetwork,
    last_loss: f64,
}

/// Trains a private copy over mini-batches from a buffer snapshot.
fn train_round(
    mut net: DeepFeatureNetwork,
    buffer: &ReplayBuffer,
    minibatch: usize,
    epochs: usize,
    eta: f64,
    rng: &mut RngState,
) -> Result<TrainerResult> {
    let mut last_loss = f64::NAN;
    for _ in 0..epochs {
        let batch = sample_minibatch(buffer, minibatch, rng)?;
        net = sgd_step(&net, &batch, eta)?;
        last_loss = batch_loss(&net, &batch)?;
    }
    Ok(TrainerResult { net, last_loss })
}

struct ParallelTrainer {
    rx: mpsc::Receiver<Result<TrainerResult>>,
    handle: thread::JoinHandle<()>,
}

fn spawn_trainer(
    net: DeepFeatureNetwork,
    buffer: ReplayBuffer,
    minibatch: usize,
    epochs: usize,
    eta: f64,
    mut rng: RngState,
) -> ParallelTrainer {
    let (tx, rx) = mpsc::channel();
    let handle = thread::spawn(move || {
        let result = train_round(net, &buffer, minibatch, epochs, eta, &mut rng);
        let _ = tx.send(result);
    });
    ParallelTrainer { rx, handle }
}

fn validate_gains(
    setup: &EpisodeSetup,
    gains: &GainSet,
    feature_dim: usize,
    needs_gamma: bool,
) -> Result<()> {
    let n = setup.plant.state_dim();
    if needs_gamma && gains.gamma.rows() != feature_dim {
        return Err(Error::DimensionMismatch {
            context: "gain set",
            expected: format!("Gamma {feature_dim}x{feature_dim}"),
            got: format!("Gamma {}x{}", gains.gamma.rows(), gains.gamma.cols()),
        });
    }
    if gains.p.rows() != n || gains.q.rows() != n {
        return Err(Error::DimensionMismatch {
            context: "gain set",
            expected: format!("P, Q {n}x{n}"),
            got: format!("P {}x{}, Q {}x{}", gains.p.rows(), gains.p.cols(), gains.q.rows(), gains.q.cols()),
        });
    }
    // P must solve the scenario Lyapunov equation
    let resid = setup
        .refmodel
        .a_rm
        .transpose()
        .matmul(&gains.p)
        .add(&gains.p.matmul(&setup.refmodel.a_rm))
        .add(&gains.q);
    if resid.frobenius_norm() > 1e-8 * gains.q.frobenius_norm().max(1.0) {
        return Err(Error::Validation(
            "gain set P does not solve the scenario Lyapunov equation".into(),
        ));
    }
    Ok(())
}

fn step_count(config: &DmracConfig) -> usize {
    (config.t_final / config.dt + 1e-9).floor() as usize
}

/// The unified control loop. Returns the trace plus whatever adaptive
/// state the mode maintains.
fn run_loop(
    setup: &EpisodeSetup,
    gains: &GainSet,
    mut features: Features,
    policy: LoopPolicy,
    rng: &mut RngState,
) -> Result<RunOutput> {
    let cfg = &setup.config;
    assert!(cfg.dt > 0.0 && cfg.t_final >= cfg.dt, "dt > 0 and T >= dt");
    let n = setup.plant.state_dim();
    let m = setup.plant.input_dim();
    let k = features.dim();
    validate_gains(setup, gains, k, policy.adapt_weights)?;

    let frozen_net = match (&features, policy.frozen_output) {
        (Features::Network(net), true) => Some(net.clone()),
        _ => None,
    };

    let mut weights = if policy.adapt_weights {
        Some(OuterWeights::zeros(k, m, setup.w_bound, setup.eps_proj))
    } else {
        None
    };
    let mut buffer = if policy.maintain_buffer {
        Some(ReplayBuffer::new(cfg.p_max, cfg.zeta_tol))
    } else {
        None
    };

    let mut x = setup.x0.clone();
    let mut x_rm = setup.x_rm0.clone();
    let total_steps = step_count(cfg);
    let mut trace = SimTrace {
        dt: cfg.dt,
        steps: Vec::with_capacity(total_steps + 1),
        published_versions: vec![features.version()],
    };
    let mut last_loss = f64::NAN;
    let mut rounds: u64 = 0;
    let mut pending: Option<ParallelTrainer> = None;

    let domain_limit: Vec<f64> = setup.domain.iter().map(|d| 10.0 * d).collect();

    for i in 0..=total_steps {
        let t = i as f64 * cfg.dt;

        // adopt a finished background round at the step boundary
        if let Some(p) = &pending {
            let finished = p.handle.is_finished();
            if finished || i == total_steps {
                let p = pending.take().unwrap();
                let result = p
                    .rx
                    .recv()
                    .map_err(|_| Error::Validation("trainer thread dropped".into()))??;
                let _ = p.handle.join();
                if let Features::Network(net) = &mut features {
                    let mut swapped = swap_features(net, &result.net)?;
                    swapped.set_output_layer(result.net.output_layer().clone())?;
                    *net = swapped;
                    trace.published_versions.push(net.version());
                }
                last_loss = result.last_loss;
                rounds += 1;
            }
        }

        let r = setup.signal.eval(t);
        let e = tracking_error(&x_rm, &x)?;
        let phi = features.eval(&x);
        let nu_ad = if let Some(fnet) = &frozen_net {
            fnet.forward_output(&x)
        } else if let Some(w) = &weights {
            adaptive_term(w, &phi)?
        } else {
            vec![0.0; m]
        };
        let u = total_control(gains, &x, &r, &nu_ad)?;
        let delta_true = setup.plant.delta.eval(&x);

        let (w_fro, w_snapshot, projection_active) = match &weights {
            Some(w) => {
                let f_val = if w.w_bound.is_finite() {
                    (w.norm().powi(2) - w.w_bound * w.w_bound)
                        / (w.eps_proj * w.w_bound * w.w_bound)
                } else {
                    -1.0
                };
                (w.norm(), w.w.clone(), f_val > 0.0)
            }
            None => (0.0, Matrix::zeros(0, 0), false),
        };

        trace.steps.push(StepRecord {
            t,
            x: x.clone(),
            x_rm: x_rm.clone(),
            e: e.clone(),
            u: u.clone(),
            nu_ad: nu_ad.clone(),
            delta_true,
            delta_gen: nu_ad.clone(),
            w_fro,
            buf_size: buffer.as_ref().map_or(0, |b| b.len()),
            train_loss: last_loss,
            train_rounds: rounds,
            w: w_snapshot,
            projection_active,
            feature_version: features.version(),
        });

        if i == total_steps {
            break;
        }

        // advance the closed loop with continuous state feedback; the
        // command, the outer weights, and the feature snapshot are held
        // constant over the step
        let plant_ref = &setup.plant;
        let stage_control = |s: &[f64]| -> Vec<f64> {
            let nu = if let Some(fnet) = &frozen_net {
                fnet.forward_output(s)
            } else if let Some(w) = &weights {
                w.w.transpose_mul_vec(&features.eval(s))
            } else {
                vec![0.0; m]
            };
            total_control(gains, s, &r, &nu).expect("dims validated")
        };
        let mut x_next = rk4_step(
            |_, s| plant_derivative(plant_ref, s, &stage_control(s)).expect("dims validated"),
            &x,
            t,
            cfg.dt,
        )?;
        if cfg.noise_variance > 0.0 {
            let noise = rng.gaussian_vector(cfg.noise_variance, n)?;
            x_next = axpy(&x_next, cfg.dt.sqrt(), &noise);
        }
        // the command is zero-order-held over the step, exactly like the
        // control input; matched closed loops then integrate identically
        let rm = &setup.refmodel;
        let x_rm_next = rk4_step(
            |_, s| reference_derivative(rm, s, &r).expect("dims validated"),
            &x_rm,
            t,
            cfg.dt,
        )?;

        for (idx, (v, lim)) in x_next.iter().zip(&domain_limit).enumerate() {
            if v.abs() > *lim || !v.is_finite() {
                return Err(Error::DomainExit {
                    t: t + cfg.dt,
                    index: idx,
                    value: *v,
                    limit: *lim,
                });
            }
        }

        // explicit Euler step of the weight law at the pre-step values;
        // the update drives on the adaptation error x - x_rm, the sign
        // under which the Lyapunov cross term cancels for this u
        if let Some(w) = weights.take() {
            let e_adapt: Vec<f64> = x.iter().zip(&x_rm).map(|(a, b)| a - b).collect();
            weights = Some(outer_step(&w, &phi, &e_adapt, gains, &setup.plant.b, cfg.dt)?);
        }

        // qualify the fresh sample with the post-update generative target
        if let (Some(buf), Some(w)) = (buffer.as_mut(), weights.as_ref()) {
            let phi_next = features.eval(&x_next);
            let y_next = adaptive_term(w, &phi_next)?;
            match try_insert(
                buf,
                BufferEntry {
                    x: x_next.clone(),
                    phi: phi_next,
                    y: y_next,
                },
                cfg.zeta_tol,
            ) {
                Ok(_) => {}
                Err(Error::ZeroFeature { .. }) => {
                    log::debug!("dropped zero-feature sample at t = {t}");
                }
                Err(e) => return Err(e),
            }
        }

        // feature training on schedule
        if policy.train
            && cfg.train_every > 0
            && (i + 1) % cfg.train_every == 0
        {
            let ready = buffer.as_ref().is_some_and(|b| b.len() >= cfg.minibatch);
            if ready {
                if let (Features::Network(net), Some(buf), Some(w)) =
                    (&mut features, buffer.as_ref(), weights.as_ref())
                {
                    let mut trainee = net.clone();
                    trainee.set_output_layer(w.w.clone())?;
                    if cfg.parallel_trainer {
                        if pending.is_none() {
                            pending = Some(spawn_trainer(
                                trainee,
                                buf.clone(),
                                cfg.minibatch,
                                cfg.epochs_per_round,
                                cfg.eta,
                                rng.fork(),
                            ));
                        }
                    } else {
                        let result = train_round(
                            trainee,
                            buf,
                            cfg.minibatch,
                            cfg.epochs_per_round,
                            cfg.eta,
                            rng,
                        )?;
                        let mut swapped = swap_features(net, &result.net)?;
                        swapped.set_output_layer(result.net.output_layer().clone())?;
                        *net = swapped;
                        trace.published_versions.push(net.version());
                        last_loss = result.last_loss;
                        rounds += 1;
                    }
                }
            }
        }

        x = x_next;
        x_rm = x_rm_next;
    }

    // rounds dispatched before the final step were adopted at its boundary
    debug_assert!(pending.is_none());

    let net_out = match features {
        Features::Network(net) => Some(net),
        Features::Fixed(_) => None,
    };
    Ok(RunOutput {
        trace,
        net: net_out,
        buffer,
        weights,
    })
}

// ── public entry points ─────────────────────────────────────────────

/// Full adaptive episode: outer-law adaptation, buffer qualification, and
/// scheduled feature retraining.
pub fn run_episode(
    setup: &EpisodeSetup,
    gains: &GainSet,
    net: DeepFeatureNetwork,
    rng: &mut RngState,
) -> Result<RunOutput> {
    run_loop(
        setup,
        gains,
        Features::Network(net),
        LoopPolicy {
            adapt_weights: true,
            frozen_output: false,
            maintain_buffer: true,
            train: true,
        },
        rng,
    )
}

/// Frozen feed-forward episode: the trained network supplies the adaptive
/// term directly, with no weight updates and no buffer writes.
pub fn run_frozen(
    setup: &EpisodeSetup,
    gains: &GainSet,
    net: &DeepFeatureNetwork,
    rng: &mut RngState,
) -> Result<SimTrace> {
    let out = run_loop(
        setup,
        gains,
        Features::Network(net.clone()),
        LoopPolicy {
            adapt_weights: false,
            frozen_output: true,
            maintain_buffer: false,
            train: false,
        },
        rng,
    )?;
    Ok(out.trace)
}

/// Classic baselines: fixed-basis adaptation or no adaptation at all.
pub fn run_baseline(
    setup: &EpisodeSetup,
    gains: &GainSet,
    basis: Option<&BaselineBasis>,
    rng: &mut RngState,
) -> Result<RunOutput> {
    match basis {
        Some(BaselineBasis::Fixed(fb)) => run_loop(
            setup,
            gains,
            Features::Fixed(fb.clone()),
            LoopPolicy {
                adapt_weights: true,
                frozen_output: false,
                maintain_buffer: false,
                train: false,
            },
            rng,
        ),
        Some(BaselineBasis::NetworkFeatures(net)) => run_loop(
            setup,
            gains,
            Features::Network(net.clone()),
            LoopPolicy {
                adapt_weights: true,
                frozen_output: false,
                maintain_buffer: false,
                train: false,
            },
            rng,
        ),
        None => run_loop(
            setup,
            gains,
            Features::Fixed(FixedBasis::state(setup.plant.state_dim())),
            LoopPolicy {
                adapt_weights: false,
                frozen_output: false,
                maintain_buffer: false,
                train: false,
            },
            rng,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::solve_lyapunov;
    use crate::plant::{BasisFn, PolyTrigTerm, SignalKind, UncertaintySpec};

    fn attitude_plant(delta: UncertaintySpec) -> PlantModel {
        PlantModel::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]),
            Matrix::from_rows(&[vec![0.0], vec![1.0]]),
            delta,
        )
        .unwrap()
    }

    fn second_order_gains(gamma_dim: usize, gamma_scale: f64) -> (ReferenceModel, GainSet) {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let b = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let k = Matrix::from_rows(&[vec![16.0, 4.0]]);
        let k_r = Matrix::from_rows(&[vec![16.0]]);
        let rm = crate::plant::build_matched_pair(&a, &b, &k, &k_r).unwrap();
        // Q sets the adaptation authority through P; 50x identity keeps the
        // paper-rate Gamma = 0.5 I responsive on this plant
        let q = Matrix::scaled_identity(2, 50.0);
        let p = solve_lyapunov(&rm.a_rm, &q).unwrap();
        (
            rm,
            GainSet {
                k,
                k_r,
                gamma: Matrix::scaled_identity(gamma_dim, gamma_scale),
                p,
                q,
            },
        )
    }

    fn basic_setup(
        delta: UncertaintySpec,
        mode: Mode,
        t_final: f64,
        noise: f64,
        seed: u64,
    ) -> (EpisodeSetup, GainSet) {
        let plant = attitude_plant(delta);
        let (refmodel, gains) = second_order_gains(10, 0.5);
        let setup = EpisodeSetup {
            config: DmracConfig {
                dt: 0.05,
                t_final,
                eta: 0.01,
                zeta_tol: 0.2,
                p_max: 250,
                minibatch: 8,
                train_every: 400,
                epochs_per_round: 400,
                noise_variance: noise,
                mode,
                seed,
                parallel_trainer: false,
            },
            plant,
            refmodel,
            signal: ReferenceSignal::two_sine(1.0, 0.8, 0.0, 0.5, 2.0, 0.3),
            x0: vec![0.0, 0.0],
            x_rm0: vec![0.0, 0.0],
            domain: vec![5.0, 5.0],
            w_bound: 100.0,
            eps_proj: 0.1,
        };
        (setup, gains)
    }

    fn seeded_net(setup: &EpisodeSetup, rng: &mut RngState) -> DeepFeatureNetwork {
        DeepFeatureNetwork::new_seeded(
            &[setup.plant.state_dim(), 20, 10],
            setup.plant.input_dim(),
            rng,
        )
    }

    #[test]
    fn perfect_model_keeps_zero_error() {
        // no uncertainty, no noise, matched initial states at rest with a
        // zero command: e stays 0, W never moves, and the buffer admits at
        // most one entry since every feature vector coincides
        let (mut setup, gains) = basic_setup(
            UncertaintySpec::Zero { dim: 1 },
            Mode::DmracAdaptive,
            10.0,
            0.0,
            1,
        );
        setup.config.train_every = 0;
        setup.signal = ReferenceSignal {
            kind: SignalKind::Step,
            amplitude: 0.0,
            frequency: 0.0,
            phase: 0.0,
            amplitude2: 0.0,
            frequency2: 0.0,
            phase2: 0.0,
        };
        let mut rng = RngState::new(setup.config.seed);
        let net = seeded_net(&setup, &mut rng);
        let out = run_episode(&setup, &gains, net, &mut rng).unwrap();
        for s in &out.trace.steps {
            assert!(norm(&s.e) < 1e-9, "error at t = {}", s.t);
            assert!(s.w_fro < 1e-9);
        }
        assert!(out.buffer.unwrap().len() <= 1);
    }

    #[test]
    fn perfect_model_tracks_active_command() {
        // matched loop under an active command still holds e at roundoff
        let (mut setup, gains) = basic_setup(
            UncertaintySpec::Zero { dim: 1 },
            Mode::DmracAdaptive,
            10.0,
            0.0,
            1,
        );
        setup.config.train_every = 0;
        let mut rng = RngState::new(setup.config.seed);
        let net = seeded_net(&setup, &mut rng);
        let out = run_episode(&setup, &gains, net, &mut rng).unwrap();
        for s in &out.trace.steps {
            assert!(norm(&s.e) < 1e-9, "error at t = {}", s.t);
            assert!(s.w_fro < 1e-9);
        }
    }

    #[test]
    fn trace_shape_matches_grid() {
        let (setup, gains) = basic_setup(
            UncertaintySpec::Zero { dim: 1 },
            Mode::NoAdaptation,
            1.0,
            0.0,
            3,
        );
        let mut rng = RngState::new(3);
        let out = run_baseline(&setup, &gains, None, &mut rng).unwrap();
        assert_eq!(out.trace.len(), 21); // floor(1.0/0.05) + 1
        assert_eq!(out.trace.steps[0].t, 0.0);
        let last = out.trace.steps.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
    }

    fn desk_delta() -> UncertaintySpec {
        UncertaintySpec::PolyTrig {
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
        }
    }

    #[test]
    fn adaptive_beats_no_adaptation_on_poly_trig_uncertainty() {
        let (setup, gains) = basic_setup(desk_delta(), Mode::DmracAdaptive, 150.0, 0.01, 7);
        let mut rng = RngState::new(setup.config.seed);
        let net = seeded_net(&setup, &mut rng);
        let adaptive = run_episode(&setup, &gains, net, &mut rng).unwrap();

        let (setup_na, gains_na) = basic_setup(desk_delta(), Mode::NoAdaptation, 150.0, 0.01, 7);
        let mut rng_na = RngState::new(7);
        let baseline = run_baseline(&setup_na, &gains_na, None, &mut rng_na).unwrap();

        let rms_a = adaptive.trace.rms_error_final_quarter();
        let rms_n = baseline.trace.rms_error_final_quarter();
        assert!(
            rms_a < 0.5 * rms_n,
            "adaptive {rms_a} not below half of baseline {rms_n}"
        );
    }

    #[test]
    fn same_seed_same_trace_bitwise() {
        let delta = UncertaintySpec::PolyTrig {
            rows: vec![vec![PolyTrigTerm {
                coeff: 1.0,
                f: BasisFn::Sin { index: 0, freq: 2.0 },
            }]],
        };
        let (setup, gains) = basic_setup(delta, Mode::DmracAdaptive, 20.0, 0.01, 42);
        let run = || {
            let mut rng = RngState::new(42);
            let net = seeded_net(&setup, &mut rng);
            run_episode(&setup, &gains, net, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.trace.to_csv(), b.trace.to_csv());
    }

    #[test]
    fn frozen_zero_output_equals_no_adaptation() {
        let delta = UncertaintySpec::PolyTrig {
            rows: vec![vec![PolyTrigTerm {
                coeff: 0.7,
                f: BasisFn::Coord(0),
            }]],
        };
        let (setup, gains) = basic_setup(delta, Mode::DmracFrozen, 5.0, 0.01, 9);
        let mut rng = RngState::new(9);
        let net = seeded_net(&setup, &mut rng); // zero output layer by construction
        let frozen = run_frozen(&setup, &gains, &net, &mut rng).unwrap();

        let mut rng2 = RngState::new(9);
        let _net_warmup = seeded_net(&setup, &mut rng2); // consume identical rng draws
        let baseline = run_baseline(&setup, &gains, None, &mut rng2).unwrap();
        assert_eq!(frozen.to_csv(), baseline.trace.to_csv());
    }

    #[test]
    fn adaptive_without_training_equals_mrac_over_initial_features() {
        let delta = UncertaintySpec::PolyTrig {
            rows: vec![vec![
                PolyTrigTerm {
                    coeff: 1.0,
                    f: BasisFn::One,
                },
                PolyTrigTerm {
                    coeff: 0.5,
                    f: BasisFn::Sin { index: 0, freq: 1.0 },
                },
            ]],
        };
        let (mut setup, gains) = basic_setup(delta, Mode::DmracAdaptive, 10.0, 0.01, 11);
        setup.config.train_every = 0;
        setup.w_bound = f64::INFINITY;
        let mut rng = RngState::new(11);
        let net = seeded_net(&setup, &mut rng);
        let adaptive = run_episode(&setup, &gains, net.clone(), &mut rng).unwrap();

        let mut rng2 = RngState::new(11);
        let _warmup = seeded_net(&setup, &mut rng2);
        let mrac = run_baseline(
            &setup,
            &gains,
            Some(&BaselineBasis::NetworkFeatures(net)),
            &mut rng2,
        )
        .unwrap();

        for (a, b) in adaptive.trace.steps.iter().zip(&mrac.trace.steps) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.u, b.u);
            assert_eq!(a.w_fro.to_bits(), b.w_fro.to_bits());
        }
    }

    #[test]
    fn domain_exit_is_reported() {
        // destabilizing uncertainty overwhelming the gains
        let delta = UncertaintySpec::PolyTrig {
            rows: vec![vec![PolyTrigTerm {
                coeff: 400.0,
                f: BasisFn::Coord(0),
            }]],
        };
        let (mut setup, gains) = basic_setup(delta, Mode::NoAdaptation, 30.0, 0.0, 5);
        setup.x0 = vec![0.5, 0.0];
        let mut rng = RngState::new(5);
        let r = run_baseline(&setup, &gains, None, &mut rng);
        assert!(matches!(r, Err(Error::DomainExit { .. })));
    }

    fn synthetic_trace(e_norms: &[f64]) -> SimTrace {
        SimTrace {
            dt: 0.05,
            steps: e_norms
                .iter()
                .enumerate()
                .map(|(i, en)| StepRecord {
                    t: i as f64 * 0.05,
                    x: vec![0.0, 0.0],
                    x_rm: vec![0.0, 0.0],
                    e: vec![*en, 0.0],
                    u: vec![0.0],
                    nu_ad: vec![0.0],
                    delta_true: vec![0.0],
                    delta_gen: vec![0.0],
                    w_fro: 0.0,
                    buf_size: 0,
                    train_loss: f64::NAN,
                    train_rounds: 0,
                    w: Matrix::zeros(0, 0),
                    projection_active: false,
                    feature_version: 0,
                })
                .collect(),
            published_versions: vec![0],
        }
    }

    #[test]
    fn summarize_trivial_cases() {
        let p = Matrix::identity(2);
        let q = Matrix::identity(2);
        // zero-error trace: RMS 0, everything inside any radius
        let zero = synthetic_trace(&[0.0; 8]);
        let s = summarize(&zero, &p, &q, Some(0.5), None).unwrap();
        assert_eq!(s.rms_error_full, 0.0);
        assert_eq!(s.fraction_inside_radius, 1.0);
        // constant ||e|| = 0.4 against radius 0.5: still all inside
        let constant = synthetic_trace(&[0.4; 8]);
        // radius = 2 * lmax(P) * eps / lmin(Q) = 2 * eps: pick eps 0.25
        let s2 = summarize(&constant, &p, &q, Some(0.25), None).unwrap();
        assert!((s2.uub_radius - 0.5).abs() < 1e-12);
        assert_eq!(s2.fraction_inside_radius, 1.0);
        assert!((s2.rms_error_full - 0.4).abs() < 1e-12);
        assert!(matches!(
            summarize(&synthetic_trace(&[]), &p, &q, Some(0.1), None),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn summarize_matches_recomputation_oracle() {
        let delta = UncertaintySpec::PolyTrig {
            rows: vec![vec![PolyTrigTerm {
                coeff: 0.9,
                f: BasisFn::Sin { index: 0, freq: 1.3 },
            }]],
        };
        let (setup, gains) = basic_setup(delta, Mode::NoAdaptation, 5.0, 0.01, 2);
        let mut rng = RngState::new(2);
        let out = run_baseline(&setup, &gains, None, &mut rng).unwrap();
        let s = summarize(&out.trace, &gains.p, &gains.q, Some(0.5), None).unwrap();
        // recomputation oracle for the RMS
        let mut acc = 0.0;
        for st in &out.trace.steps {
            acc += st.e.iter().map(|v| v * v).sum::<f64>();
        }
        let rms = (acc / out.trace.len() as f64).sqrt();
        assert_eq!(s.rms_error_full, rms);
        // empirical eps-bar path: max ||delta - nu_ad|| over the run
        let s_emp = summarize(&out.trace, &gains.p, &gains.q, None, None).unwrap();
        assert_eq!(s_emp.eps_bar_source, crate::bounds::EpsBarSource::Empirical);
        assert!(s_emp.eps_bar > 0.0 && s_emp.eps_bar <= 0.9 + 1e-9);
    }

    #[test]
    fn parallel_trainer_completes_and_stays_bounded() {
        let delta = UncertaintySpec::PolyTrig {
            rows: vec![vec![
                PolyTrigTerm {
                    coeff: 1.0,
                    f: BasisFn::One,
                },
                PolyTrigTerm {
                    coeff: 0.8,
                    f: BasisFn::Sin { index: 0, freq: 1.0 },
                },
            ]],
        };
        let (mut setup, gains) = basic_setup(delta, Mode::DmracAdaptive, 60.0, 0.0, 21);
        setup.config.parallel_trainer = true;
        setup.config.train_every = 200;
        setup.config.epochs_per_round = 100;
        let mut rng = RngState::new(21);
        let net = seeded_net(&setup, &mut rng);
        let out = run_episode(&setup, &gains, net, &mut rng).unwrap();
        // every step consumed a published snapshot
        for s in &out.trace.steps {
            assert!(out.trace.published_versions.contains(&s.feature_version));
        }
        let last = out.trace.steps.last().unwrap();
        assert!(last.train_rounds > 0);
        assert!(norm(&last.e).is_finite());
    }
}

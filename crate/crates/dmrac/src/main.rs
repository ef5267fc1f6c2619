//! Command-line entry point: scenario simulation, bound reports, the
//! invariant suite, and buffer dumps.
//!
//! Exit codes: 0 success, 1 configuration problem, 2 runtime divergence
//! or numeric failure, 3 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmrac::bounds::{bound_report, EpsBarSource};
use dmrac::config::{load_scenario, ScenarioConfig, Task};
use dmrac::deepnet;
use dmrac::error::Error;
use dmrac::numerics::matrix::norm;
use dmrac::numerics::rng::RngState;
use dmrac::sim::{
    run_baseline, run_episode, run_frozen, summarize, BaselineBasis, Mode, RunOutput,
};
use dmrac::verify::{run_all, Inject};

#[derive(Parser)]
#[command(name = "dmrac", version, about = "Adaptive-control simulation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the trace and summary
    Simulate(SimulateArgs),
    /// Print the analytic bound report for a scenario
    Bounds(BoundsArgs),
    /// Run the full invariant suite
    Verify(VerifyArgs),
    /// Run a scenario and dump the final replay buffer as CSV
    DumpBuffer(DumpBufferArgs),
}

#[derive(Args)]
struct ScenarioArg {
    /// Built-in scenario name (desk-attitude, structured, retention) or a
    /// configuration file path
    #[arg(long)]
    scenario: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Override the scenario mode
    #[arg(long)]
    mode: Option<String>,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Run the training task or the shifted evaluation task
    #[arg(long, default_value = "train")]
    task: String,
    /// Trace CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary output path (printed to stdout regardless)
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Network weight file to load (required for dmrac-frozen)
    #[arg(long)]
    net: Option<PathBuf>,
    /// Write the trained network here after the run
    #[arg(long)]
    save_net: Option<PathBuf>,
    /// Run the feature trainer on a background worker
    #[arg(long)]
    parallel_trainer: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Approximation-error bound; overrides the scenario value
    #[arg(long)]
    eps_bar: Option<f64>,
    /// Estimate eps_bar empirically from a calibration run of the scenario
    #[arg(long)]
    calibrate: bool,
    /// Generalization tolerance epsilon
    #[arg(long)]
    eps: Option<f64>,
    /// Confidence delta in (0, 2]
    #[arg(long)]
    delta: Option<f64>,
    /// Bits per weight in the hypothesis-class count
    #[arg(long)]
    k_bits: Option<u64>,
    /// Tunable weight count (defaults to the scenario network)
    #[arg(long)]
    n_weights: Option<u64>,
    /// Tracking error norm at which the generalization tolerance is read
    #[arg(long, default_value_t = 1.0)]
    e_norm: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Inject a named defect to prove the harness catches it
    #[arg(long, hide = true)]
    inject: Option<String>,
}

#[derive(Args)]
struct DumpBufferArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Exit-code mapping for the error taxonomy.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Validation(_) => 1,
        Error::Io(_) | Error::MalformedNetworkFile(_) => 3,
        _ => 2,
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(&err))
}

fn run_scenario_mode(
    cfg: &ScenarioConfig,
    task: Task,
    net_in: Option<deepnet::DeepFeatureNetwork>,
) -> Result<RunOutput, Error> {
    let setup = cfg.setup(task)?;
    let mut rng = RngState::new(cfg.sim.seed);
    match cfg.sim.mode {
        Mode::DmracAdaptive => {
            let net = match net_in {
                Some(n) => n,
                None => cfg.build_network(&mut rng),
            };
            let gains = cfg.gains(net.feature_dim())?;
            run_episode(&setup, &gains, net, &mut rng)
        }
        Mode::DmracFrozen => {
            let net = net_in.ok_or_else(|| {
                Error::Validation("dmrac-frozen requires --net <weights.dmrn>".into())
            })?;
            let gains = cfg.gains(net.feature_dim())?;
            let trace = run_frozen(&setup, &gains, &net, &mut rng)?;
            Ok(RunOutput {
                trace,
                net: Some(net),
                buffer: None,
                weights: None,
            })
        }
        Mode::MracFixedBasis => {
            let gains = cfg.gains(cfg.baseline_basis.dim())?;
            let basis = BaselineBasis::Fixed(cfg.baseline_basis.clone());
            run_baseline(&setup, &gains, Some(&basis), &mut rng)
        }
        Mode::NoAdaptation => {
            let gains = cfg.gains(cfg.baseline_basis.dim())?;
            run_baseline(&setup, &gains, None, &mut rng)
        }
    }
}

fn write_trace_and_summary(
    cfg: &ScenarioConfig,
    args: &SimulateArgs,
    out: &RunOutput,
) -> Result<(), Error> {
    let trace_path = args
        .out
        .clone()
        .or_else(|| cfg.trace_path.as_ref().map(PathBuf::from));
    if let Some(path) = trace_path {
        std::fs::write(&path, out.trace.to_csv())?;
        log::info!("trace written to {}", path.display());
    }
    let gains = cfg.gains(1)?;
    let summary = summarize(
        &out.trace,
        &gains.p,
        &gains.q,
        cfg.eps_bar,
        out.buffer.as_ref(),
    )?;
    let rendered = summary.render();
    print!("{rendered}");
    let summary_path = args
        .summary
        .clone()
        .or_else(|| cfg.summary_path.as_ref().map(PathBuf::from));
    if let Some(path) = summary_path {
        std::fs::write(&path, rendered)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut cfg = load_scenario(&args.scenario.scenario)?;
    if let Some(mode) = &args.mode {
        cfg.sim.mode = Mode::parse(mode)
            .ok_or_else(|| Error::Validation(format!("unknown mode '{mode}'")))?;
    }
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if args.parallel_trainer {
        cfg.sim.parallel_trainer = true;
    }
    let task = match args.task.as_str() {
        "train" => Task::Train,
        "eval" => Task::Eval,
        other => return Err(Error::Validation(format!("unknown task '{other}'"))),
    };
    let net_in = match &args.net {
        Some(path) => Some(deepnet::load(path)?),
        None => None,
    };
    let out = run_scenario_mode(&cfg, task, net_in)?;
    write_trace_and_summary(&cfg, &args, &out)?;
    if let Some(path) = &args.save_net {
        match &out.net {
            Some(net) => deepnet::save(net, path)?,
            None => {
                return Err(Error::Validation("this mode has no network to save".into()))
            }
        }
    }
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), Error> {
    let cfg = load_scenario(&args.scenario.scenario)?;
    let gains = cfg.gains(1)?;
    let (eps_bar, source) = if let Some(v) = args.eps_bar {
        (v, EpsBarSource::Configured)
    } else if let Some(v) = cfg.eps_bar {
        (v, EpsBarSource::Configured)
    } else if args.calibrate {
        let out = run_scenario_mode(&cfg, Task::Train, None)?;
        let emp = out
            .trace
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
        (emp, EpsBarSource::Empirical)
    } else {
        return Err(Error::Validation(
            "eps_bar is not configured; pass --eps-bar or --calibrate".into(),
        ));
    };
    let report = bound_report(
        &gains.p,
        &gains.q,
        eps_bar,
        source,
        args.e_norm,
        args.eps.unwrap_or(cfg.bound_eps),
        args.delta.unwrap_or(cfg.bound_delta),
        args.k_bits.unwrap_or(cfg.k_bits),
        args.n_weights.unwrap_or_else(|| cfg.n_weights()),
    )?;
    print!("{}", report.render());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool, Error> {
    let inject = match args.inject.as_deref() {
        None => Inject::None,
        Some("gradient-bug") => Inject::GradientBug,
        Some(other) => return Err(Error::Validation(format!("unknown injection '{other}'"))),
    };
    let outcomes = run_all(inject);
    let mut all_ok = true;
    for o in &outcomes {
        match &o.result {
            Ok(()) => println!("PASS {} ({:.2}s)", o.name, o.seconds),
            Err(msg) => {
                all_ok = false;
                println!("FAIL {} ({:.2}s): {msg}", o.name, o.seconds);
            }
        }
    }
    Ok(all_ok)
}

fn cmd_dump_buffer(args: DumpBufferArgs) -> Result<(), Error> {
    let mut cfg = load_scenario(&args.scenario.scenario)?;
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if cfg.sim.mode != Mode::DmracAdaptive {
        return Err(Error::Validation(
            "dump-buffer needs a scenario in dmrac-adaptive mode".into(),
        ));
    }
    let out = run_scenario_mode(&cfg, Task::Train, None)?;
    let buffer = out
        .buffer
        .ok_or_else(|| Error::Validation("run produced no buffer".into()))?;
    std::fs::write(&args.out, buffer.to_csv())?;
    println!(
        "buffer: {} entries ({} admitted, {} rejected)",
        buffer.len(),
        buffer.admitted(),
        buffer.rejected()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DMRAC_LOG", "error")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => match cmd_simulate(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Command::Bounds(args) => match cmd_bounds(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Command::Verify(args) => match cmd_verify(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => fail(e),
        },
        Command::DumpBuffer(args) => match cmd_dump_buffer(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
    }
}

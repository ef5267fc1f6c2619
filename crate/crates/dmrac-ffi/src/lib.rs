//! C ABI for the simulation laboratory.
//!
//! Scenarios, runs, and networks are opaque handles created and destroyed
//! through paired constructor/free functions. Every fallible call returns
//! a [`DmracStatus`]; on failure a thread-local message is retrievable
//! with [`dmrac_last_error_message`]. Strings returned by this library
//! must be released with [`dmrac_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dmrac::bounds;
use dmrac::config::{self, ScenarioConfig, Task};
use dmrac::deepnet::{self, DeepFeatureNetwork};
use dmrac::error::Error;
use dmrac::numerics::rng::RngState;
use dmrac::sim::{run_baseline, run_episode, run_frozen, summarize, BaselineBasis, Mode, RunOutput};

/// Call results. Zero is success; everything else maps one error class.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DmracStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ValidationError = 4,
    NumericError = 5,
    DomainExit = 6,
    IoError = 7,
    Utf8Error = 8,
    Panic = 9,
}

/// Which reference task a simulation follows.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DmracTask {
    Train = 0,
    Eval = 1,
}

/// Scalar episode statistics, mirrored from the run summary.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DmracSummary {
    pub rms_error_full: f64,
    pub rms_error_final_quarter: f64,
    pub max_error_norm: f64,
    pub uub_radius: f64,
    pub eps_bar: f64,
    /// 0 when eps_bar came from configuration, 1 when estimated from the
    /// run itself.
    pub eps_bar_empirical: i32,
    pub fraction_inside_radius: f64,
    pub final_buffer_len: u64,
    pub admitted: u64,
    pub rejected: u64,
    pub train_rounds: u64,
}

/// Opaque scenario handle.
pub struct DmracScenario {
    cfg: ScenarioConfig,
}

/// Opaque finished-run handle.
pub struct DmracRun {
    out: RunOutput,
}

/// Opaque network handle.
pub struct DmracNetwork {
    net: DeepFeatureNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DmracStatus {
    match err {
        Error::Parse { .. } => DmracStatus::ParseError,
        Error::Validation(_) => DmracStatus::ValidationError,
        Error::DomainExit { .. } => DmracStatus::DomainExit,
        Error::Io(_) | Error::MalformedNetworkFile(_) => DmracStatus::IoError,
        _ => DmracStatus::NumericError,
    }
}

fn fail(err: Error) -> DmracStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

fn guard<F: FnOnce() -> DmracStatus>(f: F) -> DmracStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic".into());
            DmracStatus::Panic
        }
    }
}

/// Reads a required C string argument.
///
/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, DmracStatus> {
    if ptr.is_null() {
        set_error("null string argument".into());
        return Err(DmracStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8".into());
        DmracStatus::Utf8Error
    })
}

fn export_string(s: String) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Most recent error message on this thread, or null when none exists.
/// The caller owns the returned string and must release it with
/// [`dmrac_string_free`].
#[no_mangle]
pub extern "C" fn dmrac_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(msg) => export_string(msg.to_string_lossy().into_owned()),
        None => ptr::null_mut(),
    })
}

/// Releases a string allocated by this library. Null is accepted.
///
/// # Safety
/// `s` must have been returned by a dmrac function and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dmrac_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a scenario by built-in name or file path.
///
/// # Safety
/// `name_or_path` must be a valid NUL-terminated string; `out` must point
/// to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dmrac_scenario_load(
    name_or_path: *const c_char,
    out: *mut *mut DmracScenario,
) -> DmracStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return DmracStatus::NullPointer;
        }
        let name = match read_str(name_or_path) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match config::load_scenario(name) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(DmracScenario { cfg }));
                DmracStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a scenario document from text.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must point to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dmrac_scenario_parse(
    text: *const c_char,
    out: *mut *mut DmracScenario,
) -> DmracStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return DmracStatus::NullPointer;
        }
        let text = match read_str(text) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match config::parse_config(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(DmracScenario { cfg }));
                DmracStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Canonical text form of a scenario; release with `dmrac_string_free`.
///
/// # Safety
/// `scenario` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn dmrac_scenario_serialize(scenario: *const DmracScenario) -> *mut c_char {
    if scenario.is_null() {
        return ptr::null_mut();
    }
    export_string(config::serialize_config(&(*scenario).cfg))
}

/// Overrides the run mode (`dmrac-adaptive`, `dmrac-frozen`,
/// `mrac-fixed-basis`, `no-adaptation`).
///
/// # Safety
/// `scenario` must be a live handle; `mode` a valid string.
#[no_mangle]
pub unsafe extern "C" fn dmrac_scenario_set_mode(
    scenario: *mut DmracScenario,
    mode: *const c_char,
) -> DmracStatus {
    guard(|| {
        if scenario.is_null() {
            set_error("null scenario".into());
            return DmracStatus::NullPointer;
        }
        let mode = match read_str(mode) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match Mode::parse(mode) {
            Some(m) => {
                (*scenario).cfg.sim.mode = m;
                DmracStatus::Ok
            }
            None => {
                set_error(format!("unknown mode '{mode}'"));
                DmracStatus::InvalidArgument
            }
        }
    })
}

/// Overrides the run seed.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmrac_scenario_set_seed(
    scenario: *mut DmracScenario,
    seed: u64,
) -> DmracStatus {
    guard(|| {
        if scenario.is_null() {
            set_error("null scenario".into());
            return DmracStatus::NullPointer;
        }
        (*scenario).cfg.sim.seed = seed;
        DmracStatus::Ok
    })
}

/// Releases a scenario handle. Null is accepted.
///
/// # Safety
/// `scenario` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dmrac_scenario_free(scenario: *mut DmracScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

fn simulate_inner(
    cfg: &ScenarioConfig,
    task: Task,
    net_in: Option<DeepFeatureNetwork>,
) -> Result<RunOutput, Error> {
    let setup = cfg.setup(task)?;
    let mut rng = RngState::new(cfg.sim.seed);
    match cfg.sim.mode {
        Mode::DmracAdaptive => {
            let net = net_in.unwrap_or_else(|| cfg.build_network(&mut rng));
            let gains = cfg.gains(net.feature_dim())?;
            run_episode(&setup, &gains, net, &mut rng)
        }
        Mode::DmracFrozen => {
            let net = net_in.ok_or_else(|| {
                Error::Validation("frozen mode needs a network handle".into())
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

/// Runs a scenario. `net` may be null except in frozen mode; it is cloned,
/// not consumed.
///
/// # Safety
/// Handles must be live; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn dmrac_simulate(
    scenario: *const DmracScenario,
    task: DmracTask,
    net: *const DmracNetwork,
    out: *mut *mut DmracRun,
) -> DmracStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            set_error("null argument".into());
            return DmracStatus::NullPointer;
        }
        let task = match task {
            DmracTask::Train => Task::Train,
            DmracTask::Eval => Task::Eval,
        };
        let net_in = if net.is_null() {
            None
        } else {
            Some((*net).net.clone())
        };
        match simulate_inner(&(*scenario).cfg, task, net_in) {
            Ok(run) => {
                *out = Box::into_raw(Box::new(DmracRun { out: run }));
                DmracStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of trace samples in a finished run.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmrac_run_trace_len(run: *const DmracRun) -> usize {
    if run.is_null() {
        return 0;
    }
    (*run).out.trace.len()
}

/// Full trace in CSV form; release with `dmrac_string_free`.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmrac_run_trace_csv(run: *const DmracRun) -> *mut c_char {
    if run.is_null() {
        return ptr::null_mut();
    }
    export_string((*run).out.trace.to_csv())
}

/// Episode statistics for a finished run of a scenario.
///
/// # Safety
/// Handles must be live; `out` must point to writable storage for one
/// `DmracSummary`.
#[no_mangle]
pub unsafe extern "C" fn dmrac_run_summary(
    run: *const DmracRun,
    scenario: *const DmracScenario,
    out: *mut DmracSummary,
) -> DmracStatus {
    guard(|| {
        if run.is_null() || scenario.is_null() || out.is_null() {
            set_error("null argument".into());
            return DmracStatus::NullPointer;
        }
        let cfg = &(*scenario).cfg;
        let gains = match cfg.gains(1) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        let r = &(*run).out;
        match summarize(&r.trace, &gains.p, &gains.q, cfg.eps_bar, r.buffer.as_ref()) {
            Ok(s) => {
                *out = DmracSummary {
                    rms_error_full: s.rms_error_full,
                    rms_error_final_quarter: s.rms_error_final_quarter,
                    max_error_norm: s.max_error_norm,
                    uub_radius: s.uub_radius,
                    eps_bar: s.eps_bar,
                    eps_bar_empirical: matches!(
                        s.eps_bar_source,
                        bounds::EpsBarSource::Empirical
                    ) as i32,
                    fraction_inside_radius: s.fraction_inside_radius,
                    final_buffer_len: s.final_buffer_len as u64,
                    admitted: s.admitted,
                    rejected: s.rejected,
                    train_rounds: s.train_rounds,
                };
                DmracStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Clones the trained network out of a finished adaptive run.
///
/// # Safety
/// `run` must be live; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn dmrac_run_network(
    run: *const DmracRun,
    out: *mut *mut DmracNetwork,
) -> DmracStatus {
    guard(|| {
        if run.is_null() || out.is_null() {
            set_error("null argument".into());
            return DmracStatus::NullPointer;
        }
        match &(*run).out.net {
            Some(net) => {
                *out = Box::into_raw(Box::new(DmracNetwork { net: net.clone() }));
                DmracStatus::Ok
            }
            None => {
                set_error("this run kept no network".into());
                DmracStatus::InvalidArgument
            }
        }
    })
}

/// Releases a run handle. Null is accepted.
///
/// # Safety
/// `run` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dmrac_run_free(run: *mut DmracRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Loads a network weight file.
///
/// # Safety
/// `path` must be a valid string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dmrac_network_load(
    path: *const c_char,
    out: *mut *mut DmracNetwork,
) -> DmracStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return DmracStatus::NullPointer;
        }
        let path = match read_str(path) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match deepnet::load(std::path::Path::new(path)) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(DmracNetwork { net }));
                DmracStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Writes a network weight file.
///
/// # Safety
/// `net` must be live; `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn dmrac_network_save(
    net: *const DmracNetwork,
    path: *const c_char,
) -> DmracStatus {
    guard(|| {
        if net.is_null() {
            set_error("null network".into());
            return DmracStatus::NullPointer;
        }
        let path = match read_str(path) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match deepnet::save(&(*net).net, std::path::Path::new(path)) {
            Ok(()) => DmracStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Releases a network handle. Null is accepted.
///
/// # Safety
/// `net` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dmrac_network_free(net: *mut DmracNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Ultimate-bound radius for a scenario's Lyapunov pair at a given
/// approximation-error bound.
///
/// # Safety
/// `scenario` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dmrac_uub_radius(
    scenario: *const DmracScenario,
    eps_bar: f64,
    out: *mut f64,
) -> DmracStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            set_error("null argument".into());
            return DmracStatus::NullPointer;
        }
        if eps_bar < 0.0 {
            set_error("eps_bar must be nonnegative".into());
            return DmracStatus::InvalidArgument;
        }
        let cfg = &(*scenario).cfg;
        let gains = match cfg.gains(1) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        match bounds::uub_radius(&gains.p, &gains.q, eps_bar) {
            Ok(r) => {
                *out = r;
                DmracStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Generalization tolerance for a scenario at a given error norm.
///
/// # Safety
/// `scenario` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dmrac_generalization_tolerance(
    scenario: *const DmracScenario,
    e_norm: f64,
    out: *mut f64,
) -> DmracStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            set_error("null argument".into());
            return DmracStatus::NullPointer;
        }
        if e_norm < 0.0 {
            set_error("e_norm must be nonnegative".into());
            return DmracStatus::InvalidArgument;
        }
        let cfg = &(*scenario).cfg;
        let gains = match cfg.gains(1) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        match bounds::generalization_tolerance(&gains.p, &gains.q, e_norm) {
            Ok(r) => {
                *out = r;
                DmracStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Training sample-complexity bound.
///
/// # Safety
/// `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn dmrac_sample_complexity(
    eps: f64,
    delta: f64,
    k_bits: u64,
    n_weights: u64,
    out: *mut u64,
) -> DmracStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer".into());
            return DmracStatus::NullPointer;
        }
        match bounds::sample_complexity(eps, delta, k_bits, n_weights) {
            Ok(m) => {
                *out = m;
                DmracStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

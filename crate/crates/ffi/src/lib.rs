//! C ABI over the multipred workbench.
//!
//! Every fallible call returns an [`MpStatus`]; on failure the message is
//! available from [`mp_last_error`] on the same thread. Handles are opaque
//! and must be released with their `*_free` function. Strings returned
//! through out-pointers are owned by the caller and released with
//! [`mp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use multipred::domain::{ActionId, Observation, RngStream};
use multipred::envs::{EnvId, Environment};
use multipred::harness::{preset, run_experiment, ExperimentConfig, RunLog};
use multipred::oracle::checks;
use multipred::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    UnknownComponent = 4,
    OutOfRange = 5,
    Io = 6,
    Numeric = 7,
    Panic = 8,
}

/// An experiment configuration.
pub struct MpConfig {
    inner: ExperimentConfig,
}

/// The evaluation log of one run.
pub struct MpRunLog {
    inner: RunLog,
}

/// A steppable environment with its own random stream.
pub struct MpEnv {
    env: Environment,
    rng: RngStream,
    state: Observation,
}

/// Result of [`mp_env_step`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MpStep {
    /// Next state coordinates.
    pub x: f64,
    pub y: f64,
    /// Goal entered on this step, or -1.
    pub goal: i32,
    /// Zero on goal entry, one otherwise.
    pub behavior_discount: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MpStatus {
    match e {
        Error::InvalidConfig(_) | Error::Json(_) | Error::Unsupported(_) => MpStatus::InvalidConfig,
        Error::UnknownComponent { .. } => MpStatus::UnknownComponent,
        Error::InvalidAction { .. } | Error::DimensionMismatch { .. } => MpStatus::OutOfRange,
        Error::Io(_) | Error::Csv(_) => MpStatus::Io,
        Error::Singular { .. } | Error::ZeroBehaviorProbability => MpStatus::Numeric,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), (MpStatus, String)>) -> MpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MpStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_else(|| "unknown".into())));
            MpStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (MpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MpStatus, String) {
    (MpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MpStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (MpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), (MpStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON configuration.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_config_from_json(json: *const c_char, out: *mut *mut MpConfig) -> MpStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let cfg = ExperimentConfig::from_json(text).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(MpConfig { inner: cfg })), "out")
    })
}

/// Builds one of the named standard configurations.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_config_from_preset(name: *const c_char, out: *mut *mut MpConfig) -> MpStatus {
    guard(|| {
        let cfg = preset(read_str(name, "name")?).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(MpConfig { inner: cfg })), "out")
    })
}

/// Overrides the run length.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mp_config_set_steps(cfg: *mut MpConfig, steps: usize) -> MpStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if steps == 0 {
            return Err((MpStatus::InvalidConfig, "steps must be positive".into()));
        }
        c.inner.steps = steps;
        Ok(())
    })
}

/// Serializes the configuration to JSON.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_config_to_json(cfg: *const MpConfig, out: *mut *mut c_char) -> MpStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let s = serde_json::to_string(&c.inner).map_err(|e| core_err(e.into()))?;
        write_out(out, into_c_string(s), "out")
    })
}

/// # Safety
/// `cfg` must be null or a live handle, which becomes invalid.
#[no_mangle]
pub unsafe extern "C" fn mp_config_free(cfg: *mut MpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the experiment with `seed`. Writes log files too when the
/// configuration names an output directory.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_run(cfg: *const MpConfig, seed: u64, out: *mut *mut MpRunLog) -> MpStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let log = run_experiment(&c.inner, seed).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(MpRunLog { inner: log })), "out")
    })
}

/// # Safety
/// `log` must be null or a live handle, which becomes invalid.
#[no_mangle]
pub unsafe extern "C" fn mp_runlog_free(log: *mut MpRunLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Number of evaluation rows, or 0 for a null handle.
///
/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mp_runlog_rows(log: *const MpRunLog) -> usize {
    log.as_ref().map_or(0, |l| l.inner.rows.len())
}

/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mp_runlog_num_gvfs(log: *const MpRunLog) -> usize {
    log.as_ref().map_or(0, |l| l.inner.num_gvfs())
}

/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mp_runlog_num_goals(log: *const MpRunLog) -> usize {
    log.as_ref().map_or(0, |l| l.inner.num_goals())
}

unsafe fn row<'a>(log: *const MpRunLog, r: usize) -> Result<&'a multipred::harness::LogRow, (MpStatus, String)> {
    let l = log.as_ref().ok_or_else(|| null("log"))?;
    l.inner.rows.get(r).ok_or_else(|| (MpStatus::OutOfRange, format!("row {r} out of range ({} rows)", l.inner.rows.len())))
}

/// Step, total error so far and mean intrinsic reward of row `r`.
///
/// # Safety
/// `log` must be a live handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_runlog_row(log: *const MpRunLog, r: usize, step: *mut u64, te: *mut f64, mean_reward: *mut f64) -> MpStatus {
    guard(|| {
        let row = row(log, r)?;
        write_out(step, row.step as u64, "step")?;
        write_out(te, row.te, "te")?;
        write_out(mean_reward, row.mean_intrinsic_reward, "mean_reward")
    })
}

/// RMSVE of GVF `gvf` at row `r`.
///
/// # Safety
/// `log` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_runlog_rmsve(log: *const MpRunLog, r: usize, gvf: usize, out: *mut f64) -> MpStatus {
    guard(|| {
        let row = row(log, r)?;
        let v = *row.rmsve.get(gvf).ok_or_else(|| (MpStatus::OutOfRange, format!("gvf {gvf} out of range")))?;
        write_out(out, v, "out")
    })
}

/// Cumulative entries into goal `goal` at row `r`.
///
/// # Safety
/// `log` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_runlog_visits(log: *const MpRunLog, r: usize, goal: usize, out: *mut u64) -> MpStatus {
    guard(|| {
        let row = row(log, r)?;
        let v = *row.visits.get(goal).ok_or_else(|| (MpStatus::OutOfRange, format!("goal {goal} out of range")))?;
        write_out(out, v, "out")
    })
}

/// The log in its CSV form.
///
/// # Safety
/// `log` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_runlog_to_csv(log: *const MpRunLog, out: *mut *mut c_char) -> MpStatus {
    guard(|| {
        let l = log.as_ref().ok_or_else(|| null("log"))?;
        write_out(out, into_c_string(l.inner.to_csv_string()), "out")
    })
}

/// Runs one verification suite (`value-bound`, `rls-rate`,
/// `lstd-equivalence-1`, `-2` or `-3`) and returns its JSON report and
/// verdict.
///
/// # Safety
/// `check` must be a nul-terminated string; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_oracle_check(
    check: *const c_char,
    trials: usize,
    seed: u64,
    report: *mut *mut c_char,
    passed: *mut bool,
) -> MpStatus {
    guard(|| {
        let name = read_str(check, "check")?;
        if report.is_null() || passed.is_null() {
            return Err(null("out"));
        }
        let mut rng = RngStream::new(seed, 0);
        let r = match name {
            "value-bound" => checks::check_value_bound(trials, &mut rng),
            "rls-rate" => checks::check_rls_rate(&[100, 1_000, 10_000], trials, &mut rng),
            "lstd-equivalence-1" => checks::check_lstd_equivalence(1, trials, &mut rng),
            "lstd-equivalence-2" => checks::check_lstd_equivalence(2, trials, &mut rng),
            "lstd-equivalence-3" => checks::check_lstd_equivalence(3, trials, &mut rng),
            _ => return Err((MpStatus::UnknownComponent, format!("unknown check `{name}`"))),
        }
        .map_err(core_err)?;
        let json = serde_json::to_string(&r).map_err(|e| core_err(e.into()))?;
        write_out(passed, r.passed, "passed")?;
        write_out(report, into_c_string(json), "report")
    })
}

/// Creates environment `id` (as listed by `multipred list`) with its GVF
/// suite, seeded by `seed`, and draws a start state. Mountain Car
/// scripts its GVF policies here, which takes a few seconds.
///
/// # Safety
/// `id` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_env_new(id: *const c_char, seed: u64, out: *mut *mut MpEnv) -> MpStatus {
    guard(|| {
        let id: EnvId = read_str(id, "id")?.parse().map_err(core_err)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let env = Environment::new(id, seed, &Default::default());
        let mut rng = RngStream::new(seed, multipred::domain::streams::ENV);
        let state = env.reset(&mut rng);
        write_out(out, Box::into_raw(Box::new(MpEnv { env, rng, state })), "out")
    })
}

/// # Safety
/// `env` must be null or a live handle, which becomes invalid.
#[no_mangle]
pub unsafe extern "C" fn mp_env_free(env: *mut MpEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of actions, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mp_env_num_actions(env: *const MpEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.num_actions())
}

/// Current state coordinates.
///
/// # Safety
/// `env` must be a live handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_env_state(env: *const MpEnv, x: *mut f64, y: *mut f64) -> MpStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        write_out(x, e.state.x(), "x")?;
        write_out(y, e.state.y(), "y")
    })
}

/// Takes `action` from the current state.
///
/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mp_env_step(env: *mut MpEnv, action: usize, out: *mut MpStep) -> MpStatus {
    guard(|| {
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = e.env.step(&e.state, ActionId(action), &mut e.rng).map_err(core_err)?;
        e.state = o.s_next;
        let step = MpStep {
            x: o.s_next.x(),
            y: o.s_next.y(),
            goal: o.goal_hit.map_or(-1, |g| g as i32),
            behavior_discount: o.behavior_discount,
        };
        write_out(out, step, "out")
    })
}

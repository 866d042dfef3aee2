//! C ABI for the bandit-sim simulator.
//!
//! Objects cross the boundary as opaque handles created by `*_new` and
//! released by the matching `*_free`. Every fallible call returns a
//! [`BsStatus`]; on failure the message is kept per thread and can be read
//! with [`bs_last_error_message`].
//!
//! The header `include/bandit_sim.h` is regenerated by `build.rs`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bandit_sim::cli::{self, RunError};
use bandit_sim::env::{BanditEnvironment, EnvironmentConfig};
use bandit_sim::policies::{Policy, PolicySpec};
use bandit_sim::seed::{rng_from_seed, SimRng};
use bandit_sim::SimError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Simulation = 4,
    Io = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: BsStatus, message: impl Into<String>) -> BsStatus {
    set_error(message);
    status
}

fn sim_status(e: &SimError) -> BsStatus {
    match e {
        SimError::Config(_) => BsStatus::Config,
        SimError::DimensionMismatch { .. } | SimError::ActionOutOfRange { .. } | SimError::InvalidReward(_) => {
            BsStatus::InvalidArgument
        }
        _ => BsStatus::Simulation,
    }
}

fn from_sim(e: SimError) -> BsStatus {
    fail(sim_status(&e), e.to_string())
}

/// Runs `f`, turning a panic into [`BsStatus::Panic`].
fn guard(f: impl FnOnce() -> BsStatus) -> BsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == BsStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(BsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, BsStatus> {
    if s.is_null() {
        return Err(fail(BsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(BsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], BsStatus> {
    if p.is_null() {
        return Err(fail(BsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize) -> Option<&'a mut [T]> {
    (!p.is_null()).then(|| std::slice::from_raw_parts_mut(p, len))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failed call on this thread, or null if the last call
/// succeeded. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Opaque round generator.
pub struct BsEnvironment {
    inner: BanditEnvironment,
}

/// Creates an environment with randomly drawn coefficients.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn bs_environment_new(
    n_actions: usize,
    dim_context: usize,
    seed: u64,
    out: *mut *mut BsEnvironment,
) -> BsStatus {
    guard(|| {
        if out.is_null() {
            return fail(BsStatus::NullPointer, "out is null");
        }
        let inner = tri!(BanditEnvironment::new(&EnvironmentConfig::new(n_actions, dim_context, seed)).map_err(from_sim));
        *out = Box::into_raw(Box::new(BsEnvironment { inner }));
        BsStatus::Ok
    })
}

/// Releases an environment. Null is ignored.
///
/// # Safety
/// `env` must be null or a handle from [`bs_environment_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_environment_free(env: *mut BsEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Draws the next round. `context` receives `dim_context` values;
/// `expected_rewards` and `rewards` receive `n_actions` values each. Any of
/// the three output buffers may be null to skip it.
///
/// # Safety
/// `env` must be a live handle; non-null buffers must hold the lengths given.
#[no_mangle]
pub unsafe extern "C" fn bs_environment_sample(
    env: *mut BsEnvironment,
    context: *mut f64,
    dim_context: usize,
    expected_rewards: *mut f64,
    rewards: *mut u8,
    n_actions: usize,
    round_index: *mut u64,
) -> BsStatus {
    guard(|| {
        let Some(env) = env.as_mut() else {
            return fail(BsStatus::NullPointer, "environment is null");
        };
        if dim_context != env.inner.dim_context() || n_actions != env.inner.n_actions() {
            return fail(
                BsStatus::InvalidArgument,
                format!(
                    "buffer sizes {dim_context}x{n_actions} do not match environment {}x{}",
                    env.inner.dim_context(),
                    env.inner.n_actions()
                ),
            );
        }
        let round = env.inner.sample_round();
        if let Some(buf) = slice_mut(context, dim_context) {
            buf.copy_from_slice(&round.context);
        }
        if let Some(buf) = slice_mut(expected_rewards, n_actions) {
            buf.copy_from_slice(&round.expected_rewards);
        }
        if let Some(buf) = slice_mut(rewards, n_actions) {
            buf.copy_from_slice(&round.rewards);
        }
        if !round_index.is_null() {
            *round_index = round.round_index;
        }
        BsStatus::Ok
    })
}

/// Opaque bandit policy with its own exploration stream.
pub struct BsPolicy {
    inner: Box<dyn Policy>,
    dim_context: usize,
    rng: SimRng,
}

/// Creates a policy by name (`random`, `egreedy`, `bts`, `linucb`, `lints`)
/// with default hyperparameters.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_policy_new(
    name: *const c_char,
    n_actions: usize,
    dim_context: usize,
    seed: u64,
    out: *mut *mut BsPolicy,
) -> BsStatus {
    guard(|| {
        if out.is_null() {
            return fail(BsStatus::NullPointer, "out is null");
        }
        let name = tri!(c_str(name, "name"));
        let Some(spec) = PolicySpec::from_name(name) else {
            return fail(BsStatus::InvalidArgument, format!("unknown policy {name:?}"));
        };
        let inner = tri!(spec.build(n_actions, dim_context).map_err(from_sim));
        *out = Box::into_raw(Box::new(BsPolicy { inner, dim_context, rng: rng_from_seed(seed) }));
        BsStatus::Ok
    })
}

/// Releases a policy. Null is ignored.
///
/// # Safety
/// `policy` must be null or a handle from [`bs_policy_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_policy_free(policy: *mut BsPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Picks an arm for `context`. `propensity` may be null.
///
/// # Safety
/// `policy` must be a live handle and `context` must hold `dim_context` values.
#[no_mangle]
pub unsafe extern "C" fn bs_policy_select(
    policy: *mut BsPolicy,
    context: *const f64,
    dim_context: usize,
    action: *mut usize,
    propensity: *mut f64,
) -> BsStatus {
    guard(|| {
        let Some(policy) = policy.as_mut() else {
            return fail(BsStatus::NullPointer, "policy is null");
        };
        if action.is_null() {
            return fail(BsStatus::NullPointer, "action is null");
        }
        if dim_context != policy.dim_context {
            return from_sim(SimError::DimensionMismatch { expected: policy.dim_context, got: dim_context });
        }
        let x = tri!(slice(context, dim_context, "context"));
        let choice = tri!(policy.inner.select(x, &mut policy.rng).map_err(from_sim));
        *action = choice.action;
        if !propensity.is_null() {
            *propensity = choice.propensity;
        }
        BsStatus::Ok
    })
}

/// Feeds one observed binary reward back to the policy.
///
/// # Safety
/// `policy` must be a live handle and `context` must hold `dim_context` values.
#[no_mangle]
pub unsafe extern "C" fn bs_policy_update(
    policy: *mut BsPolicy,
    context: *const f64,
    dim_context: usize,
    action: usize,
    reward: u8,
) -> BsStatus {
    guard(|| {
        let Some(policy) = policy.as_mut() else {
            return fail(BsStatus::NullPointer, "policy is null");
        };
        if dim_context != policy.dim_context {
            return from_sim(SimError::DimensionMismatch { expected: policy.dim_context, got: dim_context });
        }
        let x = tri!(slice(context, dim_context, "context"));
        tri!(policy.inner.update(x, action, reward).map_err(from_sim));
        BsStatus::Ok
    })
}

/// Runs the experiment described by the TOML file at `config_path` and writes
/// its CSV files. `output_dir` overrides the configured directory when
/// non-null. Progress output is suppressed.
///
/// # Safety
/// Both strings must be NUL-terminated (or `output_dir` null).
#[no_mangle]
pub unsafe extern "C" fn bs_run_experiment(config_path: *const c_char, output_dir: *const c_char) -> BsStatus {
    guard(|| {
        let path = tri!(c_str(config_path, "config_path"));
        let mut config = match cli::load_config(Path::new(path)) {
            Ok(c) => c,
            Err(e) => return fail(BsStatus::Config, e.to_string()),
        };
        if !output_dir.is_null() {
            config.output_dir = tri!(c_str(output_dir, "output_dir")).into();
        }
        match cli::run_experiment(&config, true) {
            Ok(_) => BsStatus::Ok,
            Err(e) => {
                let status = match &e {
                    RunError::Config(_) => BsStatus::Config,
                    RunError::Io { .. } => BsStatus::Io,
                    _ => BsStatus::Simulation,
                };
                fail(status, e.to_string())
            }
        }
    })
}

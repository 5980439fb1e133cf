//! C ABI for the `difftd` crate.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` or
//! `difftd_run` call and released by the matching `*_free`. Every fallible
//! call returns a [`DifftdStatus`]; on failure the message is available from
//! [`difftd_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use difftd::dynamics::{step_with_noise, Model, RngStream, Trajectory};
use difftd::estimators::Estimator;
use difftd::harness::output::write_experiment;
use difftd::harness::{run_experiment, AlgorithmKind, ExperimentConfig, ExperimentResult, KeyValues};
use difftd::models::{ar1_value_oracle, ou_value_derivative_oracle};
use difftd::{Error, Vector};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DifftdStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad string encoding, wrong buffer length or a value outside its domain.
    InvalidArgument = 2,
    Config = 3,
    InsufficientRank = 4,
    /// The estimator or the simulated chain left the finite range.
    Divergence = 5,
    Io = 6,
    Panic = 7,
}

/// Key/value experiment configuration.
pub struct DifftdConfig {
    keys: KeyValues,
}

/// Replica table of a finished experiment.
pub struct DifftdResult {
    keys: KeyValues,
    result: ExperimentResult,
}

/// Online estimator bound to a model, fed one transition at a time.
pub struct DifftdEstimator {
    model: Box<dyn Model>,
    est: Box<dyn Estimator>,
    x: Vector,
    rng: RngStream,
    t: u64,
    param_len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DifftdStatus {
    match e {
        Error::Config(_) | Error::Parse(_) => DifftdStatus::Config,
        Error::Domain { .. } | Error::Dimension(_) => DifftdStatus::InvalidArgument,
        Error::InsufficientRank(_) => DifftdStatus::InsufficientRank,
        Error::Divergence { .. } | Error::NonFiniteState { .. } => DifftdStatus::Divergence,
        Error::Io { .. } => DifftdStatus::Io,
    }
}

struct Fail(DifftdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DifftdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DifftdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            DifftdStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(DifftdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(DifftdStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn check_len(len: usize, want: usize, what: &str) -> Result<(), Fail> {
    if len != want {
        return Err(Fail(
            DifftdStatus::InvalidArgument,
            format!("{what} has length {len}, expected {want}"),
        ));
    }
    Ok(())
}

unsafe fn write_out<T>(p: *mut T, v: T) {
    if !p.is_null() {
        *p = v;
    }
}

/// Message of the last failing call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn difftd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn difftd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Empty configuration; never null.
#[no_mangle]
pub extern "C" fn difftd_config_new() -> *mut DifftdConfig {
    Box::into_raw(Box::new(DifftdConfig { keys: KeyValues::default() }))
}

/// # Safety
/// `cfg` must come from [`difftd_config_new`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn difftd_config_free(cfg: *mut DifftdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets one key, e.g. `"algorithm.alpha"` to `"0.9"`. Unknown keys are a
/// `Config` error.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn difftd_config_set(
    cfg: *mut DifftdConfig,
    key: *const c_char,
    value: *const c_char,
) -> DifftdStatus {
    guard(|| {
        let cfg = handle_mut(cfg, "cfg")?;
        cfg.keys.set(str_arg(key, "key")?, str_arg(value, "value")?)?;
        Ok(())
    })
}

/// Merges a TOML file; keys already set are overwritten.
///
/// # Safety
/// `cfg` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn difftd_config_load(cfg: *mut DifftdConfig, path: *const c_char) -> DifftdStatus {
    guard(|| {
        let cfg = handle_mut(cfg, "cfg")?;
        let file = KeyValues::from_file(Path::new(str_arg(path, "path")?))?;
        for (k, v) in file.0 {
            cfg.keys.set(&k, v)?;
        }
        Ok(())
    })
}

/// Validates the configuration without running anything.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn difftd_config_validate(cfg: *const DifftdConfig) -> DifftdStatus {
    guard(|| {
        ExperimentConfig::from_keys(&handle(cfg, "cfg")?.keys)?;
        Ok(())
    })
}

/// Runs every replica. Worker count follows `DIFFTD_WORKERS`.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable. `*out` is set to null on
/// failure.
#[no_mangle]
pub unsafe extern "C" fn difftd_run(cfg: *const DifftdConfig, out: *mut *mut DifftdResult) -> DifftdStatus {
    write_out(out, ptr::null_mut());
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let keys = handle(cfg, "cfg")?.keys.clone();
        let exp = ExperimentConfig::from_keys(&keys)?;
        let result = run_experiment(&exp)?;
        *out = Box::into_raw(Box::new(DifftdResult { keys, result }));
        Ok(())
    })
}

/// # Safety
/// `res` must come from [`difftd_run`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn difftd_result_free(res: *mut DifftdResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Length of θ; 0 for a null handle.
///
/// # Safety
/// `res` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn difftd_result_param_len(res: *const DifftdResult) -> usize {
    res.as_ref().map_or(0, |r| r.result.param_len)
}

/// Last reporting time; 0 for a null handle.
///
/// # Safety
/// `res` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn difftd_result_horizon(res: *const DifftdResult) -> u64 {
    res.as_ref().map_or(0, |r| r.result.horizon())
}

/// Mean θ over the usable replicas at time `t`. `included` (optional)
/// receives the number of replicas averaged.
///
/// # Safety
/// `res` must be a live handle and `theta` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn difftd_result_mean_theta(
    res: *const DifftdResult,
    t: u64,
    theta: *mut f64,
    len: usize,
    included: *mut usize,
) -> DifftdStatus {
    guard(|| {
        let res = handle(res, "res")?;
        check_len(len, res.result.param_len, "theta")?;
        if !res.result.report_times.contains(&t) {
            return Err(Fail(DifftdStatus::InvalidArgument, format!("T={t} is not a reporting time")));
        }
        let rows = res.result.included_at(t);
        if rows.is_empty() {
            return Err(Fail(DifftdStatus::InsufficientRank, format!("no usable replica at T={t}")));
        }
        if theta.is_null() && len > 0 {
            return Err(null("theta"));
        }
        let out = std::slice::from_raw_parts_mut(theta, len);
        let n = rows.len() as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o = rows.iter().map(|r| r.theta[i]).sum::<f64>() / n;
        }
        write_out(included, rows.len());
        Ok(())
    })
}

/// Writes `replicas.csv`, the histograms and `summary.json` into `dir`.
///
/// # Safety
/// `res` must be a live handle; `dir` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn difftd_result_write(res: *const DifftdResult, dir: *const c_char) -> DifftdStatus {
    guard(|| {
        let res = handle(res, "res")?;
        write_experiment(Path::new(str_arg(dir, "dir")?), &res.keys.0, &res.result)?;
        Ok(())
    })
}

/// Streaming estimator for a discrete-time configuration. The internal chain
/// starts from `run.x0`, seeded as replica 0, and is burnt in by
/// `run.burn_in` steps, so advancing it `run.T` steps reproduces replica 0
/// of [`difftd_run`].
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn difftd_estimator_new(
    cfg: *const DifftdConfig,
    out: *mut *mut DifftdEstimator,
) -> DifftdStatus {
    write_out(out, ptr::null_mut());
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let exp = ExperimentConfig::from_keys(&handle(cfg, "cfg")?.keys)?;
        if exp.algorithm.kind == AlgorithmKind::CtGradLstd {
            return Err(Fail(
                DifftdStatus::Config,
                "ct_grad_lstd has no streaming handle; use difftd_run".into(),
            ));
        }
        let model = exp.build_model()?;
        let est = exp.build_estimator(model.as_ref())?;
        let param_len = exp.param_len(model.as_ref())?;
        let x0 = Vector::from_element(model.state_dim(), exp.run.x0);
        let mut traj = Trajectory::new(model.as_ref(), x0, RngStream::new(exp.run.seed, 0));
        traj.skip_steps(exp.run.burn_in)?;
        let (x, rng, t) = traj.into_parts();
        *out = Box::into_raw(Box::new(DifftdEstimator { model, est, x, rng, t, param_len }));
        Ok(())
    })
}

/// # Safety
/// `est` must come from [`difftd_estimator_new`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn difftd_estimator_free(est: *mut DifftdEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Simulates `n` transitions of the internal chain and feeds each one in.
///
/// # Safety
/// `est` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn difftd_estimator_advance(est: *mut DifftdEstimator, n: u64) -> DifftdStatus {
    guard(|| {
        let h = handle_mut(est, "est")?;
        let x = std::mem::replace(&mut h.x, Vector::zeros(0));
        let mut traj = Trajectory::resume(h.model.as_ref(), x, h.rng.clone(), h.t);
        let mut res = Ok(());
        for _ in 0..n {
            res = traj.next_step().and_then(|s| h.est.update(&s));
            if res.is_err() {
                break;
            }
        }
        let (x, rng, t) = traj.into_parts();
        (h.x, h.rng, h.t) = (x, rng, t);
        res.map_err(Fail::from)
    })
}

/// Feeds one externally observed transition: from state `x` under noise
/// `noise`. The internal chain is not moved.
///
/// # Safety
/// `est` must be a live handle; `x` and `noise` hold `x_len` and `noise_len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn difftd_estimator_push(
    est: *mut DifftdEstimator,
    x: *const f64,
    x_len: usize,
    noise: *const f64,
    noise_len: usize,
) -> DifftdStatus {
    guard(|| {
        let h = handle_mut(est, "est")?;
        check_len(x_len, h.model.state_dim(), "x")?;
        check_len(noise_len, h.model.noise_dim(), "noise")?;
        let x = Vector::from_column_slice(slice_arg(x, x_len, "x")?);
        let noise = Vector::from_column_slice(slice_arg(noise, noise_len, "noise")?);
        if !h.model.in_state_space(&x) || !noise.iter().all(|v| v.is_finite()) {
            return Err(Fail(DifftdStatus::InvalidArgument, "state or noise outside the model's range".into()));
        }
        let step = step_with_noise(h.model.as_ref(), &x, noise, h.est.steps() + 1)?;
        h.est.update(&step)?;
        Ok(())
    })
}

/// Transitions consumed so far; 0 for a null handle.
///
/// # Safety
/// `est` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn difftd_estimator_steps(est: *const DifftdEstimator) -> u64 {
    est.as_ref().map_or(0, |h| h.est.steps())
}

/// Length of θ; 0 for a null handle.
///
/// # Safety
/// `est` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn difftd_estimator_param_len(est: *const DifftdEstimator) -> usize {
    est.as_ref().map_or(0, |h| h.param_len)
}

/// Current fit `h(x) = θᵀψ(x) + κ` and average cost. `kappa` and `cbar` are
/// optional.
///
/// # Safety
/// `est` must be a live handle and `theta` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn difftd_estimator_fit(
    est: *const DifftdEstimator,
    theta: *mut f64,
    len: usize,
    kappa: *mut f64,
    cbar: *mut f64,
) -> DifftdStatus {
    guard(|| {
        let h = handle(est, "est")?;
        let fit = h.est.fit()?;
        check_len(len, fit.estimate.theta.len(), "theta")?;
        if theta.is_null() && len > 0 {
            return Err(null("theta"));
        }
        std::slice::from_raw_parts_mut(theta, len).copy_from_slice(fit.estimate.theta.as_slice());
        write_out(kappa, fit.estimate.kappa);
        write_out(cbar, fit.cbar);
        Ok(())
    })
}

/// Discounted value `θ x² + κ` of the AR(1) chain `X' = aX + N` with cost x².
///
/// # Safety
/// `theta` and `kappa` must be writable.
#[no_mangle]
pub unsafe extern "C" fn difftd_oracle_ar1(a: f64, alpha: f64, theta: *mut f64, kappa: *mut f64) -> DifftdStatus {
    guard(|| {
        if theta.is_null() || kappa.is_null() {
            return Err(null("output"));
        }
        let (t, k) = ar1_value_oracle(a, alpha)?;
        (*theta, *kappa) = (t, k);
        Ok(())
    })
}

/// Derivative at `x` of the discounted OU value function with cost x².
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn difftd_oracle_ou(beta: f64, gamma: f64, x: f64, out: *mut f64) -> DifftdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ou_value_derivative_oracle(beta, gamma, x)?;
        Ok(())
    })
}

//! C ABI for `shiftband`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_from_json` functions and released with the matching `*_free`. Every
//! fallible call returns a [`ShiftbandStatus`]; on failure the message is
//! available from [`shiftband_last_error`] on the same thread. Strings
//! returned through out-pointers are owned by the caller and must be released
//! with [`shiftband_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shiftband::config::{parse_json, ExperimentConfig, PolicySpec};
use shiftband::env::{EnvSpec, RewardModel};
use shiftband::ground_truth::{compute_significant_shifts_capped, GroundTruthReport};
use shiftband::harness::{build_policy, run_experiment, RunOptions};
use shiftband::rng::{Purpose, StreamKey, StreamRng};
use shiftband::{Error, Policy};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftbandStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Range = 4,
    Validation = 5,
    Resource = 6,
    Usage = 7,
    EndOfHorizon = 8,
    Numeric = 9,
    Io = 10,
    Internal = 11,
    Panic = 12,
}

impl From<&Error> for ShiftbandStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Range { .. } => ShiftbandStatus::Range,
            Error::Config(_) | Error::Json(_) => ShiftbandStatus::Config,
            Error::Validation(_) => ShiftbandStatus::Validation,
            Error::Resource { .. } => ShiftbandStatus::Resource,
            Error::Usage(_) => ShiftbandStatus::Usage,
            Error::EndOfHorizon => ShiftbandStatus::EndOfHorizon,
            Error::Numeric(_) => ShiftbandStatus::Numeric,
            Error::Io(_) | Error::Csv(_) => ShiftbandStatus::Io,
            _ => ShiftbandStatus::Internal,
        }
    }
}

/// An expanded reward environment.
pub struct ShiftbandModel {
    inner: RewardModel,
}

/// A running policy.
pub struct ShiftbandPolicy {
    inner: Box<dyn Policy>,
}

/// A seeded reward-noise stream.
pub struct ShiftbandRng {
    inner: StreamRng,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ShiftbandStatus, msg: impl Into<String>) -> ShiftbandStatus {
    set_error(msg.into());
    status
}

/// Run `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), ShiftbandStatus>) -> ShiftbandStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShiftbandStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(ShiftbandStatus::Panic, "panic inside shiftband"),
    }
}

fn check(e: Error) -> ShiftbandStatus {
    let status = ShiftbandStatus::from(&e);
    fail(status, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ShiftbandStatus> {
    if p.is_null() {
        return Err(fail(
            ShiftbandStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ShiftbandStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, ShiftbandStatus> {
    p.as_ref()
        .ok_or_else(|| fail(ShiftbandStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, ShiftbandStatus> {
    p.as_mut()
        .ok_or_else(|| fail(ShiftbandStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), ShiftbandStatus> {
    if out.is_null() {
        return Err(fail(ShiftbandStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), ShiftbandStatus> {
    let c =
        CString::new(s).map_err(|_| fail(ShiftbandStatus::Internal, "string has interior nul"))?;
    write_out(out, c.into_raw())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn shiftband_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shiftband_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shiftband_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Expand an environment spec (JSON) into a model.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftband_model_from_json(
    spec_json: *const c_char,
    out: *mut *mut ShiftbandModel,
) -> ShiftbandStatus {
    guard(|| {
        let text = str_arg(spec_json, "spec_json")?;
        let model = EnvSpec::from_json(text)
            .and_then(|s| s.expand())
            .map_err(check)?;
        write_out(
            out,
            Box::into_raw(Box::new(ShiftbandModel { inner: model })),
        )
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`shiftband_model_from_json`].
#[no_mangle]
pub unsafe extern "C" fn shiftband_model_free(model: *mut ShiftbandModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Horizon `T`, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shiftband_model_horizon(model: *const ShiftbandModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.horizon())
}

/// Number of arms `K`, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shiftband_model_num_arms(model: *const ShiftbandModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.num_arms())
}

/// True mean of `arm` (0-based) at round `t` (1-based).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftband_model_mean(
    model: *const ShiftbandModel,
    t: usize,
    arm: usize,
    out: *mut f64,
) -> ShiftbandStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let mu = m.inner.mean(t, arm).map_err(check)?;
        write_out(out, mu)
    })
}

/// Reward-noise stream for `(seed, trial)`.
#[no_mangle]
pub extern "C" fn shiftband_rng_new(seed: u64, trial: u64) -> *mut ShiftbandRng {
    Box::into_raw(Box::new(ShiftbandRng {
        inner: StreamKey::new(seed, trial, Purpose::RewardNoise).rng(),
    }))
}

/// # Safety
/// `rng` must be NULL or a handle from [`shiftband_rng_new`].
#[no_mangle]
pub unsafe extern "C" fn shiftband_rng_free(rng: *mut ShiftbandRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Draw a reward for `arm` at round `t`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftband_model_sample(
    model: *const ShiftbandModel,
    t: usize,
    arm: usize,
    rng: *mut ShiftbandRng,
    out: *mut f64,
) -> ShiftbandStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let r = handle_mut(rng, "rng")?;
        let y = m.inner.sample(t, arm, &mut r.inner).map_err(check)?;
        write_out(out, y)
    })
}

/// Ground-truth report as JSON. Horizons above `round_cap` fail with
/// `Resource`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftband_ground_truth_json(
    model: *const ShiftbandModel,
    round_cap: usize,
    out: *mut *mut c_char,
) -> ShiftbandStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let report = GroundTruthReport::compute(&m.inner, round_cap, false).map_err(check)?;
        let json = serde_json::to_string(&report).map_err(|e| check(e.into()))?;
        write_string(out, json)
    })
}

/// Build a policy for `model` from a policy spec (JSON, e.g.
/// `{"name": "meta"}`). Policies that need ground truth compute it here.
///
/// # Safety
/// `model` must be a live handle, `policy_json` a NUL-terminated string and
/// `out` writable. The policy does not borrow the model.
#[no_mangle]
pub unsafe extern "C" fn shiftband_policy_new(
    model: *const ShiftbandModel,
    policy_json: *const c_char,
    seed: u64,
    out: *mut *mut ShiftbandPolicy,
) -> ShiftbandStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let spec: PolicySpec = parse_json(str_arg(policy_json, "policy_json")?).map_err(check)?;
        let ann = if spec.name.needs_ground_truth() {
            Some(
                compute_significant_shifts_capped(
                    &m.inner,
                    shiftband::ground_truth::DEFAULT_ROUND_CAP,
                )
                .map_err(check)?,
            )
        } else {
            None
        };
        let policy = build_policy(&spec, &m.inner, ann.as_ref(), seed).map_err(check)?;
        write_out(
            out,
            Box::into_raw(Box::new(ShiftbandPolicy { inner: policy })),
        )
    })
}

/// # Safety
/// `policy` must be NULL or a handle from [`shiftband_policy_new`].
#[no_mangle]
pub unsafe extern "C" fn shiftband_policy_free(policy: *mut ShiftbandPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Choose the arm for the next round.
///
/// # Safety
/// `policy` must be a live handle; `out_arm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftband_policy_select(
    policy: *mut ShiftbandPolicy,
    out_arm: *mut usize,
) -> ShiftbandStatus {
    guard(|| {
        let p = handle_mut(policy, "policy")?;
        let arm = p.inner.select().map_err(check)?;
        write_out(out_arm, arm)
    })
}

/// Report the reward of the arm returned by the last select.
///
/// # Safety
/// `policy` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn shiftband_policy_observe(
    policy: *mut ShiftbandPolicy,
    arm: usize,
    reward: f64,
) -> ShiftbandStatus {
    guard(|| {
        let p = handle_mut(policy, "policy")?;
        p.inner.observe(arm, reward).map_err(check)
    })
}

/// Run an experiment config (JSON) and return the summary as JSON. Output
/// paths in the config are ignored.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shiftband_run_experiment_json(
    config_json: *const c_char,
    seed_offset: u64,
    out: *mut *mut c_char,
) -> ShiftbandStatus {
    guard(|| {
        let cfg =
            ExperimentConfig::from_json(str_arg(config_json, "config_json")?).map_err(check)?;
        let opts = RunOptions {
            seed_offset,
            ..RunOptions::default()
        };
        let result = run_experiment(&cfg, &opts).map_err(check)?;
        let json = serde_json::to_string(&result).map_err(|e| check(e.into()))?;
        write_string(out, json)
    })
}

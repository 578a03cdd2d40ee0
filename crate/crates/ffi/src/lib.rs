//! C ABI over the srlab library.
//!
//! Every function returns an [`SrlabStatus`]. On failure a message is kept
//! per thread and can be read with [`srlab_last_error`]. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use srlab::governor::{action_to_alpha, baseline_alpha, learned_raw_action, AlphaPolicy, AlphaRule, GovernorError};
use srlab::harness::{
    build_design, export_traces, run_episode, stream_rng, Design, EpisodeOptions, Failure, HarnessError, RunConfig,
    Stream,
};
use srlab::plant::STATE_DIM;
use srlab::sac::{load_model, ModelError, SacAgent};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Model = 5,
    Governor = 6,
    Runtime = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrlabPolicy {
    Conservative = 0,
    Baseline = 1,
    Learned = 2,
}

/// Outcome of one mission. `failure` is 0 on success, then 1 unstable,
/// 2 recovery timeout, 3 cycle cap.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SrlabEpisodeSummary {
    pub success: bool,
    pub failure: i32,
    pub mission_time: f64,
    pub cycles: u64,
    pub episode_return: f64,
    pub mean_alpha: f64,
    pub mean_mc_peak_est: f64,
    pub max_mc_est: f64,
    pub max_r_mpn: f64,
}

/// Gains, safety metric, closed loop and mission built from a configuration.
pub struct SrlabDesign {
    inner: Design,
}

/// A trained step-size policy.
pub struct SrlabModel {
    inner: Arc<SacAgent>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(SrlabStatus, String);

impl From<HarnessError> for Fail {
    fn from(e: HarnessError) -> Self {
        let status = match &e {
            HarnessError::Config(_) => SrlabStatus::Config,
            HarnessError::Io(_) => SrlabStatus::Io,
            HarnessError::Model(_) => SrlabStatus::Model,
            HarnessError::Governor(GovernorError::InvalidMission(_) | GovernorError::InvalidParameter(_)) => {
                SrlabStatus::InvalidArgument
            }
            HarnessError::Governor(_) => SrlabStatus::Governor,
            HarnessError::Runtime(_) => SrlabStatus::Runtime,
        };
        Fail(status, e.to_string())
    }
}

impl From<ModelError> for Fail {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Io(_) => SrlabStatus::Io,
            _ => SrlabStatus::Model,
        };
        Fail(status, e.to_string())
    }
}

impl From<GovernorError> for Fail {
    fn from(e: GovernorError) -> Self {
        HarnessError::from(e).into()
    }
}

fn null(what: &str) -> Fail {
    Fail(SrlabStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> SrlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrlabStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SrlabStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s =
        CStr::from_ptr(p).to_str().map_err(|_| Fail(SrlabStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn state_arg<'a>(p: *const f64, what: &str) -> Result<&'a [f64; STATE_DIM], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(&*(p as *const [f64; STATE_DIM]))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn srlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds the default design.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn srlab_design_new(out: *mut *mut SrlabDesign) -> SrlabStatus {
    guard(|| {
        let d = build_design(&RunConfig::default())?;
        write_out(out, Box::into_raw(Box::new(SrlabDesign { inner: d })))
    })
}

/// Builds a design from TOML text (no environment overrides).
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn srlab_design_from_toml(toml: *const c_char, out: *mut *mut SrlabDesign) -> SrlabStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| Fail(SrlabStatus::InvalidArgument, "toml is not UTF-8".into()))?;
        let cfg = RunConfig::from_toml(text)?;
        let d = build_design(&cfg)?;
        write_out(out, Box::into_raw(Box::new(SrlabDesign { inner: d })))
    })
}

/// # Safety
/// `design` must come from a design constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srlab_design_free(design: *mut SrlabDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// # Safety
/// `design` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn srlab_design_conservative_alpha(design: *const SrlabDesign, out: *mut f64) -> SrlabStatus {
    guard(|| {
        let d = design.as_ref().ok_or_else(|| null("design"))?;
        write_out(out, d.inner.conservative_alpha())
    })
}

/// # Safety
/// `design` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn srlab_design_alpha_max(design: *const SrlabDesign, out: *mut f64) -> SrlabStatus {
    guard(|| {
        let d = design.as_ref().ok_or_else(|| null("design"))?;
        write_out(out, d.inner.alpha_max)
    })
}

/// `‖x − c‖²_P` under the design's safety metric. Both vectors have 12
/// entries.
///
/// # Safety
/// `design` must be a live handle, `x` and `c` must point to 12 doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srlab_design_norm_sq(
    design: *const SrlabDesign,
    x: *const f64,
    c: *const f64,
    out: *mut f64,
) -> SrlabStatus {
    guard(|| {
        let d = design.as_ref().ok_or_else(|| null("design"))?;
        let (x, c) = (state_arg(x, "x")?, state_arg(c, "c")?);
        write_out(out, d.inner.metric.norm_sq(x, c))
    })
}

/// Step size of the baseline governor for an estimate and setpoint.
///
/// # Safety
/// `design` must be a live handle, `x_hat` and `x_sp` must point to 12
/// doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srlab_baseline_alpha(
    design: *const SrlabDesign,
    x_hat: *const f64,
    x_sp: *const f64,
    out: *mut f64,
) -> SrlabStatus {
    guard(|| {
        let d = design.as_ref().ok_or_else(|| null("design"))?;
        let a = baseline_alpha(state_arg(x_hat, "x_hat")?, state_arg(x_sp, "x_sp")?, &d.inner.metric)?;
        write_out(out, a)
    })
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn srlab_model_load(path: *const c_char, out: *mut *mut SrlabModel) -> SrlabStatus {
    guard(|| {
        let p = path_arg(path, "path")?;
        let agent = load_model(&p)?;
        write_out(out, Box::into_raw(Box::new(SrlabModel { inner: Arc::new(agent) })))
    })
}

/// # Safety
/// `model` must come from [`srlab_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srlab_model_free(model: *mut SrlabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Deterministic step size chosen by the model for the 12-entry state
/// `x̂ − x_sp`.
///
/// # Safety
/// `model` must be a live handle, `state` must point to 12 doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn srlab_model_alpha(model: *const SrlabModel, state: *const f64, out: *mut f64) -> SrlabStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let s = state_arg(state, "state")?;
        if m.inner.state_dim() != STATE_DIM {
            return Err(Fail(SrlabStatus::Model, format!("model expects state dim {}", m.inner.state_dim())));
        }
        let mut rng = stream_rng(0, Stream::Policy);
        let raw = learned_raw_action(Some(&m.inner), s, true, &mut rng)?;
        write_out(out, action_to_alpha(raw, m.inner.hyper.alpha_max))
    })
}

/// Flies one mission with the chosen policy. `model` is required for
/// [`SrlabPolicy::Learned`] and ignored otherwise. When `trace_path` is not
/// null the full trace is written there as CSV.
///
/// # Safety
/// `design` must be a live handle, `model` null or live, `trace_path` null
/// or NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn srlab_run_episode(
    design: *const SrlabDesign,
    policy: SrlabPolicy,
    model: *const SrlabModel,
    seed: u64,
    trace_path: *const c_char,
    out: *mut SrlabEpisodeSummary,
) -> SrlabStatus {
    guard(|| {
        let d = &design.as_ref().ok_or_else(|| null("design"))?.inner;
        let pol = match policy {
            SrlabPolicy::Conservative => AlphaPolicy::new(AlphaRule::Conservative, d.alpha_max)?,
            SrlabPolicy::Baseline => AlphaPolicy::new(AlphaRule::Baseline, d.alpha_max)?,
            SrlabPolicy::Learned => {
                let m = model.as_ref().ok_or_else(|| null("model"))?;
                AlphaPolicy::learned(m.inner.clone())?
            }
        };
        let trace = if trace_path.is_null() { None } else { Some(path_arg(trace_path, "trace_path")?) };
        let opts =
            EpisodeOptions { seed, deterministic: true, decimation: usize::from(trace.is_some()), cycle_cap: 200 };
        let (res, traces) = run_episode(d, &pol, &opts)?;
        if let Some(p) = trace {
            export_traces(&traces, &p)?;
        }
        let n = res.records.len().max(1) as f64;
        let summary = SrlabEpisodeSummary {
            success: res.success(),
            failure: match res.failure() {
                None => 0,
                Some(Failure::Unstable) => 1,
                Some(Failure::ScTimeout) => 2,
                Some(Failure::CycleCap) => 3,
            },
            mission_time: res.mission_time,
            cycles: res.cycles() as u64,
            episode_return: res.episode_return,
            mean_alpha: res.records.iter().map(|r| r.alpha).sum::<f64>() / n,
            mean_mc_peak_est: res.mean_mc_peak_est(),
            max_mc_est: res.max_mc_est(),
            max_r_mpn: res.max_r_mpn(),
        };
        write_out(out, summary)
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

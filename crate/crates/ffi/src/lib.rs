//! C ABI over the `dwlab` core.
//!
//! Every fallible entry point returns a [`DwlabStatus`]; on failure the
//! message is kept per thread and read back with [`dwlab_last_error`].
//! Panics are caught at the boundary and reported as [`DwlabStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dwlab::coeffs::{CoefficientSet, Perturbation};
use dwlab::config::RunConfig;
use dwlab::dynamics::{DynamicsError, Simulator, StepControl};
use dwlab::pipeline::{self, Outcome, PipelineError};

/// Result codes shared by all entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed configuration JSON or schema error.
    Config = 3,
    /// Well-formed configuration that fails validation.
    Validation = 4,
    /// The solution exceeded the blow-up ceiling.
    Blowup = 5,
    /// Any other numerical failure (step budget, invalid step).
    Numeric = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Outcome of a full pipeline run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwlabOutcome {
    Completed = 0,
    Blowup = 1,
    UnderflowCapped = 2,
}

/// Predicted rates of a configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DwlabRates {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Predicted decay exponent `n/4 + λ` of the profile error.
    pub exponent: f64,
}

/// Damping quantities at one physical time.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DwlabDamping {
    pub b: f64,
    pub big_b: f64,
    /// Similarity time `log(B + 1)`.
    pub s: f64,
    pub eps: f64,
    pub drag: f64,
}

/// Opaque simulator handle.
pub struct DwlabSim {
    sim: Simulator,
    coeffs: CoefficientSet,
    control: StepControl,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: DwlabStatus, msg: impl Into<String>) -> DwlabStatus {
    set_error(msg);
    status
}

/// Runs `f` behind a panic guard, clearing the error slot first.
fn guarded(f: impl FnOnce() -> DwlabStatus) -> DwlabStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(DwlabStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `s` must be null or a NUL-terminated string valid for reads.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, DwlabStatus> {
    if s.is_null() {
        return Err(fail(DwlabStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(DwlabStatus::InvalidUtf8, e.to_string()))
}

fn load_config(text: &str) -> Result<RunConfig, DwlabStatus> {
    let cfg = RunConfig::from_json_str(text).map_err(|e| fail(DwlabStatus::Config, e.to_string()))?;
    let report = cfg.validate();
    if !report.ok() {
        let msg = report
            .errors
            .iter()
            .map(|i| format!("{}: {}", i.path, i.message))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(fail(DwlabStatus::Validation, msg));
    }
    Ok(cfg)
}

fn dynamics_status(e: DynamicsError) -> DwlabStatus {
    let status = match e {
        DynamicsError::BlowUp { .. } => DwlabStatus::Blowup,
        _ => DwlabStatus::Numeric,
    };
    fail(status, e.to_string())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next `dwlab_*` call on the same thread.
#[no_mangle]
pub extern "C" fn dwlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dwlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a simulator from configuration JSON, with the configured initial
/// data at `t = 0`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dwlab_sim_new(config_json: *const c_char, out: *mut *mut DwlabSim) -> DwlabStatus {
    guarded(|| {
        if out.is_null() {
            return fail(DwlabStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let cfg = match read_str(config_json).and_then(load_config) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let built = (|| {
            let grid = cfg.grid().map_err(|e| e.to_string())?;
            let problem = cfg.problem().map_err(|e| e.to_string())?;
            let state = cfg.initial_data().generate(&grid).map_err(|e| e.to_string())?;
            let coeffs = problem.coeffs.clone();
            let sim = Simulator::new(problem, &state).map_err(|e| e.to_string())?;
            Ok::<_, String>(DwlabSim {
                sim,
                coeffs,
                control: cfg.step_control(),
            })
        })();
        match built {
            Ok(h) => {
                *out = Box::into_raw(Box::new(h));
                DwlabStatus::Ok
            }
            Err(msg) => fail(DwlabStatus::Validation, msg),
        }
    })
}

/// Releases a handle from [`dwlab_sim_new`]. Null is ignored.
///
/// # Safety
/// `sim` must be null or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn dwlab_sim_free(sim: *mut DwlabSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances to the physical time matching similarity time `s`.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dwlab_sim_advance_to_s(sim: *mut DwlabSim, s: f64) -> DwlabStatus {
    guarded(|| {
        let Some(h) = sim.as_mut() else {
            return fail(DwlabStatus::NullPointer, "null simulator");
        };
        let t = h.coeffs.t_of_s(s);
        if !t.is_finite() {
            return fail(DwlabStatus::Numeric, format!("s = {s} maps to no finite time"));
        }
        match h.sim.advance_to(t, &h.control) {
            Ok(()) => DwlabStatus::Ok,
            Err(e) => dynamics_status(e),
        }
    })
}

/// Current physical time, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dwlab_sim_time(sim: *const DwlabSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |h| h.sim.time())
}

/// Number of grid samples per field, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dwlab_sim_len(sim: *const DwlabSim) -> usize {
    sim.as_ref().map_or(0, |h| h.sim.grid().len())
}

/// Copies `u` and `u_t` (row-major) into caller buffers of `len` doubles.
/// Either buffer may be null to skip it.
///
/// # Safety
/// `sim` must be a live handle; non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dwlab_sim_copy_state(
    sim: *const DwlabSim,
    u: *mut f64,
    p: *mut f64,
    len: usize,
) -> DwlabStatus {
    guarded(|| {
        let Some(h) = sim.as_ref() else {
            return fail(DwlabStatus::NullPointer, "null simulator");
        };
        let need = h.sim.grid().len();
        if len < need {
            return fail(DwlabStatus::BufferTooSmall, format!("need {need} doubles, got {len}"));
        }
        let state = h.sim.state();
        if !u.is_null() {
            ptr::copy_nonoverlapping(state.u.data.as_ptr(), u, need);
        }
        if !p.is_null() {
            ptr::copy_nonoverlapping(state.p.data.as_ptr(), p, need);
        }
        DwlabStatus::Ok
    })
}

/// Predicted rates for a configuration.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dwlab_rates_predict(config_json: *const c_char, out: *mut DwlabRates) -> DwlabStatus {
    guarded(|| {
        let Some(out) = out.as_mut() else {
            return fail(DwlabStatus::NullPointer, "null output");
        };
        let cfg = match read_str(config_json).and_then(load_config) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match cfg.rates() {
            Ok(r) => {
                *out = DwlabRates {
                    lambda0: r.lambda0,
                    lambda1: r.lambda1,
                    lambda: r.lambda,
                    eta: r.eta,
                    exponent: r.exponent,
                };
                DwlabStatus::Ok
            }
            Err(e) => fail(DwlabStatus::Validation, e.to_string()),
        }
    })
}

/// Power-law damping `b = μ(1+t)^{-β}` and its derived quantities at `t`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dwlab_damping(beta: f64, mu: f64, t: f64, out: *mut DwlabDamping) -> DwlabStatus {
    guarded(|| {
        let Some(out) = out.as_mut() else {
            return fail(DwlabStatus::NullPointer, "null output");
        };
        if t.is_nan() || t < 0.0 {
            return fail(DwlabStatus::Validation, format!("t must be non-negative, got {t}"));
        }
        let coeffs = match CoefficientSet::new(1, beta, mu, Perturbation::none(1)) {
            Ok(c) => c,
            Err(e) => return fail(DwlabStatus::Validation, e.to_string()),
        };
        let s = coeffs.s_of_t(t);
        let w = coeffs.scaled_weights(s);
        *out = DwlabDamping {
            b: coeffs.b(t),
            big_b: coeffs.big_b(t),
            s,
            eps: w.eps,
            drag: w.drag,
        };
        DwlabStatus::Ok
    })
}

/// Physical time reached at similarity time `s`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dwlab_t_of_s(beta: f64, mu: f64, s: f64, out: *mut f64) -> DwlabStatus {
    guarded(|| {
        let Some(out) = out.as_mut() else {
            return fail(DwlabStatus::NullPointer, "null output");
        };
        match CoefficientSet::new(1, beta, mu, Perturbation::none(1)) {
            Ok(c) => {
                *out = c.t_of_s(s);
                DwlabStatus::Ok
            }
            Err(e) => fail(DwlabStatus::Validation, e.to_string()),
        }
    })
}

/// Full pipeline into `out_root/<id>`; `outcome` may be null. A blow-up is
/// reported through `outcome` with status `Ok`.
///
/// # Safety
/// Both strings must be NUL-terminated; `outcome` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn dwlab_run(
    config_json: *const c_char,
    out_root: *const c_char,
    outcome: *mut DwlabOutcome,
) -> DwlabStatus {
    guarded(|| {
        let cfg = match read_str(config_json).and_then(load_config) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let root = match read_str(out_root) {
            Ok(r) => r,
            Err(s) => return s,
        };
        match pipeline::run(&cfg, Path::new(root)) {
            Ok(summary) => {
                if let Some(o) = outcome.as_mut() {
                    *o = match summary.outcome {
                        Outcome::Completed => DwlabOutcome::Completed,
                        Outcome::Blowup => DwlabOutcome::Blowup,
                        Outcome::UnderflowCapped => DwlabOutcome::UnderflowCapped,
                    };
                }
                DwlabStatus::Ok
            }
            Err(e) => {
                let status = match &e {
                    PipelineError::Config(_) => DwlabStatus::Config,
                    PipelineError::Validation(_) => DwlabStatus::Validation,
                    PipelineError::Io(_) | PipelineError::Csv(_) | PipelineError::Missing(_) => DwlabStatus::Io,
                    _ => DwlabStatus::Numeric,
                };
                fail(status, e.to_string())
            }
        }
    })
}

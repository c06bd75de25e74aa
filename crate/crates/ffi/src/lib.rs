//! C ABI over `sddhopf`.
//!
//! Every call returns an [`SddStatus`]. Results go through out-pointers;
//! objects are opaque handles released with their `_free` function. After a
//! failed call, `sdd_last_error` describes the failure for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sddhopf::cli::{self, equilibrium_report, normal_form_report, simulate, stability_report};
use sddhopf::config::{ParamSpec, RunConfig};
use sddhopf::dde::Trajectory;
use sddhopf::normal_form::Direction;
use sddhopf::Error;

/// Result code of every call. Values 0 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SddStatus {
    Ok = 0,
    Config = 1,
    Solver = 2,
    Resonance = 3,
    Integration = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Run configuration handle.
pub struct SddModel {
    config: RunConfig,
}

/// Simulation result handle.
pub struct SddTrajectory {
    inner: Trajectory,
    completed: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SddEquilibrium {
    pub r_star: f64,
    pub xi_star: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SddHopf {
    pub eps0: f64,
    pub omega: f64,
    pub l: f64,
    pub dalpha_deps: f64,
}

/// `direction`: -1 supercritical, 1 subcritical, 0 degenerate. `c0` is NaN
/// when `Re kappa3` has no sign change.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SddNormalForm {
    pub c: f64,
    pub kappa1_re: f64,
    pub kappa1_im: f64,
    pub kappa3_re: f64,
    pub kappa3_im: f64,
    pub direction: i32,
    pub c0: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> SddStatus {
    let status = match cli::exit_code(&e) {
        1 => SddStatus::Config,
        3 => SddStatus::Resonance,
        4 => SddStatus::Integration,
        _ => SddStatus::Solver,
    };
    set_error(e.to_string());
    status
}

fn guard(f: impl FnOnce() -> SddStatus) -> SddStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_default()));
            SddStatus::Panic
        }
    }
}

fn null(what: &str) -> SddStatus {
    set_error(format!("null pointer: {what}"));
    SddStatus::NullPointer
}

fn into_handle<T>(value: T, out: *mut *mut T) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 if there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sdd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Reference Hes1 model with the given `c` and `eps`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdd_model_hes1(c: f64, eps: f64, out: *mut *mut SddModel) -> SddStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let mut config = RunConfig::hes1_reference();
        config.model.c = ParamSpec::Value(c);
        config.model.eps = ParamSpec::Value(eps);
        if let Err(e) = config.model.params(c, eps) {
            return fail(e);
        }
        into_handle(SddModel { config }, out);
        SddStatus::Ok
    })
}

/// Model from a JSON run configuration (the command-line config format).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdd_model_from_json(json: *const c_char, out: *mut *mut SddModel) -> SddStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return null("json or out");
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => return fail(Error::Config(format!("config is not UTF-8: {e}"))),
        };
        match RunConfig::from_json(text) {
            Ok(config) => {
                into_handle(SddModel { config }, out);
                SddStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdd_model_free(model: *mut SddModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Sets `c` and `eps` to plain values.
///
/// # Safety
/// `model` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sdd_model_set(model: *mut SddModel, c: f64, eps: f64) -> SddStatus {
    guard(|| {
        let Some(m) = model.as_mut() else { return null("model") };
        if let Err(e) = m.config.model.params(c, eps) {
            return fail(e);
        }
        m.config.model.c = ParamSpec::Value(c);
        m.config.model.eps = ParamSpec::Value(eps);
        SddStatus::Ok
    })
}

/// # Safety
/// `model` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdd_equilibrium(model: *const SddModel, out: *mut SddEquilibrium) -> SddStatus {
    guard(|| {
        let (Some(m), Some(out)) = (model.as_ref(), out.as_mut()) else { return null("model or out") };
        match equilibrium_report(&m.config) {
            Ok(r) => {
                let [f1, f2, f3] = r.f_derivatives;
                let [g1, g2, g3] = r.g_derivatives;
                *out = SddEquilibrium { r_star: r.r_star, xi_star: r.xi_star, f1, f2, f3, g1, g2, g3 };
                SddStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// First Hopf point. Fails with `SDD_STATUS_SOLVER` when the steady state is
/// stable for every delay.
///
/// # Safety
/// `model` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdd_hopf(model: *const SddModel, out: *mut SddHopf) -> SddStatus {
    guard(|| {
        let (Some(m), Some(out)) = (model.as_ref(), out.as_mut()) else { return null("model or out") };
        match stability_report(&m.config) {
            Ok(r) => match r.hopf {
                Some(h) => {
                    *out = SddHopf { eps0: h.eps0, omega: h.omega, l: h.l, dalpha_deps: h.dalpha_deps };
                    SddStatus::Ok
                }
                None => {
                    set_error("steady state is stable for all eps; no Hopf point".into());
                    SddStatus::Solver
                }
            },
            Err(e) => fail(e),
        }
    })
}

/// Normal form at the model's `c`.
///
/// # Safety
/// `model` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdd_normal_form(model: *const SddModel, out: *mut SddNormalForm) -> SddStatus {
    guard(|| {
        let (Some(m), Some(out)) = (model.as_ref(), out.as_mut()) else { return null("model or out") };
        match normal_form_report(&m.config) {
            Ok(r) => {
                let direction = match r.direction {
                    Direction::Supercritical => -1,
                    Direction::Subcritical => 1,
                    Direction::Degenerate => 0,
                };
                *out = SddNormalForm {
                    c: r.c,
                    kappa1_re: r.kappa1.re,
                    kappa1_im: r.kappa1.im,
                    kappa3_re: r.kappa3.re,
                    kappa3_im: r.kappa3.im,
                    direction,
                    c0: r.c0.unwrap_or(f64::NAN),
                };
                SddStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs the model's simulation settings. A run that stops early still
/// yields a trajectory; check `sdd_trajectory_completed`.
///
/// # Safety
/// `model` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdd_simulate(model: *const SddModel, out: *mut *mut SddTrajectory) -> SddStatus {
    guard(|| {
        let Some(m) = model.as_ref() else { return null("model") };
        if out.is_null() {
            return null("out");
        }
        match simulate(&m.config) {
            Ok((report, inner)) => {
                let completed = report.status.is_completed();
                if !completed {
                    set_error(format!("{:?}", report.status));
                }
                into_handle(SddTrajectory { inner, completed }, out);
                SddStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `traj` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdd_trajectory_free(traj: *mut SddTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sdd_trajectory_len(traj: *const SddTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.times.len())
}

/// 1 if the run reached its end time, 0 otherwise.
///
/// # Safety
/// `traj` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sdd_trajectory_completed(traj: *const SddTrajectory) -> i32 {
    traj.as_ref().map_or(0, |t| t.completed as i32)
}

/// Copies up to `cap` samples into the four column buffers (time, first and
/// second state component, delay). Any buffer may be null to skip it.
/// `written` receives the number of rows copied.
///
/// # Safety
/// Non-null buffers must be valid for `cap` doubles; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sdd_trajectory_copy(
    traj: *const SddTrajectory,
    t: *mut f64,
    x: *mut f64,
    y: *mut f64,
    delay: *mut f64,
    cap: usize,
    written: *mut usize,
) -> SddStatus {
    guard(|| {
        let (Some(tr), Some(written)) = (traj.as_ref(), written.as_mut()) else { return null("traj or written") };
        let tr = &tr.inner;
        let n = tr.times.len().min(cap);
        for i in 0..n {
            if !t.is_null() {
                *t.add(i) = tr.times[i];
            }
            if !x.is_null() {
                *x.add(i) = tr.states[i][0];
            }
            if !y.is_null() {
                *y.add(i) = tr.states[i][1];
            }
            if !delay.is_null() {
                *delay.add(i) = tr.delays[i];
            }
        }
        *written = n;
        SddStatus::Ok
    })
}

/// Which report `sdd_report_json` produces.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SddReport {
    Equilibrium = 0,
    Stability = 1,
    NormalForm = 2,
    Simulate = 3,
    Sweep = 4,
}

/// The command-line JSON report for the model; free the string with
/// `sdd_string_free`.
///
/// # Safety
/// `model` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdd_report_json(model: *const SddModel, kind: SddReport, out: *mut *mut c_char) -> SddStatus {
    guard(|| {
        let Some(m) = model.as_ref() else { return null("model") };
        if out.is_null() {
            return null("out");
        }
        let cfg = &m.config;
        let text = match kind {
            SddReport::Equilibrium => equilibrium_report(cfg).map(|r| serde_json::to_string(&r)),
            SddReport::Stability => stability_report(cfg).map(|r| serde_json::to_string(&r)),
            SddReport::NormalForm => normal_form_report(cfg).map(|r| serde_json::to_string(&r)),
            SddReport::Simulate => simulate(cfg).map(|(r, _)| serde_json::to_string(&r)),
            SddReport::Sweep => cli::run_sweep(cfg).map(|r| serde_json::to_string(&r)),
        };
        match text {
            Ok(Ok(s)) => {
                *out = CString::new(s).expect("JSON has no NUL").into_raw();
                SddStatus::Ok
            }
            Ok(Err(e)) => fail(Error::Config(e.to_string())),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

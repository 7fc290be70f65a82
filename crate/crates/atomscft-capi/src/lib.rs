//! C ABI over the atomscft runner: opaque handles, status codes, and a
//! thread-local error string. The generated header lands in
//! `include/atomscft.h`.
//!
//! Conventions:
//! - Handles come from `*_new`/`atomscft_run` and must be released with the
//!   matching `*_free`. `NULL` is always safe to free.
//! - Functions that can fail return [`AtomscftStatus`]; anything but `Ok`
//!   leaves a message readable via [`atomscft_last_error`], valid on the
//!   calling thread until the next call into this library.
//! - Scalar getters on a `NULL` handle return 0/NaN and set the error
//!   message instead of crashing.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use atomscft::config::RunConfig;
use atomscft::runner::{evaluate, Evaluation};
use atomscft::solver::density_at;

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomscftStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Key or value rejected by the configuration schema.
    InvalidConfig = 3,
    /// The solver could not produce a result (bad setup, linear algebra
    /// failure, or an internal panic). Non-convergence is NOT a failure;
    /// check `atomscft_result_converged`.
    RunFailed = 4,
    /// Pair index past the end of the result.
    OutOfRange = 5,
}

/// Run configuration handle. Starts at the library defaults; set fields by
/// key with `atomscft_config_set`.
pub struct AtomscftConfig(RunConfig);

/// A finished run: converged state, energy table, comparisons.
pub struct AtomscftResult(Evaluation);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(sanitized).unwrap());
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::default());
}

/// Message for the most recent failure on this thread, as a NUL-terminated
/// string. Empty when the last call succeeded. The pointer stays valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn atomscft_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn atomscft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// New configuration with default parameters (desk-scale basis, beta = 50).
/// Free with `atomscft_config_free`.
#[no_mangle]
pub extern "C" fn atomscft_config_new() -> *mut AtomscftConfig {
    clear_error();
    Box::into_raw(Box::new(AtomscftConfig(RunConfig::default())))
}

/// Release a configuration. NULL is a no-op.
///
/// # Safety
/// `cfg` must be a pointer from `atomscft_config_new` that has not been
/// freed, or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_config_free(cfg: *mut AtomscftConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, AtomscftStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is NULL"));
        return Err(AtomscftStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        AtomscftStatus::InvalidUtf8
    })
}

/// Set one configuration field. Keys and values use the same schema as the
/// CLI's config files (`element`, `beta`, `g0`, `mixing`, `tol`, `max_iter`,
/// `basis`, `grid`, ...); see the README for the full list.
///
/// # Safety
/// `cfg` must be a live configuration handle; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn atomscft_config_set(
    cfg: *mut AtomscftConfig,
    key: *const c_char,
    value: *const c_char,
) -> AtomscftStatus {
    clear_error();
    let Some(cfg) = cfg.as_mut() else {
        set_error("config handle is NULL");
        return AtomscftStatus::NullArgument;
    };
    let key = match utf8_arg(key, "key") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let value = match utf8_arg(value, "value") {
        Ok(s) => s,
        Err(status) => return status,
    };
    match cfg.0.set(key, value) {
        Ok(()) => AtomscftStatus::Ok,
        Err(err) => {
            set_error(&err.to_string());
            AtomscftStatus::InvalidConfig
        }
    }
}

/// Render the configuration in the config-file syntax. Free the returned
/// string with `atomscft_string_free`; NULL input yields NULL.
///
/// # Safety
/// `cfg` must be a live configuration handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_config_to_text(cfg: *const AtomscftConfig) -> *mut c_char {
    clear_error();
    let Some(cfg) = cfg.as_ref() else {
        set_error("config handle is NULL");
        return std::ptr::null_mut();
    };
    match CString::new(cfg.0.to_kv_string()) {
        Ok(s) => s.into_raw(),
        Err(_) => {
            set_error("configuration text contains NUL");
            std::ptr::null_mut()
        }
    }
}

/// Run the solver to convergence (or the iteration cap) and hand back a
/// result handle in `*out`. The run is synchronous and can take seconds to
/// minutes at desk scale. Non-convergence still produces a result; inspect
/// `atomscft_result_converged`. Free the result with `atomscft_result_free`.
///
/// # Safety
/// `cfg` must be a live configuration handle and `out` a valid location to
/// store the result pointer.
#[no_mangle]
pub unsafe extern "C" fn atomscft_run(
    cfg: *const AtomscftConfig,
    out: *mut *mut AtomscftResult,
) -> AtomscftStatus {
    clear_error();
    if out.is_null() {
        set_error("out pointer is NULL");
        return AtomscftStatus::NullArgument;
    }
    *out = std::ptr::null_mut();
    let Some(cfg) = cfg.as_ref() else {
        set_error("config handle is NULL");
        return AtomscftStatus::NullArgument;
    };
    // the solver is pure compute; catch panics rather than abort the host
    let outcome = catch_unwind(AssertUnwindSafe(|| evaluate(&cfg.0)));
    match outcome {
        Ok(Ok(eval)) => {
            *out = Box::into_raw(Box::new(AtomscftResult(eval)));
            AtomscftStatus::Ok
        }
        Ok(Err(err)) => {
            set_error(&err.to_string());
            AtomscftStatus::RunFailed
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            AtomscftStatus::RunFailed
        }
    }
}

/// Release a result. NULL is a no-op.
///
/// # Safety
/// `res` must be a pointer from `atomscft_run` that has not been freed, or
/// NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_free(res: *mut AtomscftResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

unsafe fn result_ref<'a>(res: *const AtomscftResult) -> Option<&'a Evaluation> {
    match res.as_ref() {
        Some(r) => Some(&r.0),
        None => {
            set_error("result handle is NULL");
            None
        }
    }
}

/// 1 if the run met its tolerance, 0 if it hit the iteration cap (or the
/// handle is NULL).
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_converged(res: *const AtomscftResult) -> c_int {
    clear_error();
    result_ref(res).map_or(0, |ev| ev.report.converged as c_int)
}

/// Number of SCF iterations performed.
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_iterations(res: *const AtomscftResult) -> u32 {
    clear_error();
    result_ref(res).map_or(0, |ev| ev.report.iterations as u32)
}

/// Final max-abs density-coefficient change.
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_residual(res: *const AtomscftResult) -> f64 {
    clear_error();
    result_ref(res).map_or(f64::NAN, |ev| ev.report.residual)
}

/// Total free energy in Hartree (negative for bound atoms).
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_free_energy(res: *const AtomscftResult) -> f64 {
    clear_error();
    result_ref(res).map_or(f64::NAN, |ev| ev.report.free_energy)
}

/// Binding energy in Hartree (positive for bound atoms).
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_binding(res: *const AtomscftResult) -> f64 {
    clear_error();
    result_ref(res).map_or(f64::NAN, |ev| ev.report.binding)
}

/// Total kinetic energy in Hartree.
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_kinetic(res: *const AtomscftResult) -> f64 {
    clear_error();
    result_ref(res).map_or(f64::NAN, |ev| ev.report.kinetic)
}

/// Lieb-Thirring constraint ratio (<= 1 for valid densities).
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_ratio1(res: *const AtomscftResult) -> f64 {
    clear_error();
    result_ref(res).map_or(f64::NAN, |ev| ev.report.ratio1)
}

/// von Weizsacker constraint ratio (<= 1, = 1 for a single pair).
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_ratio2(res: *const AtomscftResult) -> f64 {
    clear_error();
    result_ref(res).map_or(f64::NAN, |ev| ev.report.ratio2)
}

/// Number of electron pairs (ceil(Z/2)).
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_pair_count(res: *const AtomscftResult) -> usize {
    clear_error();
    result_ref(res).map_or(0, |ev| ev.report.pair_electrons.len())
}

/// Free energy of one pair, indexed most bound first (matching the report).
///
/// # Safety
/// `res` must be a live result handle; `out` must be a valid f64 location.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_pair_free_energy(
    res: *const AtomscftResult,
    pair: usize,
    out: *mut f64,
) -> AtomscftStatus {
    clear_error();
    if out.is_null() {
        set_error("out pointer is NULL");
        return AtomscftStatus::NullArgument;
    }
    let Some(ev) = result_ref(res) else {
        return AtomscftStatus::NullArgument;
    };
    match ev.report.energy.pairs.get(pair) {
        Some(row) => {
            *out = row.f;
            AtomscftStatus::Ok
        }
        None => {
            set_error(&format!(
                "pair {pair} out of range ({} pairs)",
                ev.report.energy.pairs.len()
            ));
            AtomscftStatus::OutOfRange
        }
    }
}

/// Electron count of one pair (1 or 2), indexed most bound first.
///
/// # Safety
/// `res` must be a live result handle; `out` must be a valid u32 location.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_pair_electrons(
    res: *const AtomscftResult,
    pair: usize,
    out: *mut u32,
) -> AtomscftStatus {
    clear_error();
    if out.is_null() {
        set_error("out pointer is NULL");
        return AtomscftStatus::NullArgument;
    }
    let Some(ev) = result_ref(res) else {
        return AtomscftStatus::NullArgument;
    };
    match ev.report.pair_electrons.get(pair) {
        Some(&n) => {
            *out = n;
            AtomscftStatus::Ok
        }
        None => {
            set_error(&format!(
                "pair {pair} out of range ({} pairs)",
                ev.report.pair_electrons.len()
            ));
            AtomscftStatus::OutOfRange
        }
    }
}

/// Evaluate a converged pair density at a spherical-coordinate point
/// (Bohr radii, radians). `pair` indexes most bound first; pass -1 for the
/// total density. Densities come from the thermal eigenstate expansion and
/// are nonnegative.
///
/// # Safety
/// `res` must be a live result handle; `out` must be a valid f64 location.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_density_at(
    res: *const AtomscftResult,
    pair: isize,
    r: f64,
    theta: f64,
    phi: f64,
    out: *mut f64,
) -> AtomscftStatus {
    clear_error();
    if out.is_null() {
        set_error("out pointer is NULL");
        return AtomscftStatus::NullArgument;
    }
    let Some(ev) = result_ref(res) else {
        return AtomscftStatus::NullArgument;
    };
    let eval_one = |mu: usize| {
        let sol = &ev.state.pairs[mu];
        density_at(
            &ev.ctx.basis,
            &sol.prop,
            &sol.eig,
            ev.state.electrons[mu],
            r,
            theta,
            phi,
        )
    };
    if pair < 0 {
        *out = (0..ev.state.pairs.len()).map(eval_one).sum();
        return AtomscftStatus::Ok;
    }
    match ev.pair_order.get(pair as usize) {
        Some(&mu) => {
            *out = eval_one(mu);
            AtomscftStatus::Ok
        }
        None => {
            set_error(&format!("pair {pair} out of range ({} pairs)", ev.pair_order.len()));
            AtomscftStatus::OutOfRange
        }
    }
}

/// Full run report as pretty-printed JSON, the same document the CLI writes
/// to `report.json`. Free with `atomscft_string_free`; NULL on failure.
///
/// # Safety
/// `res` must be a live result handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_result_report_json(res: *const AtomscftResult) -> *mut c_char {
    clear_error();
    let Some(ev) = result_ref(res) else {
        return std::ptr::null_mut();
    };
    let json = match serde_json::to_string_pretty(&ev.report) {
        Ok(s) => s,
        Err(err) => {
            set_error(&err.to_string());
            return std::ptr::null_mut();
        }
    };
    match CString::new(json) {
        Ok(s) => s.into_raw(),
        Err(_) => {
            set_error("report contains NUL");
            std::ptr::null_mut()
        }
    }
}

/// Release a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be a string returned by this library that has not been freed,
/// or NULL.
#[no_mangle]
pub unsafe extern "C" fn atomscft_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

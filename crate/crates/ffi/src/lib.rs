//! C ABI over `uda-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_from_json` or
//! `uda_certify` and released with the matching `*_free`. Every fallible
//! call returns a [`UdaStatus`]; on failure `uda_last_error()` describes the
//! error on the calling thread. Strings returned through out-parameters are
//! owned by the caller and released with `uda_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use uda_core::certify::{certify_linear, CertificationVerdict, CertifyOptions, Verdict};
use uda_core::gme::{evaluate_gme, gme_threshold, GmeInput, MeasuredMarginals};
use uda_core::marginal::{kernel_basis_pauli, SubsystemCollection};
use uda_core::states::StateSpec;
use uda_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UdaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidInput = 4,
    ComputeError = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UdaVerdictKind {
    Robust = 0,
    NotRobust = 10,
    NotUda = 20,
}

/// A target state description.
pub struct UdaState {
    spec: StateSpec,
}

/// A collection of qubit subsets whose marginals are known.
pub struct UdaSubsystems {
    inner: SubsystemCollection,
}

/// Result of `uda_certify`.
pub struct UdaVerdict {
    inner: CertificationVerdict,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> UdaStatus {
    match e {
        Error::Json(_) => UdaStatus::ParseError,
        Error::Solver { .. } | Error::TTooLarge { .. } => UdaStatus::ComputeError,
        _ => UdaStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (UdaStatus, String)>) -> UdaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UdaStatus::Ok,
        Ok(Err((status, msg))) => {
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
            UdaStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (UdaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (UdaStatus, String) {
    (UdaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (UdaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (UdaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn parse_json<T: serde::de::DeserializeOwned>(p: *const c_char, what: &str) -> Result<T, (UdaStatus, String)> {
    let s = read_str(p, what)?;
    serde_json::from_str(s).map_err(|e| (UdaStatus::ParseError, format!("{what}: {e}")))
}

fn into_c_string(s: String) -> Result<*mut c_char, (UdaStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (UdaStatus::ComputeError, "output contains a NUL byte".into()))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn uda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a state description such as `{"kind": "dicke", "n": 4, "k": 2}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uda_state_from_json(json: *const c_char, out: *mut *mut UdaState) -> UdaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: StateSpec = parse_json(json, "state")?;
        spec.materialize().map_err(core_err)?;
        *out = Box::into_raw(Box::new(UdaState { spec }));
        Ok(())
    })
}

/// # Safety
/// `state` must come from `uda_state_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn uda_state_free(state: *mut UdaState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Parses `{"n": 3, "subsets": [[1, 2], [2, 3]]}` (1-based qubits).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uda_subsystems_from_json(json: *const c_char, out: *mut *mut UdaSubsystems) -> UdaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner: SubsystemCollection = parse_json(json, "subsystems")?;
        *out = Box::into_raw(Box::new(UdaSubsystems { inner }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from `uda_subsystems_from_json` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn uda_subsystems_free(s: *mut UdaSubsystems) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Dimension of the space of traceless operators invisible to every marginal.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uda_kernel_dim(s: *const UdaSubsystems, out: *mut usize) -> UdaStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("subsystems"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = kernel_basis_pauli(&s.inner).len();
        Ok(())
    })
}

/// Runs the certification pipeline with default tolerances.
///
/// # Safety
/// `state` and `s` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uda_certify(
    state: *const UdaState,
    s: *const UdaSubsystems,
    out: *mut *mut UdaVerdict,
) -> UdaStatus {
    guard(|| {
        let state = state.as_ref().ok_or_else(|| null("state"))?;
        let s = s.as_ref().ok_or_else(|| null("subsystems"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = certify_linear(&state.spec, &s.inner, &CertifyOptions::default()).map_err(core_err)?;
        *out = Box::into_raw(Box::new(UdaVerdict { inner }));
        Ok(())
    })
}

/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uda_verdict_kind(v: *const UdaVerdict, out: *mut UdaVerdictKind) -> UdaStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("verdict"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = match v.inner.verdict {
            Verdict::Robust => UdaVerdictKind::Robust,
            Verdict::NotRobust => UdaVerdictKind::NotRobust,
            Verdict::NotUda => UdaVerdictKind::NotUda,
        };
        Ok(())
    })
}

/// Full verdict as JSON; free the result with `uda_string_free`.
///
/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uda_verdict_to_json(v: *const UdaVerdict, out: *mut *mut c_char) -> UdaStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("verdict"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = serde_json::to_string(&v.inner).map_err(|e| (UdaStatus::ComputeError, e.to_string()))?;
        *out = into_c_string(s)?;
        Ok(())
    })
}

/// # Safety
/// `v` must come from `uda_certify` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn uda_verdict_free(v: *mut UdaVerdict) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// Largest total pair-marginal distance that certifies GME for `D(n,k)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uda_gme_threshold(n: usize, k: usize, out: *mut f64) -> UdaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = gme_threshold(n, k).map_err(core_err)?;
        Ok(())
    })
}

/// Evaluates measured pair marginals against `D(n,k)`. `report_json` may be
/// null; otherwise it receives the report, freed with `uda_string_free`.
///
/// # Safety
/// `json` must be a NUL-terminated string; non-null out-pointers must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn uda_gme_evaluate(
    json: *const c_char,
    n: usize,
    k: usize,
    certified: *mut bool,
    report_json: *mut *mut c_char,
) -> UdaStatus {
    guard(|| {
        if certified.is_null() {
            return Err(null("certified"));
        }
        let input: GmeInput = parse_json(json, "marginals")?;
        let data = MeasuredMarginals::from_input(&input).map_err(core_err)?;
        let rep = evaluate_gme(&data, n, k).map_err(core_err)?;
        *certified = rep.certified;
        if !report_json.is_null() {
            let s = serde_json::to_string(&rep).map_err(|e| (UdaStatus::ComputeError, e.to_string()))?;
            *report_json = into_c_string(s)?;
        }
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn uda_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

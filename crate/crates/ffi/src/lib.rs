//! C interface to `incpref`.
//!
//! Assessments live behind an opaque `IpAssessment` handle. Calls return an
//! `IpStatus`; results come back as JSON strings owned by the library and
//! released with `ip_string_free`. After a failure, `ip_last_error_message`
//! describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use incpref::problem::Problem;
use incpref::representation::{build_dual, is_coherent, Mode};
use incpref::session::{answer, answer_json, ApiError, Query};

/// Opaque handle to a parsed assessment.
pub struct IpAssessment {
    problem: Problem,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    Incoherent = 4,
    NoAgreeingPair = 5,
    QueryFailed = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: IpStatus, msg: &str) -> IpStatus {
    set_error(msg);
    status
}

fn status_of(e: &ApiError) -> IpStatus {
    match e.code.as_str() {
        "parse" | "invalid-input" => IpStatus::ParseError,
        "incoherent" => IpStatus::Incoherent,
        "no-agreeing-pair" => IpStatus::NoAgreeingPair,
        _ => IpStatus::QueryFailed,
    }
}

fn guard(f: impl FnOnce() -> IpStatus) -> IpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(IpStatus::Panic, &msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, IpStatus> {
    if s.is_null() {
        return Err(fail(IpStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(IpStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

unsafe fn write_json(out: *mut *mut c_char, v: &serde_json::Value) {
    let c = CString::new(v.to_string()).expect("JSON has no interior nul");
    *out = c.into_raw();
}

/// Parse a problem file given as JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer. On
/// success `*out` receives a handle to release with `ip_assessment_free`.
#[no_mangle]
pub unsafe extern "C" fn ip_assessment_from_json(json: *const c_char, out: *mut *mut IpAssessment) -> IpStatus {
    guard(|| {
        if out.is_null() {
            return fail(IpStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Problem::from_json_str(text, "input") {
            Ok(problem) => {
                *out = Box::into_raw(Box::new(IpAssessment { problem }));
                IpStatus::Ok
            }
            Err(e) => fail(IpStatus::ParseError, &e.to_string()),
        }
    })
}

/// # Safety
/// `a` must be null or a handle from `ip_assessment_from_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ip_assessment_free(a: *mut IpAssessment) {
    if !a.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(a))));
    }
}

/// Whether some state-dependent expected utility function agrees with the basis.
///
/// # Safety
/// `a` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ip_is_coherent(a: *const IpAssessment, out: *mut bool) -> IpStatus {
    guard(|| {
        let (Some(a), false) = (a.as_ref(), out.is_null()) else {
            return fail(IpStatus::NullArgument, "null argument");
        };
        *out = is_coherent(&build_dual(&a.problem.assessment, Mode::A5));
        IpStatus::Ok
    })
}

/// An agreeing probability/utility pair as `{"kind": "pair", ...}` JSON.
/// Returns `NoAgreeingPair` (and still fills `out`) when there is none.
///
/// # Safety
/// `a` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ip_find_pair(a: *const IpAssessment, out: *mut *mut c_char) -> IpStatus {
    guard(|| {
        let (Some(a), false) = (a.as_ref(), out.is_null()) else {
            return fail(IpStatus::NullArgument, "null argument");
        };
        *out = ptr::null_mut();
        match answer(&a.problem, &Query::Pair) {
            Ok(v) => {
                write_json(out, &v);
                if v["exists"] == serde_json::Value::Bool(true) {
                    IpStatus::Ok
                } else {
                    fail(IpStatus::NoAgreeingPair, "no agreeing probability/utility pair")
                }
            }
            Err(e) => {
                write_json(out, &e.payload());
                fail(status_of(&e), &e.message)
            }
        }
    })
}

/// Answer a query in the session JSON format, e.g.
/// `{"kind": "bounds", "target": {"const": "c2"}, "mode": "pairs"}`.
/// On failure `*out` holds an `{"error": ...}` payload.
///
/// # Safety
/// `a` must be a live handle, `query` a nul-terminated string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ip_query_json(
    a: *const IpAssessment,
    query: *const c_char,
    out: *mut *mut c_char,
) -> IpStatus {
    guard(|| {
        let (Some(a), false) = (a.as_ref(), out.is_null()) else {
            return fail(IpStatus::NullArgument, "null argument");
        };
        *out = ptr::null_mut();
        let text = match read_str(query) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let result = serde_json::from_str(text)
            .map_err(|e| ApiError::new("parse", e.to_string()))
            .and_then(|q| answer_json(&a.problem, &q));
        match result {
            Ok(v) => {
                write_json(out, &v);
                IpStatus::Ok
            }
            Err(e) => {
                write_json(out, &e.payload());
                fail(status_of(&e), &e.message)
            }
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ip_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ip_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

//! C ABI over the scoring engine: open a scorer from a model bundle and a
//! registrant file, score domains to JSON, compute raw similarity ratios.
//!
//! Conventions: every function returns a [`RegriskStatus`]; results come
//! back through out-pointers; strings returned by this library must be
//! released with [`regrisk_string_free`], the scorer with
//! [`regrisk_scorer_free`]. No call unwinds across the boundary.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use regrisk::bundle::load_model;
use regrisk::error::Error;
use regrisk::service::Scorer;
use regrisk::similarity::{paper_ratio, symmetric_ratio, RegistrantIndex};

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegriskStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidDomain = 3,
    DataError = 4,
    ModelError = 5,
    InternalError = 6,
}

/// Opaque scorer handle: a frozen model plus registrant index.
pub struct RegriskScorer {
    inner: Scorer,
}

fn status_of(err: &Error) -> RegriskStatus {
    match err {
        Error::EmptyDomain | Error::InvalidDomain(_) => RegriskStatus::InvalidDomain,
        Error::CorruptBundle(_)
        | Error::VersionMismatch { .. }
        | Error::InvalidConfig(_)
        | Error::DimMismatch { .. } => RegriskStatus::ModelError,
        Error::Parse { .. } | Error::Io(_) | Error::EmptyDataset => RegriskStatus::DataError,
        _ => RegriskStatus::InternalError,
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, RegriskStatus> {
    if ptr.is_null() {
        return Err(RegriskStatus::NullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| RegriskStatus::InvalidUtf8)
}

fn guarded(body: impl FnOnce() -> RegriskStatus) -> RegriskStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(RegriskStatus::InternalError)
}

/// Model bundle format version this library reads and writes.
#[no_mangle]
pub extern "C" fn regrisk_format_version() -> u32 {
    regrisk::bundle::FORMAT_VERSION
}

/// Static description of a status code. Never needs freeing.
#[no_mangle]
pub extern "C" fn regrisk_status_message(status: RegriskStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        RegriskStatus::Ok => b"ok\0",
        RegriskStatus::NullArgument => b"null argument\0",
        RegriskStatus::InvalidUtf8 => b"argument is not valid UTF-8\0",
        RegriskStatus::InvalidDomain => b"domain is empty or contains control characters\0",
        RegriskStatus::DataError => b"registrant or dataset file error\0",
        RegriskStatus::ModelError => b"model bundle error\0",
        RegriskStatus::InternalError => b"internal error\0",
    };
    msg.as_ptr() as *const c_char
}

/// Load a model bundle and registrant database and build a scorer.
///
/// # Safety
/// `model_path` and `registrants_path` must be NUL-terminated strings;
/// `out_scorer` must be a valid pointer. On success `*out_scorer` owns the
/// scorer and must be released with [`regrisk_scorer_free`].
#[no_mangle]
pub unsafe extern "C" fn regrisk_scorer_open(
    model_path: *const c_char,
    registrants_path: *const c_char,
    out_scorer: *mut *mut RegriskScorer,
) -> RegriskStatus {
    guarded(|| {
        if out_scorer.is_null() {
            return RegriskStatus::NullArgument;
        }
        let model_path = match cstr_arg(model_path) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let registrants_path = match cstr_arg(registrants_path) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let model = match load_model(Path::new(model_path)) {
            Ok(m) => m,
            Err(e) => return status_of(&e),
        };
        let index = match RegistrantIndex::from_file(Path::new(registrants_path)) {
            Ok(i) => i,
            Err(e) => return status_of(&e),
        };
        let scorer = Box::new(RegriskScorer {
            inner: Scorer::new(model, index),
        });
        *out_scorer = Box::into_raw(scorer);
        RegriskStatus::Ok
    })
}

/// Score one domain. On success `*out_json` holds the response record as a
/// JSON object (same field names as the HTTP service); free it with
/// [`regrisk_string_free`].
///
/// # Safety
/// `scorer` must come from [`regrisk_scorer_open`] and not be freed;
/// `domain` must be NUL-terminated; `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn regrisk_scorer_score_json(
    scorer: *const RegriskScorer,
    domain: *const c_char,
    out_json: *mut *mut c_char,
) -> RegriskStatus {
    guarded(|| {
        if scorer.is_null() || out_json.is_null() {
            return RegriskStatus::NullArgument;
        }
        let domain = match cstr_arg(domain) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let scorer = &*scorer;
        match scorer.inner.score(domain) {
            Ok(resp) => {
                let json = serde_json::to_string(&resp).expect("response serializes");
                match CString::new(json) {
                    Ok(c) => {
                        *out_json = c.into_raw();
                        RegriskStatus::Ok
                    }
                    Err(_) => RegriskStatus::InternalError,
                }
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Similarity ratio between two raw domain strings: the matched-total over
/// max-length ratio by default, the symmetric 2M/(len1+len2) form when
/// `symmetric` is set.
///
/// # Safety
/// `a` and `b` must be NUL-terminated; `out_score` must be valid.
#[no_mangle]
pub unsafe extern "C" fn regrisk_similarity(
    a: *const c_char,
    b: *const c_char,
    symmetric: bool,
    out_score: *mut f64,
) -> RegriskStatus {
    guarded(|| {
        if out_score.is_null() {
            return RegriskStatus::NullArgument;
        }
        let a = match cstr_arg(a) {
            Ok(s) => s,
            Err(e) => return e,
        };
        let b = match cstr_arg(b) {
            Ok(s) => s,
            Err(e) => return e,
        };
        *out_score = if symmetric {
            symmetric_ratio(a, b)
        } else {
            paper_ratio(a, b)
        };
        RegriskStatus::Ok
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must have been returned by a regrisk function and not freed before.
/// NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn regrisk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a scorer.
///
/// # Safety
/// `scorer` must come from [`regrisk_scorer_open`] and not be freed
/// before. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn regrisk_scorer_free(scorer: *mut RegriskScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

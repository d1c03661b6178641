//! C ABI over `taylor_lsv`.
//!
//! A model is loaded from the same `key = value` text the CLI reads and
//! priced at the state recorded in that text. Every function returns an
//! `LsvStatus`; on failure the message is available from
//! `lsv_last_error` on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use taylor_lsv::error::Error;
use taylor_lsv::expansion::{CorrectionOperators, PriceExpansion};
use taylor_lsv::impliedvol::iv_expand;
use taylor_lsv::model::{ModelFile, Payoff};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Usage = 4,
    Model = 5,
    Capability = 6,
    Numeric = 7,
    Domain = 8,
    Input = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

pub const LSV_PAYOFF_CALL: u32 = 0;
pub const LSV_PAYOFF_PUT: u32 = 1;
pub const LSV_PAYOFF_BOND: u32 = 2;
pub const LSV_PAYOFF_FORWARD: u32 = 3;

/// Opaque model handle with its correction operators.
pub struct LsvModel {
    file: ModelFile,
    ops: CorrectionOperators,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LsvStatus {
    match e {
        Error::Usage(_) => LsvStatus::Usage,
        Error::Model(_) => LsvStatus::Model,
        Error::Capability(_) => LsvStatus::Capability,
        Error::Numeric(_) => LsvStatus::Numeric,
        Error::Domain(_) => LsvStatus::Domain,
        Error::Input(_) => LsvStatus::Input,
        Error::Parse { .. } => LsvStatus::Parse,
        Error::Io(_) => LsvStatus::Io,
    }
}

struct Fail(LsvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LsvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsvStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            LsvStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: callers pass either null or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(LsvStatus::NullPointer, format!("`{what}` is null")))
}

fn out_slice<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail(LsvStatus::NullPointer, "`out_terms` is null".into()));
    }
    if len < need {
        return Err(Fail(LsvStatus::BufferTooSmall, format!("need room for {need} terms, got {len}")));
    }
    // SAFETY: non-null, and the caller guarantees `len` writable doubles.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn payoff(kind: u32, log_strike: f64) -> Result<Payoff, Fail> {
    Ok(match kind {
        LSV_PAYOFF_CALL => Payoff::call(log_strike),
        LSV_PAYOFF_PUT => Payoff::put(log_strike),
        LSV_PAYOFF_BOND => Payoff::Bond,
        LSV_PAYOFF_FORWARD => Payoff::Forward,
        other => return Err(Fail(LsvStatus::Usage, format!("unknown payoff code {other}"))),
    })
}

impl LsvModel {
    fn price(&self, p: &Payoff, maturity: f64) -> Result<PriceExpansion, Error> {
        let f = &self.file;
        self.ops.price(p, f.t0, maturity, f.x, f.y)
    }
}

/// Parses a model description and builds its correction operators.
/// On success `*out` owns a handle to release with `lsv_model_free`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lsv_model_from_text(text: *const c_char, out: *mut *mut LsvModel) -> LsvStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail(LsvStatus::NullPointer, "`out` is null".into()));
        }
        let text = non_null(text, "text")?;
        // SAFETY: checked non-null; NUL termination is the caller's contract.
        let text = unsafe { CStr::from_ptr(text) }
            .to_str()
            .map_err(|e| Fail(LsvStatus::InvalidUtf8, format!("model text is not UTF-8: {e}")))?;
        let file = ModelFile::parse(text)?;
        let spec = file.spec()?;
        let at_point = spec.point() == (file.x, file.y);
        let ops = CorrectionOperators::build(&spec, file.order, at_point)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(LsvModel { file, ops })) };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from `lsv_model_from_text` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lsv_model_free(model: *mut LsvModel) {
    if !model.is_null() {
        // SAFETY: ownership returns to Rust exactly once, per the contract.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Expansion order N the handle was built for.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsv_model_order(model: *const LsvModel, out: *mut usize) -> LsvStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        if out.is_null() {
            return Err(Fail(LsvStatus::NullPointer, "`out` is null".into()));
        }
        // SAFETY: checked non-null.
        unsafe { *out = m.ops.order() };
        Ok(())
    })
}

/// Price series `u_0..u_N` for a payoff (`LSV_PAYOFF_*`) maturing at `maturity`.
/// `log_strike` is ignored for bonds and forwards. `out_terms` needs N + 1
/// slots; `out_total` (may be null) receives the sum.
///
/// # Safety
/// `model` must be a live handle; `out_terms` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsv_price(
    model: *const LsvModel,
    payoff_kind: u32,
    log_strike: f64,
    maturity: f64,
    out_terms: *mut f64,
    len: usize,
    out_total: *mut f64,
) -> LsvStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = out_slice(out_terms, len, m.ops.order() + 1)?;
        let e = m.price(&payoff(payoff_kind, log_strike)?, maturity)?;
        for (o, v) in out.iter_mut().zip(e.values()) {
            *o = v;
        }
        if !out_total.is_null() {
            // SAFETY: checked non-null.
            unsafe { *out_total = e.total() };
        }
        Ok(())
    })
}

/// Implied-vol series `sigma_0..sigma_N` of a call at `log_strike`.
///
/// # Safety
/// As for `lsv_price`.
#[no_mangle]
pub unsafe extern "C" fn lsv_implied_vol(
    model: *const LsvModel,
    log_strike: f64,
    maturity: f64,
    out_terms: *mut f64,
    len: usize,
    out_total: *mut f64,
) -> LsvStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let out = out_slice(out_terms, len, m.ops.order() + 1)?;
        let iv = iv_expand(&m.price(&Payoff::call(log_strike), maturity)?)?;
        out.iter_mut().zip(&iv.terms).for_each(|(o, v)| *o = *v);
        if !out_total.is_null() {
            // SAFETY: checked non-null.
            unsafe { *out_total = iv.total() };
        }
        Ok(())
    })
}

/// Yield `-log(u) / tau` of the unit bond using the full series.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsv_yield(model: *const LsvModel, maturity: f64, out: *mut f64) -> LsvStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        if out.is_null() {
            return Err(Fail(LsvStatus::NullPointer, "`out` is null".into()));
        }
        let e = m.price(&Payoff::Bond, maturity)?;
        let p = e.total();
        if p.is_nan() || p <= 0.0 {
            return Err(Fail(LsvStatus::Domain, format!("bond price {p} is not positive")));
        }
        // SAFETY: checked non-null.
        unsafe { *out = -p.ln() / e.tau };
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lsv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

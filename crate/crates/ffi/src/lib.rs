//! C ABI over `nnverif`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns an [`NnvStatus`];
//! on failure, [`nnv_last_error_message`] describes the error for the
//! calling thread. Panics never cross the boundary and surface as
//! `NNV_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use nnverif::engine::{verify, Engine, EngineConfig, Verdict, VerdictKind};
use nnverif::property::{NoiseSpec, Property, PropertyFile, RobustnessProperty};
use nnverif::segmentation::ris_optimality;
use nnverif::{parse_json_net, parse_nnet, Error, Network, OutputConvention};

/// Opaque network handle.
pub struct NnvNetwork {
    inner: Network,
}

/// Opaque verification result.
pub struct NnvVerdict {
    inner: Verdict,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Dimension = 5,
    BufferTooSmall = 6,
    Io = 7,
    Numeric = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnvEngine {
    Explicit = 0,
    Reduced = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnvConvention {
    Argmax = 0,
    Argmin = 1,
    Raw = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnvVerdictKind {
    Sat = 0,
    Unsat = 1,
    NoneFound = 2,
    Timeout = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> NnvStatus {
    match e {
        Error::Parse { .. } | Error::Schema { .. } | Error::Json(_) | Error::Csv(_) => NnvStatus::Parse,
        Error::Dimension { .. } | Error::OutputIndex { .. } => NnvStatus::Dimension,
        Error::NonFinite { .. } => NnvStatus::Numeric,
        Error::Io { .. } => NnvStatus::Io,
        _ => NnvStatus::InvalidArgument,
    }
}

/// Run `f`, recording any error or panic for `nnv_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), (NnvStatus, String)>) -> NnvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NnvStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NnvStatus::Panic
        }
    }
}

fn lib<T>(r: nnverif::Result<T>) -> Result<T, (NnvStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (NnvStatus, String) {
    (NnvStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NnvStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NnvStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (NnvStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn net_arg<'a>(p: *const NnvNetwork) -> Result<&'a Network, (NnvStatus, String)> {
    p.as_ref().map(|n| &n.inner).ok_or_else(|| null("network"))
}

fn config(timeout_secs: f64) -> Result<EngineConfig, (NnvStatus, String)> {
    if !(timeout_secs >= 0.0) || !timeout_secs.is_finite() {
        return Err((NnvStatus::InvalidArgument, format!("bad timeout {timeout_secs}")));
    }
    Ok(EngineConfig {
        timeout: Duration::from_secs_f64(timeout_secs),
        ..EngineConfig::default()
    })
}

fn engine_of(e: NnvEngine) -> Engine {
    match e {
        NnvEngine::Explicit => Engine::Explicit,
        NnvEngine::Reduced => Engine::Reduced,
    }
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), (NnvStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nnv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nnv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse `.nnet` text. The network starts with the raw convention.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_from_nnet(text: *const c_char, out: *mut *mut NnvNetwork) -> NnvStatus {
    guard(|| {
        let net = lib(parse_nnet(str_arg(text, "text")?))?;
        put(out, Box::into_raw(Box::new(NnvNetwork { inner: net })))
    })
}

/// Parse a JSON network document.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_from_json(text: *const c_char, out: *mut *mut NnvNetwork) -> NnvStatus {
    guard(|| {
        let net = lib(parse_json_net(str_arg(text, "text")?))?;
        put(out, Box::into_raw(Box::new(NnvNetwork { inner: net })))
    })
}

/// # Safety
/// `net` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_free(net: *mut NnvNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_sizes(net: *const NnvNetwork, inputs: *mut usize, outputs: *mut usize) -> NnvStatus {
    guard(|| {
        let n = net_arg(net)?;
        put(inputs, n.input_size())?;
        put(outputs, n.output_size())
    })
}

/// Number of weights and biases.
///
/// # Safety
/// `net` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_param_count(net: *const NnvNetwork, out: *mut usize) -> NnvStatus {
    guard(|| put(out, net_arg(net)?.param_count()))
}

/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nnv_network_set_convention(net: *mut NnvNetwork, convention: NnvConvention) -> NnvStatus {
    guard(|| {
        let handle = net.as_mut().ok_or_else(|| null("network"))?;
        let c = match convention {
            NnvConvention::Argmax => OutputConvention::Argmax,
            NnvConvention::Argmin => OutputConvention::Argmin,
            NnvConvention::Raw => OutputConvention::Raw,
        };
        handle.inner = handle.inner.clone().with_convention(c);
        Ok(())
    })
}

/// Denormalized output scores for `x` into `out[0..out_len]`.
///
/// # Safety
/// `x` must hold `n` doubles and `out` room for `out_len`.
#[no_mangle]
pub unsafe extern "C" fn nnv_forward(
    net: *const NnvNetwork,
    x: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> NnvStatus {
    guard(|| {
        let net = net_arg(net)?;
        let y = lib(net.forward(slice_arg(x, n, "input")?))?;
        if out_len < y.len() {
            return Err((NnvStatus::BufferTooSmall, format!("need {} outputs, got room for {out_len}", y.len())));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(y.as_ptr(), out, y.len());
        Ok(())
    })
}

/// # Safety
/// `x` must hold `n` doubles and `out_class` be writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_classify(net: *const NnvNetwork, x: *const f64, n: usize, out_class: *mut usize) -> NnvStatus {
    guard(|| {
        let net = net_arg(net)?;
        let c = lib(net.classify(slice_arg(x, n, "input")?))?;
        put(out_class, c)
    })
}

/// Robustness of the class of `seed` under `percent` noise on every node.
///
/// # Safety
/// `seed` must hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_verify_robustness(
    net: *const NnvNetwork,
    seed: *const f64,
    n: usize,
    percent: f64,
    engine: NnvEngine,
    timeout_secs: f64,
    out: *mut *mut NnvVerdict,
) -> NnvStatus {
    guard(|| {
        let net = net_arg(net)?;
        let seed = slice_arg(seed, n, "seed")?.to_vec();
        let spec = lib(NoiseSpec::uniform(percent, n))?;
        let prop = Property::Robustness(lib(RobustnessProperty::new(net, "seed", seed, spec))?);
        let v = lib(verify(net, &prop, engine_of(engine), &config(timeout_secs)?))?;
        put(out, Box::into_raw(Box::new(NnvVerdict { inner: v })))
    })
}

/// Verify a property given as a JSON property file (robustness or safety).
///
/// # Safety
/// `property_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_verify_property_json(
    net: *const NnvNetwork,
    property_json: *const c_char,
    engine: NnvEngine,
    timeout_secs: f64,
    out: *mut *mut NnvVerdict,
) -> NnvStatus {
    guard(|| {
        let net = net_arg(net)?;
        let file = lib(PropertyFile::parse(str_arg(property_json, "property")?))?;
        let prop = lib(file.resolve(net))?;
        let v = lib(verify(net, &prop, engine_of(engine), &config(timeout_secs)?))?;
        put(out, Box::into_raw(Box::new(NnvVerdict { inner: v })))
    })
}

/// Kind of a verdict; a null handle reads as `TIMEOUT`.
///
/// # Safety
/// `v` must be a live verdict or null.
#[no_mangle]
pub unsafe extern "C" fn nnv_verdict_kind(v: *const NnvVerdict) -> NnvVerdictKind {
    match v.as_ref().map(|v| v.inner.kind) {
        Some(VerdictKind::Sat) => NnvVerdictKind::Sat,
        Some(VerdictKind::Unsat) => NnvVerdictKind::Unsat,
        Some(VerdictKind::NoneFound) => NnvVerdictKind::NoneFound,
        Some(VerdictKind::Timeout) | None => NnvVerdictKind::Timeout,
    }
}

/// Copy the witness input into `out`. `written` receives its length, which
/// is 0 when the verdict has no witness.
///
/// # Safety
/// `out` must have room for `len` doubles and `written` be writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_verdict_witness(
    v: *const NnvVerdict,
    out: *mut f64,
    len: usize,
    written: *mut usize,
) -> NnvStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("verdict"))?;
        let w: &[f64] = v.inner.witness.as_ref().map_or(&[], |w| &w.input);
        put(written, w.len())?;
        if w.is_empty() {
            return Ok(());
        }
        if len < w.len() {
            return Err((NnvStatus::BufferTooSmall, format!("witness has {} values", w.len())));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(w.as_ptr(), out, w.len());
        Ok(())
    })
}

/// JSON rendering of a verdict; release with `nnv_string_free`. Null on
/// error.
///
/// # Safety
/// `v` must be a live verdict.
#[no_mangle]
pub unsafe extern "C" fn nnv_verdict_to_json(v: *const NnvVerdict) -> *mut c_char {
    let mut s = ptr::null_mut();
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("verdict"))?;
        s = CString::new(v.inner.to_json()).expect("json has no NUL").into_raw();
        Ok(())
    });
    s
}

/// # Safety
/// `v` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nnv_verdict_free(v: *mut NnvVerdict) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nnv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Whether segmenting `i` nodes into `m` variable and `mp` fixed nodes pays
/// off for `n` bins per node.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nnv_ris_optimal(i: u64, m: u64, mp: u64, n: u32, out: *mut bool) -> NnvStatus {
    guard(|| put(out, lib(ris_optimality(i, m, mp, n))?))
}

//! C ABI over `wealthlab`.
//!
//! Every fallible function returns a [`WlStatus`]; on failure the message is
//! kept per thread and can be read with [`wl_last_error_message`]. Objects
//! are opaque handles created by `*_new` and released by `*_free`. Strings
//! returned by the library must be released with [`wl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wealthlab::config::parse_config;
use wealthlab::dynamics::KestenEngine;
use wealthlab::experiments;
use wealthlab::inference;
use wealthlab::model;
use wealthlab::netgen::{self, WeightedNetwork};
use wealthlab::output::Summary;
use wealthlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Parameter = 4,
    Domain = 5,
    InsufficientData = 6,
    State = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> WlStatus {
    match err {
        Error::Domain(_) => WlStatus::Domain,
        Error::Parameter(_) => WlStatus::Parameter,
        Error::InsufficientData(_) => WlStatus::InsufficientData,
        Error::State(_) => WlStatus::State,
        Error::Validation { .. } => WlStatus::Validation,
        Error::Io { .. } => WlStatus::Io,
        Error::Context { source, .. } => status_of(source),
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (WlStatus, String)>) -> WlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            WlStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside wealthlab");
            WlStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (WlStatus, String)>;
}

impl<T> IntoFfi<T> for wealthlab::Result<T> {
    fn ffi(self) -> Result<T, (WlStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (WlStatus, String) {
    (WlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], (WlStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (WlStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, (WlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (WlStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ------------------------------------------------------------- estimators

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WlParetoFit {
    pub alpha_hat: f64,
    pub x_min: f64,
    pub std_error: f64,
    pub ks_distance: f64,
    pub n_tail: usize,
}

impl From<inference::ParetoFit> for WlParetoFit {
    fn from(f: inference::ParetoFit) -> Self {
        Self {
            alpha_hat: f.alpha_hat,
            x_min: f.x_min,
            std_error: f.stderr,
            ks_distance: f.ks_distance,
            n_tail: f.n_tail,
        }
    }
}

/// Maximum-likelihood Pareto fit above a fixed `x_min`.
///
/// # Safety
/// `data` must point to `len` doubles; `fit` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_pareto_mle(data: *const f64, len: usize, x_min: f64, fit: *mut WlParetoFit) -> WlStatus {
    guard(|| {
        let xs = slice(data, len, "data")?;
        let out = out(fit, "fit")?;
        *out = inference::pareto_mle(xs, x_min).ffi()?.into();
        Ok(())
    })
}

/// Pareto fit with `x_min` chosen by minimum KS distance.
///
/// # Safety
/// `data` must point to `len` doubles; `fit` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_fit_tail(data: *const f64, len: usize, fit: *mut WlParetoFit) -> WlStatus {
    guard(|| {
        let xs = slice(data, len, "data")?;
        let out = out(fit, "fit")?;
        *out = inference::fit_tail(xs).ffi()?.into();
        Ok(())
    })
}

/// Hill estimator on the `k` largest values.
///
/// # Safety
/// `data` must point to `len` doubles; `alpha` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_hill(data: *const f64, len: usize, k: usize, alpha: *mut f64) -> WlStatus {
    guard(|| {
        let xs = slice(data, len, "data")?;
        let out = out(alpha, "alpha")?;
        *out = inference::hill_estimator(xs, k).ffi()?;
        Ok(())
    })
}

/// Gini coefficient of non-negative values.
///
/// # Safety
/// `data` must point to `len` doubles; `gini` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_gini(data: *const f64, len: usize, gini: *mut f64) -> WlStatus {
    guard(|| {
        let xs = slice(data, len, "data")?;
        let out = out(gini, "gini")?;
        *out = model::gini(xs).ffi()?;
        Ok(())
    })
}

// ---------------------------------------------------------------- network

/// Opaque weighted network.
pub struct WlNetwork(WeightedNetwork);

/// Scale-free network by preferential attachment.
///
/// # Safety
/// `net` must be writable; the handle it receives must be freed with
/// [`wl_network_free`].
#[no_mangle]
pub unsafe extern "C" fn wl_network_scale_free(n_nodes: usize, m: usize, seed: u64, net: *mut *mut WlNetwork) -> WlStatus {
    guard(|| {
        let out = out(net, "net")?;
        let g = netgen::generate_scale_free(n_nodes, m, seed).ffi()?;
        *out = Box::into_raw(Box::new(WlNetwork(g)));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wl_network_free(net: *mut WlNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wl_network_n_nodes(net: *const WlNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.n_nodes())
}

/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wl_network_n_edges(net: *const WlNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.n_edges())
}

/// Writes the degree of every node into `out` (length `n_nodes`).
///
/// # Safety
/// `net` must be a live handle; `degrees` must point to `len` writable slots.
#[no_mangle]
pub unsafe extern "C" fn wl_network_degrees(net: *const WlNetwork, degrees: *mut usize, len: usize) -> WlStatus {
    guard(|| {
        let g = &net.as_ref().ok_or_else(|| null("net"))?.0;
        if len < g.n_nodes() {
            return Err((WlStatus::BufferTooSmall, format!("need {} slots, got {len}", g.n_nodes())));
        }
        if degrees.is_null() {
            return Err(null("degrees"));
        }
        let dst = std::slice::from_raw_parts_mut(degrees, g.n_nodes());
        for (d, v) in dst.iter_mut().zip(g.degrees()) {
            *d = v;
        }
        Ok(())
    })
}

// ----------------------------------------------------------------- kesten

/// Opaque multiplicative-growth engine.
pub struct WlKesten(KestenEngine);

/// Engine of `n_agents` agents whose stationary tail exponent is `alpha`.
///
/// # Safety
/// `engine` must be writable; free the handle with [`wl_kesten_free`].
#[no_mangle]
pub unsafe extern "C" fn wl_kesten_new(
    n_agents: usize,
    alpha: f64,
    sigma: f64,
    x_min: f64,
    seed: u64,
    engine: *mut *mut WlKesten,
) -> WlStatus {
    guard(|| {
        let out = out(engine, "engine")?;
        let params = wealthlab::dynamics::KestenParams::for_alpha(alpha, sigma, x_min).ffi()?;
        let e = KestenEngine::new(n_agents, params, seed).ffi()?;
        *out = Box::into_raw(Box::new(WlKesten(e)));
        Ok(())
    })
}

/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wl_kesten_free(engine: *mut WlKesten) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Advances the engine by `steps` sweeps.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wl_kesten_run(engine: *mut WlKesten, steps: u64) -> WlStatus {
    guard(|| {
        let e = engine.as_mut().ok_or_else(|| null("engine"))?;
        e.0.run(steps).ffi()
    })
}

/// # Safety
/// `engine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wl_kesten_n_agents(engine: *const WlKesten) -> usize {
    engine.as_ref().map_or(0, |e| e.0.agents.len())
}

/// Copies current wealths into `out`.
///
/// # Safety
/// `engine` must be a live handle; `wealths` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wl_kesten_wealths(engine: *const WlKesten, wealths: *mut f64, len: usize) -> WlStatus {
    guard(|| {
        let e = &engine.as_ref().ok_or_else(|| null("engine"))?.0;
        let n = e.agents.len();
        if len < n {
            return Err((WlStatus::BufferTooSmall, format!("need {n} slots, got {len}")));
        }
        if wealths.is_null() {
            return Err(null("wealths"));
        }
        let dst = std::slice::from_raw_parts_mut(wealths, n);
        for (d, a) in dst.iter_mut().zip(&e.agents) {
            *d = a.wealth;
        }
        Ok(())
    })
}

/// Gross product and total wealth of the engine.
///
/// # Safety
/// `engine` must be a live handle; `omega` and `lambda` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_kesten_accounts(engine: *const WlKesten, omega: *mut f64, lambda: *mut f64) -> WlStatus {
    guard(|| {
        let e = &engine.as_ref().ok_or_else(|| null("engine"))?.0;
        *out(omega, "omega")? = e.accounts.omega;
        *out(lambda, "lambda")? = e.accounts.lambda;
        Ok(())
    })
}

// ------------------------------------------------------------ experiments

/// Runs the experiment described by a JSON config and returns the summary
/// JSON (without wall-clock metadata) in `summary`. Nothing is written to
/// disk.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `summary` must be
/// writable and the string it receives freed with [`wl_string_free`].
#[no_mangle]
pub unsafe extern "C" fn wl_run_config(config_json: *const c_char, summary: *mut *mut c_char) -> WlStatus {
    guard(|| {
        let text = string(config_json, "config_json")?;
        let out = out(summary, "summary")?;
        let config = parse_config(text).ffi()?;
        let report = experiments::run(&config).ffi()?;
        let json = serde_json::to_string(&Summary::new(&config, &report, None))
            .map_err(|e| (WlStatus::State, e.to_string()))?;
        *out = CString::new(json).map_err(|e| (WlStatus::State, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Validates a JSON config without running it.
///
/// # Safety
/// `config_json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wl_validate_config(config_json: *const c_char) -> WlStatus {
    guard(|| {
        let text = string(config_json, "config_json")?;
        parse_config(text).ffi()?.validate().ffi()
    })
}

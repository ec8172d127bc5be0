//! C ABI for the netprice solvers: opaque instance handles, status codes,
//! and caller-allocated output buffers.
//!
//! Conventions: every function returns an [`NpStatus`] (or a pointer that is
//! null on failure); on any non-`Ok` outcome a thread-local message is set
//! and can be fetched with [`np_last_error_message`]. Buffers are always
//! allocated by the caller at the lengths documented per function; sizes
//! come from [`np_instance_agent_count`]. Instances are immutable, so one
//! handle may be shared across threads as long as it outlives all use.
//!
//! The exported functions are deliberately not `unsafe fn`: they null-check
//! every pointer and the remaining length contracts are documented per
//! function, which is the useful boundary for C callers.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use netprice::equilibrium;
use netprice::model::{MarketInstance, PriceVector};
use netprice::two_price::{self, TwoPriceInstance};
use netprice::value_of_info;
use netprice::{discriminatory, uniform, Error};

/// Outcome of a C API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed input (JSON, dimensions, parameter ranges).
    InvalidArgument = 2,
    /// The instance violates a model invariant required by the solver.
    InvalidInstance = 3,
    /// Centrality or relaxation ill-defined for these inputs.
    IllDefined = 4,
    NoConvergence = 5,
    /// Exact enumeration requested beyond its size limit.
    TooLarge = 6,
    /// Internal consistency check failed.
    Inconsistent = 7,
    SingularSystem = 8,
    NotPositiveDefinite = 9,
    /// A panic was caught at the boundary.
    Internal = 10,
}

/// Opaque market instance handle.
pub struct NpInstance(MarketInstance);

/// Blind-vs-informed profit comparison with spectral bounds.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NpProfitComparison {
    pub pi0: f64,
    pub pi_n: f64,
    pub ratio: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> NpStatus {
    match err {
        Error::IndexOutOfRange { .. } | Error::DimensionMismatch { .. } => NpStatus::InvalidArgument,
        Error::InvalidData(_) | Error::InvalidParameter(_) => NpStatus::InvalidArgument,
        Error::IllDefined(_) => NpStatus::IllDefined,
        Error::NoConvergence { .. } => NpStatus::NoConvergence,
        Error::TooLarge { .. } => NpStatus::TooLarge,
        Error::Inconsistent(_) => NpStatus::Inconsistent,
        Error::SingularSystem(_) => NpStatus::SingularSystem,
        Error::NotPositiveDefinite => NpStatus::NotPositiveDefinite,
    }
}

fn fail(err: &Error) -> NpStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Run a fallible body, translating panics into `Internal`.
fn guarded(f: impl FnOnce() -> NpStatus) -> NpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            NpStatus::Internal
        }
    }
}

/// Copy the last error message into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full length of the message including the NUL, or 0
/// when `buf` is null and `len` nonzero.
#[no_mangle]
pub extern "C" fn np_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if len == 0 {
            return bytes.len();
        }
        if buf.is_null() {
            return 0;
        }
        let copy = bytes.len().min(len);
        // Safety: caller guarantees `buf` points to at least `len` bytes.
        unsafe {
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, copy);
            *buf.add(copy - 1) = 0;
        }
        bytes.len()
    })
}

/// Parse an instance from its JSON representation
/// (`{"n": ..., "G": [[...]], "a": [...], "b": [...], "c": ...}`).
/// Returns null on failure; free with [`np_instance_free`].
#[no_mangle]
pub extern "C" fn np_instance_from_json(json: *const c_char) -> *mut NpInstance {
    if json.is_null() {
        set_error("json pointer is null");
        return std::ptr::null_mut();
    }
    // Safety: caller guarantees `json` is a valid NUL-terminated string.
    let text = match unsafe { CStr::from_ptr(json) }.to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("json is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    match MarketInstance::from_json_str(text) {
        Ok(inst) => Box::into_raw(Box::new(NpInstance(inst))),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Build an instance from raw arrays: `g` row-major `n*n`, `a` and `b` of
/// length `n`. Returns null on failure; free with [`np_instance_free`].
#[no_mangle]
pub extern "C" fn np_instance_new(
    n: usize,
    g: *const f64,
    a: *const f64,
    b: *const f64,
    c: f64,
) -> *mut NpInstance {
    if g.is_null() || a.is_null() || b.is_null() {
        set_error("array pointer is null");
        return std::ptr::null_mut();
    }
    // Safety: caller guarantees the documented array lengths.
    let (g, a, b) = unsafe {
        (
            std::slice::from_raw_parts(g, n * n),
            std::slice::from_raw_parts(a, n),
            std::slice::from_raw_parts(b, n),
        )
    };
    match MarketInstance::from_row_major(n, g, a.to_vec(), b.to_vec(), c) {
        Ok(inst) => Box::into_raw(Box::new(NpInstance(inst))),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release an instance created by this library. Null is a no-op.
#[no_mangle]
pub extern "C" fn np_instance_free(inst: *mut NpInstance) {
    if !inst.is_null() {
        // Safety: `inst` came from Box::into_raw in a constructor above and
        // is dropped exactly once.
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Number of agents, or 0 for a null handle.
#[no_mangle]
pub extern "C" fn np_instance_agent_count(inst: *const NpInstance) -> usize {
    // Safety: valid handle or null, per the API contract.
    unsafe { inst.as_ref() }.map_or(0, |h| h.0.n())
}

/// Whether the instance satisfies every model invariant.
#[no_mangle]
pub extern "C" fn np_instance_is_admissible(inst: *const NpInstance) -> bool {
    // Safety: valid handle or null.
    unsafe { inst.as_ref() }.is_some_and(|h| h.0.validate().is_admissible())
}

/// Equilibrium consumption at `prices` (length n) into `x_out` (length n).
/// `residual_out` and `iterations_out` may be null.
#[no_mangle]
pub extern "C" fn np_solve_equilibrium(
    inst: *const NpInstance,
    prices: *const f64,
    tol: f64,
    max_iter: usize,
    x_out: *mut f64,
    residual_out: *mut f64,
    iterations_out: *mut usize,
) -> NpStatus {
    guarded(|| {
        // Safety: valid handle or null.
        let Some(handle) = (unsafe { inst.as_ref() }) else {
            set_error("instance handle is null");
            return NpStatus::NullPointer;
        };
        if prices.is_null() || x_out.is_null() {
            set_error("prices/x_out pointer is null");
            return NpStatus::NullPointer;
        }
        let n = handle.0.n();
        // Safety: caller guarantees length n.
        let p = unsafe { std::slice::from_raw_parts(prices, n) };
        let p = match PriceVector::new(p.to_vec()) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        match equilibrium::solve_equilibrium(&handle.0, &p, tol, max_iter) {
            Ok(eq) => {
                // Safety: caller guarantees x_out holds n doubles.
                unsafe {
                    std::ptr::copy_nonoverlapping(eq.x.values().as_slice().as_ptr(), x_out, n);
                    if let Some(r) = residual_out.as_mut() {
                        *r = eq.residual;
                    }
                    if let Some(it) = iterations_out.as_mut() {
                        *it = eq.iterations;
                    }
                }
                NpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Closed-form individualized prices into `prices_out`/`consumption_out`
/// (length n each; either may be null) and the profit into `profit_out`.
#[no_mangle]
pub extern "C" fn np_discriminatory_prices(
    inst: *const NpInstance,
    prices_out: *mut f64,
    consumption_out: *mut f64,
    profit_out: *mut f64,
) -> NpStatus {
    guarded(|| {
        // Safety: valid handle or null.
        let Some(handle) = (unsafe { inst.as_ref() }) else {
            set_error("instance handle is null");
            return NpStatus::NullPointer;
        };
        let n = handle.0.n();
        match discriminatory::optimal_prices(&handle.0) {
            Ok(res) => {
                // Safety: caller guarantees n-length buffers where non-null.
                unsafe {
                    if !prices_out.is_null() {
                        std::ptr::copy_nonoverlapping(
                            res.prices.values().as_slice().as_ptr(),
                            prices_out,
                            n,
                        );
                    }
                    if !consumption_out.is_null() {
                        std::ptr::copy_nonoverlapping(
                            res.consumption.values().as_slice().as_ptr(),
                            consumption_out,
                            n,
                        );
                    }
                    if let Some(pr) = profit_out.as_mut() {
                        *pr = res.profit;
                    }
                }
                NpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Optimal single uniform price and its profit.
#[no_mangle]
pub extern "C" fn np_optimal_uniform_price(
    inst: *const NpInstance,
    price_out: *mut f64,
    profit_out: *mut f64,
) -> NpStatus {
    guarded(|| {
        // Safety: valid handle or null.
        let Some(handle) = (unsafe { inst.as_ref() }) else {
            set_error("instance handle is null");
            return NpStatus::NullPointer;
        };
        match uniform::optimal_uniform_price(&handle.0) {
            Ok(res) => {
                // Safety: caller-owned doubles where non-null.
                unsafe {
                    if let Some(p) = price_out.as_mut() {
                        *p = res.p_opt;
                    }
                    if let Some(pr) = profit_out.as_mut() {
                        *pr = res.profit;
                    }
                }
                NpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Full/discounted assignment for two price levels. `assignment_out`
/// (length n) receives +1 for full price and -1 for discounted;
/// `sdp_bound_out` (nullable) receives the certified relaxation bound or
/// NaN when the exact path ran.
#[no_mangle]
pub extern "C" fn np_two_price_solve(
    inst: *const NpInstance,
    p_low: f64,
    p_high: f64,
    trials: usize,
    seed: u64,
    force_sdp: bool,
    assignment_out: *mut i8,
    profit_out: *mut f64,
    sdp_bound_out: *mut f64,
) -> NpStatus {
    guarded(|| {
        // Safety: valid handle or null.
        let Some(handle) = (unsafe { inst.as_ref() }) else {
            set_error("instance handle is null");
            return NpStatus::NullPointer;
        };
        if assignment_out.is_null() {
            set_error("assignment_out pointer is null");
            return NpStatus::NullPointer;
        }
        if trials == 0 {
            set_error("trials must be positive");
            return NpStatus::InvalidArgument;
        }
        let tp = match TwoPriceInstance::new(handle.0.clone(), p_low, p_high) {
            Ok(tp) => tp,
            Err(e) => {
                set_error(&e.to_string());
                return NpStatus::InvalidInstance;
            }
        };
        let solved = if force_sdp {
            two_price::approximate_sdp(&tp, trials, seed)
        } else {
            two_price::approximate(&tp, trials, seed)
        };
        match solved {
            Ok(res) => {
                // Safety: caller guarantees assignment_out holds n bytes.
                unsafe {
                    std::ptr::copy_nonoverlapping(
                        res.assignment.as_ptr(),
                        assignment_out,
                        res.assignment.len(),
                    );
                    if let Some(pr) = profit_out.as_mut() {
                        *pr = res.profit;
                    }
                    if let Some(bound) = sdp_bound_out.as_mut() {
                        *bound = res.sdp_upper_bound.unwrap_or(f64::NAN);
                    }
                }
                NpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Blind-vs-informed profit comparison with spectral bounds.
#[no_mangle]
pub extern "C" fn np_value_of_info(
    inst: *const NpInstance,
    out: *mut NpProfitComparison,
) -> NpStatus {
    guarded(|| {
        // Safety: valid handle or null.
        let Some(handle) = (unsafe { inst.as_ref() }) else {
            set_error("instance handle is null");
            return NpStatus::NullPointer;
        };
        if out.is_null() {
            set_error("out pointer is null");
            return NpStatus::NullPointer;
        }
        match value_of_info::compare(&handle.0) {
            Ok(cmp) => {
                // Safety: out points to caller-owned struct storage.
                unsafe {
                    *out = NpProfitComparison {
                        pi0: cmp.pi0,
                        pi_n: cmp.pi_n,
                        ratio: cmp.ratio,
                        lower_bound: cmp.lower_bound,
                        upper_bound: cmp.upper_bound,
                    };
                }
                NpStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

//! C ABI over `superheat`.
//!
//! Handles are opaque and owned by the caller: every `sh_*_new` has a
//! matching `sh_*_free`. Functions return an `ShStatus`; on failure the
//! message is kept per thread and read back with `sh_last_error`.
//! Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use superheat::classify::{self, IntegralStatus, Regime};
use superheat::cli::{self, Command, RunOptions};
use superheat::grid::uloc::{uloc_norm, Exponent, UlocParams};
use superheat::grid::{Geometry, GridField};
use superheat::Nonlinearity;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShRegime {
    SubcriticalExists = 0,
    CriticalExists = 1,
    NonexistenceWitness = 2,
    RapidGrowthNonexistence = 3,
    Indeterminate = 4,
}

/// Flat view of a classification verdict.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ShVerdict {
    pub regime: ShRegime,
    /// Growth constant `A`.
    pub a: f64,
    /// Classification integral at the finest level.
    pub integral: f64,
    /// 1 when the integral trend reads as finite.
    pub integral_finite: i32,
    /// Existence-time lower bound, NaN when none applies.
    pub t_lower: f64,
}

pub struct ShNonlinearity(Nonlinearity);

pub struct ShGrid(GridField);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn guard(f: impl FnOnce() -> Result<(), (ShStatus, String)>) -> ShStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShStatus::Ok,
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
            set_error(format!("panic: {msg}"));
            ShStatus::Panic
        }
    }
}

fn numeric(e: impl std::fmt::Display) -> (ShStatus, String) {
    (ShStatus::Numeric, e.to_string())
}

fn invalid(e: impl std::fmt::Display) -> (ShStatus, String) {
    (ShStatus::InvalidArgument, e.to_string())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ShStatus, String)> {
    p.as_ref().ok_or_else(|| (ShStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (ShStatus, String)> {
    p.as_mut().ok_or_else(|| (ShStatus::NullPointer, format!("{what} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ShStatus, String)> {
    if p.is_null() {
        return Err((ShStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated)
/// and returns the full message length in bytes, excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn sh_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a nonlinearity such as `power(2)`, `powersum(4,2)`, `exp`, `expsq`.
#[no_mangle]
pub unsafe extern "C" fn sh_nonlinearity_new(spec: *const c_char, handle: *mut *mut ShNonlinearity) -> ShStatus {
    guard(|| {
        let h = out(handle, "handle")?;
        *h = ptr::null_mut();
        let nl: Nonlinearity = c_str(spec, "spec")?.parse().map_err(invalid)?;
        *h = Box::into_raw(Box::new(ShNonlinearity(nl)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sh_nonlinearity_free(handle: *mut ShNonlinearity) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// `F(s)`.
#[no_mangle]
pub unsafe extern "C" fn sh_structure(nl: *const ShNonlinearity, s: f64, value: *mut f64) -> ShStatus {
    guard(|| {
        let nl = deref(nl, "nonlinearity")?;
        *out(value, "value")? = nl.0.structure(s).map_err(numeric)?;
        Ok(())
    })
}

/// `F⁻¹(y)`.
#[no_mangle]
pub unsafe extern "C" fn sh_structure_inv(nl: *const ShNonlinearity, y: f64, value: *mut f64) -> ShStatus {
    guard(|| {
        let nl = deref(nl, "nonlinearity")?;
        *out(value, "value")? = nl.0.structure_inv(y).map_err(numeric)?;
        Ok(())
    })
}

/// The growth constant `A = lim f′F`.
#[no_mangle]
pub unsafe extern "C" fn sh_growth_constant(nl: *const ShNonlinearity, value: *mut f64) -> ShStatus {
    guard(|| {
        *out(value, "value")? = deref(nl, "nonlinearity")?.0.a_value();
        Ok(())
    })
}

/// Periodic field on `[-side/2, side/2)^dim` with `n` nodes per axis;
/// `values` holds `n^dim` entries, last axis fastest.
#[no_mangle]
pub unsafe extern "C" fn sh_grid_periodic(
    dim: usize,
    n: usize,
    side: f64,
    values: *const f64,
    len: usize,
    handle: *mut *mut ShGrid,
) -> ShStatus {
    guard(|| {
        let h = out(handle, "handle")?;
        *h = ptr::null_mut();
        if values.is_null() {
            return Err((ShStatus::NullPointer, "values is null".into()));
        }
        let geometry = Geometry::periodic_cube(dim, n, side).map_err(invalid)?;
        if len != geometry.len() {
            return Err(invalid(format!("expected {} values, got {len}", geometry.len())));
        }
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let field = GridField::new(geometry, data).map_err(invalid)?;
        *h = Box::into_raw(Box::new(ShGrid(field)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sh_grid_free(handle: *mut ShGrid) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sh_grid_len(grid: *const ShGrid, len: *mut usize) -> ShStatus {
    guard(|| {
        *out(len, "len")? = deref(grid, "grid")?.0.len();
        Ok(())
    })
}

/// Copies the node values into `buf`; `BufferTooSmall` leaves it untouched.
#[no_mangle]
pub unsafe extern "C" fn sh_grid_values(grid: *const ShGrid, buf: *mut f64, len: usize) -> ShStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        if buf.is_null() {
            return Err((ShStatus::NullPointer, "buf is null".into()));
        }
        if len < g.len() {
            return Err((ShStatus::BufferTooSmall, format!("need {} values, got {len}", g.len())));
        }
        ptr::copy_nonoverlapping(g.values.as_ptr(), buf, g.len());
        Ok(())
    })
}

/// Uniformly local `Lᵖ` norm over balls of radius `rho`; `p = INFINITY` gives the sup.
#[no_mangle]
pub unsafe extern "C" fn sh_uloc_norm(grid: *const ShGrid, p: f64, rho: f64, value: *mut f64) -> ShStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let p = if p == f64::INFINITY { Exponent::INF } else { Exponent::Finite(p) };
        *out(value, "value")? = uloc_norm(g, UlocParams { p, rho }).map_err(numeric)?;
        Ok(())
    })
}

/// Classifies the data with `γ = 1`, using subsampled copies for the trend.
#[no_mangle]
pub unsafe extern "C" fn sh_classify(
    nl: *const ShNonlinearity,
    grid: *const ShGrid,
    n: usize,
    r: f64,
    rho: f64,
    verdict: *mut ShVerdict,
) -> ShStatus {
    guard(|| {
        let nl = &deref(nl, "nonlinearity")?.0;
        let g = &deref(grid, "grid")?.0;
        let slot = out(verdict, "verdict")?;
        let v = classify::classify(nl, g, n, r, rho).map_err(numeric)?;
        let (integral, finite) = match v.inputs.integral {
            IntegralStatus::Finite { value } => (value, 1),
            IntegralStatus::Ambiguous { value } => (value, 0),
            IntegralStatus::Diverging { .. } => (f64::INFINITY, 0),
        };
        *slot = ShVerdict {
            regime: match v.regime {
                Regime::SubcriticalExists => ShRegime::SubcriticalExists,
                Regime::CriticalExists => ShRegime::CriticalExists,
                Regime::NonexistenceWitness => ShRegime::NonexistenceWitness,
                Regime::RapidGrowthNonexistence => ShRegime::RapidGrowthNonexistence,
                Regime::Indeterminate => ShRegime::Indeterminate,
            },
            a: v.inputs.a,
            integral,
            integral_finite: finite,
            t_lower: v.time_bound.map_or(f64::NAN, |b| b.t_lower),
        };
        Ok(())
    })
}

/// Runs a CLI command on a scenario file; `exit_code` receives the code the
/// `superheat` binary would return.
#[no_mangle]
pub unsafe extern "C" fn sh_run_scenario(
    command: *const c_char,
    config: *const c_char,
    out_dir: *const c_char,
    jobs: usize,
    strict: i32,
    exit_code: *mut i32,
) -> ShStatus {
    guard(|| {
        let code = out(exit_code, "exit_code")?;
        let command: Command = c_str(command, "command")?.parse().map_err(invalid)?;
        let scenario = cli::load_scenario(c_str(config, "config")?.as_ref()).map_err(invalid)?;
        let opts = RunOptions { out: PathBuf::from(c_str(out_dir, "out_dir")?), jobs: jobs.max(1), strict: strict != 0 };
        *code = cli::run(command, &scenario, &opts);
        Ok(())
    })
}

//! C ABI over `lfbm`.
//!
//! Every function returns an [`LfbmStatus`]; results go through out
//! pointers. On failure the message is kept per thread and can be read
//! with [`lfbm_last_error_message`]. Handles are opaque and must be
//! released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use lfbm::fbm::{self, cov_liouville};
use lfbm::spde::mode_variance;
use lfbm::stoch_integral::{integrate_paths, isometry_norm, kernel_variance};
use lfbm::{CovKind, Error, FracKernelMatrix, HurstOrder, NodeValues, PathEnsemble, Scheme, Side, StepFunction, TimeGrid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfbmStatus {
    Ok = 0,
    InvalidParameter = 1,
    GridMismatch = 2,
    DimensionMismatch = 3,
    IllConditioned = 4,
    NotPositiveDefinite = 5,
    Divergent = 6,
    MemoryGuard = 7,
    Config = 8,
    Io = 9,
    Json = 10,
    NullPointer = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfbmSide {
    Left = 0,
    Right = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfbmScheme {
    Cholesky = 0,
    MovingAverage = 1,
}

/// Fractional integral matrix on a uniform grid starting at 0.
pub struct LfbmKernel(FracKernelMatrix);

/// Liouville fBm paths, `n_paths × (n_cells + 1)` values.
pub struct LfbmEnsemble(PathEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn status_of(e: &Error) -> LfbmStatus {
    match e {
        Error::InvalidParameter { .. } => LfbmStatus::InvalidParameter,
        Error::GridMismatch(_) => LfbmStatus::GridMismatch,
        Error::DimensionMismatch { .. } => LfbmStatus::DimensionMismatch,
        Error::IllConditioned { .. } => LfbmStatus::IllConditioned,
        Error::NotPositiveDefinite { .. } => LfbmStatus::NotPositiveDefinite,
        Error::Divergent(_) => LfbmStatus::Divergent,
        Error::MemoryGuard { .. } => LfbmStatus::MemoryGuard,
        Error::Config(_) => LfbmStatus::Config,
        Error::Io { .. } => LfbmStatus::Io,
        Error::Json(_) => LfbmStatus::Json,
    }
}

enum Failure {
    Lib(Error),
    Status(LfbmStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null() -> Failure {
    Failure::Status(LfbmStatus::NullPointer, "null pointer argument".into())
}

fn set_error(msg: String) {
    LAST_ERROR.with(|m| *m.borrow_mut() = msg);
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LfbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LfbmStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            LfbmStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null());
    }
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if len < needed {
        return Err(Failure::Status(
            LfbmStatus::BufferTooSmall,
            format!("output buffer holds {len} values, {needed} needed"),
        ));
    }
    if ptr.is_null() {
        return Err(null());
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(ptr, needed) })
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    unsafe { out.write(value) };
    Ok(())
}

fn side(s: LfbmSide) -> Side {
    match s {
        LfbmSide::Left => Side::Left,
        LfbmSide::Right => Side::Right,
    }
}

/// Copies the calling thread's last error message (NUL terminated,
/// truncated to fit) into `buf` and returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lfbm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|m| {
        let m = m.borrow();
        if !buf.is_null() && len > 0 {
            let n = m.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(m.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        m.len()
    })
}

/// `Cov(W(s), W(t))` of Liouville fBm with Hurst order `beta`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lfbm_cov_liouville(s: f64, t: f64, beta: f64, out: *mut f64) -> LfbmStatus {
    guard(|| unsafe { write(out, cov_liouville(s, t, HurstOrder::new(beta)?)?) })
}

/// Isometry norm of the step function with `n_cells` values on `(0, t_end)`.
///
/// # Safety
/// `values` must point to `n_cells` doubles and `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lfbm_isometry_norm(
    t_end: f64,
    values: *const f64,
    n_cells: usize,
    beta: f64,
    out: *mut f64,
) -> LfbmStatus {
    guard(|| unsafe {
        let grid = TimeGrid::unit_start(t_end, n_cells)?;
        let f = StepFunction::new(grid, slice(values, n_cells)?.to_vec())?;
        write(out, isometry_norm(&f, HurstOrder::new(beta)?)?)
    })
}

/// Standard deviation of `∫_s^t (t-r)^{-alpha} dW(r)`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lfbm_kernel_variance(s: f64, t: f64, alpha: f64, beta: f64, out: *mut f64) -> LfbmStatus {
    guard(|| unsafe { write(out, kernel_variance(s, t, alpha, HurstOrder::new(beta)?)?) })
}

/// Variance at time `t` of the stochastic convolution of one heat mode
/// with eigenvalue `lambda`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn lfbm_mode_variance(lambda: f64, t: f64, beta: f64, out: *mut f64) -> LfbmStatus {
    guard(|| unsafe { write(out, mode_variance(lambda, t, HurstOrder::new(beta)?)?) })
}

/// Builds the order-`order` fractional integral matrix on `n_cells` cells
/// of `(0, t_end)`.
///
/// # Safety
/// `out` must be valid for a write; the handle is freed with
/// [`lfbm_kernel_free`].
#[no_mangle]
pub unsafe extern "C" fn lfbm_kernel_new(
    t_end: f64,
    n_cells: usize,
    order: f64,
    side_: LfbmSide,
    out: *mut *mut LfbmKernel,
) -> LfbmStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null());
        }
        let k = FracKernelMatrix::new(TimeGrid::unit_start(t_end, n_cells)?, order, side(side_))?;
        write(out, Box::into_raw(Box::new(LfbmKernel(k))))
    })
}

/// Applies the integral to cell values, writing `n_cells` node values.
///
/// # Safety
/// `kernel` must come from [`lfbm_kernel_new`]; `values` must point to
/// `n_cells` doubles and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lfbm_kernel_apply(
    kernel: *const LfbmKernel,
    values: *const f64,
    n_cells: usize,
    out: *mut f64,
    out_len: usize,
) -> LfbmStatus {
    guard(|| unsafe {
        let k = &kernel.as_ref().ok_or_else(null)?.0;
        let f = StepFunction::new(*k.grid(), slice(values, n_cells)?.to_vec())?;
        let g = k.apply(&f)?;
        slice_mut(out, out_len, g.values.len())?.copy_from_slice(&g.values);
        Ok(())
    })
}

/// Solves for the cell values whose integral equals the given node values
/// (the discrete fractional derivative).
///
/// # Safety
/// As for [`lfbm_kernel_apply`].
#[no_mangle]
pub unsafe extern "C" fn lfbm_kernel_solve(
    kernel: *const LfbmKernel,
    node_values: *const f64,
    n_nodes: usize,
    out: *mut f64,
    out_len: usize,
) -> LfbmStatus {
    guard(|| unsafe {
        let k = &kernel.as_ref().ok_or_else(null)?.0;
        let g = NodeValues::new(*k.grid(), k.side(), slice(node_values, n_nodes)?.to_vec())?;
        let f = k.solve_derivative(&g)?;
        slice_mut(out, out_len, f.values().len())?.copy_from_slice(f.values());
        Ok(())
    })
}

/// # Safety
/// `kernel` must be null or come from [`lfbm_kernel_new`], and is invalid
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn lfbm_kernel_free(kernel: *mut LfbmKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// Samples `n_paths` Liouville fBm paths on `n_cells` cells of `(0, t_end)`.
///
/// # Safety
/// `out` must be valid for a write; the handle is freed with
/// [`lfbm_ensemble_free`].
#[no_mangle]
pub unsafe extern "C" fn lfbm_ensemble_sample(
    t_end: f64,
    n_cells: usize,
    beta: f64,
    scheme: LfbmScheme,
    n_paths: usize,
    seed: u64,
    out: *mut *mut LfbmEnsemble,
) -> LfbmStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null());
        }
        let scheme = match scheme {
            LfbmScheme::Cholesky => Scheme::Cholesky,
            LfbmScheme::MovingAverage => Scheme::MovingAverage,
        };
        let grid = TimeGrid::unit_start(t_end, n_cells)?;
        let e = fbm::sample(grid, HurstOrder::new(beta)?, CovKind::Liouville, scheme, n_paths, seed)?;
        write(out, Box::into_raw(Box::new(LfbmEnsemble(e))))
    })
}

/// Writes the number of paths and of nodes per path.
///
/// # Safety
/// `ensemble` must come from [`lfbm_ensemble_sample`]; the out pointers
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn lfbm_ensemble_shape(
    ensemble: *const LfbmEnsemble,
    n_paths: *mut usize,
    n_nodes: *mut usize,
) -> LfbmStatus {
    guard(|| unsafe {
        let e = &ensemble.as_ref().ok_or_else(null)?.0;
        write(n_paths, e.n_paths)?;
        write(n_nodes, e.n_nodes())
    })
}

/// Copies path `index` (node values, starting with 0) into `out`.
///
/// # Safety
/// `ensemble` must come from [`lfbm_ensemble_sample`] and `out` must point
/// to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lfbm_ensemble_path(
    ensemble: *const LfbmEnsemble,
    index: usize,
    out: *mut f64,
    out_len: usize,
) -> LfbmStatus {
    guard(|| unsafe {
        let e = &ensemble.as_ref().ok_or_else(null)?.0;
        if index >= e.n_paths {
            return Err(Failure::Status(
                LfbmStatus::InvalidParameter,
                format!("path index {index} out of range (n_paths = {})", e.n_paths),
            ));
        }
        let p = e.path(index);
        slice_mut(out, out_len, p.len())?.copy_from_slice(p);
        Ok(())
    })
}

/// Pathwise integral of a step function against every path, one value
/// per path.
///
/// # Safety
/// `ensemble` must come from [`lfbm_ensemble_sample`]; `values` must point
/// to `n_cells` doubles and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lfbm_ensemble_integrate(
    ensemble: *const LfbmEnsemble,
    values: *const f64,
    n_cells: usize,
    out: *mut f64,
    out_len: usize,
) -> LfbmStatus {
    guard(|| unsafe {
        let e = &ensemble.as_ref().ok_or_else(null)?.0;
        let f = StepFunction::new(e.grid, slice(values, n_cells)?.to_vec())?;
        let x = integrate_paths(&f, e.beta, e)?;
        slice_mut(out, out_len, x.values.len())?.copy_from_slice(&x.values);
        Ok(())
    })
}

/// # Safety
/// `ensemble` must be null or come from [`lfbm_ensemble_sample`], and is
/// invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn lfbm_ensemble_free(ensemble: *mut LfbmEnsemble) {
    if !ensemble.is_null() {
        drop(unsafe { Box::from_raw(ensemble) });
    }
}

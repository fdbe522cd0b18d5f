//! C ABI over the `hdcov` estimators.
//!
//! Matrices cross the boundary as opaque `HdcovMatrix` handles built from
//! row-major buffers. Every fallible call returns an `HdcovStatus`; on
//! failure a description is available from `hdcov_last_error_message` on the
//! same thread. Handles returned through out-pointers are owned by the caller
//! and released with `hdcov_matrix_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hdcov::inference::{bh_procedure, PValueSet};
use hdcov::precision::{graphical_lasso, partial_correlations};
use hdcov::regularize::{adaptive_threshold, ThresholdKind};
use hdcov::shrinkage::{ledoit_wolf, schafer_strimmer, stein_shrink, SsTarget};
use hdcov::spectra::{mp_cdf, mp_law};
use hdcov::{DataMatrix, Error, Scaling, SymmetricMatrix};
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdcovStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    NotSymmetric = 4,
    NonFinite = 5,
    Singular = 6,
    NotConverged = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Opaque dense matrix.
pub struct HdcovMatrix {
    inner: DMatrix<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: HdcovStatus, msg: impl Into<String>) -> HdcovStatus {
    set_error(msg.into());
    status
}

fn from_core(err: Error) -> HdcovStatus {
    let status = match &err {
        Error::InvalidInput(_) => HdcovStatus::InvalidInput,
        Error::DimensionMismatch { .. } => HdcovStatus::DimensionMismatch,
        Error::NotSymmetric { .. } => HdcovStatus::NotSymmetric,
        Error::NonFinite { .. } => HdcovStatus::NonFinite,
        Error::Singular(_) => HdcovStatus::Singular,
        Error::NotConverged { .. } => HdcovStatus::NotConverged,
    };
    fail(status, err.to_string())
}

/// Runs `f` with the last error cleared, converting panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), HdcovStatus>) -> HdcovStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HdcovStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(HdcovStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn check<T>(r: hdcov::Result<T>) -> Result<T, HdcovStatus> {
    r.map_err(from_core)
}

unsafe fn matrix_ref<'a>(m: *const HdcovMatrix, name: &str) -> Result<&'a DMatrix<f64>, HdcovStatus> {
    if m.is_null() {
        return Err(fail(HdcovStatus::NullPointer, format!("{name} is null")));
    }
    Ok(&(*m).inner)
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), HdcovStatus> {
    if p.is_null() {
        return Err(fail(HdcovStatus::NullPointer, format!("{name} is null")));
    }
    Ok(())
}

unsafe fn emit(out: *mut *mut HdcovMatrix, m: DMatrix<f64>) {
    *out = Box::into_raw(Box::new(HdcovMatrix { inner: m }));
}

fn symmetric(m: &DMatrix<f64>) -> Result<SymmetricMatrix, HdcovStatus> {
    check(SymmetricMatrix::new(m.clone()))
}

fn data(m: &DMatrix<f64>) -> Result<DataMatrix, HdcovStatus> {
    check(DataMatrix::new(m.clone()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hdcov_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hdcov_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Builds a `rows × cols` matrix from a row-major buffer.
///
/// # Safety
/// `values` must be valid for `rows * cols` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_matrix_new(
    rows: usize,
    cols: usize,
    values: *const f64,
    out: *mut *mut HdcovMatrix,
) -> HdcovStatus {
    guard(|| {
        out_ptr(out, "out")?;
        if values.is_null() {
            return Err(fail(HdcovStatus::NullPointer, "values is null"));
        }
        if rows == 0 || cols == 0 {
            return Err(fail(HdcovStatus::InvalidInput, "matrix dimensions must be positive"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(HdcovStatus::InvalidInput, "matrix dimensions overflow"))?;
        let slice = std::slice::from_raw_parts(values, len);
        emit(out, DMatrix::from_row_slice(rows, cols, slice));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hdcov_matrix_free(m: *mut HdcovMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_matrix_shape(m: *const HdcovMatrix, rows: *mut usize, cols: *mut usize) -> HdcovStatus {
    guard(|| {
        let m = matrix_ref(m, "matrix")?;
        out_ptr(rows, "rows")?;
        out_ptr(cols, "cols")?;
        *rows = m.nrows();
        *cols = m.ncols();
        Ok(())
    })
}

/// Copies the entries in row-major order into `buf`, which holds `len`
/// values.
///
/// # Safety
/// `m` must be a live handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn hdcov_matrix_copy(m: *const HdcovMatrix, buf: *mut f64, len: usize) -> HdcovStatus {
    guard(|| {
        let m = matrix_ref(m, "matrix")?;
        out_ptr(buf, "buf")?;
        let need = m.nrows() * m.ncols();
        if len < need {
            return Err(fail(HdcovStatus::BufferTooSmall, format!("buffer holds {len} values, need {need}")));
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[i * m.ncols() + j] = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Sample covariance of `n × p` data; divisor `n − 1` when `unbiased`,
/// else `n`.
///
/// # Safety
/// `x` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_sample_covariance(x: *const HdcovMatrix, unbiased: bool, out: *mut *mut HdcovMatrix) -> HdcovStatus {
    guard(|| {
        let x = data(matrix_ref(x, "x")?)?;
        out_ptr(out, "out")?;
        let scaling = if unbiased { Scaling::Unbiased } else { Scaling::Population };
        emit(out, x.covariance(scaling).into_inner());
        Ok(())
    })
}

/// Ledoit-Wolf estimate toward a scaled identity. `intensity` may be null.
///
/// # Safety
/// `x` must be a live handle; `out` must be writable; `intensity` null or writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_ledoit_wolf(x: *const HdcovMatrix, out: *mut *mut HdcovMatrix, intensity: *mut f64) -> HdcovStatus {
    guard(|| {
        let x = data(matrix_ref(x, "x")?)?;
        out_ptr(out, "out")?;
        let (est, _) = check(ledoit_wolf(&x))?;
        if !intensity.is_null() {
            *intensity = est.intensity;
        }
        emit(out, est.estimate.into_inner());
        Ok(())
    })
}

/// Schäfer-Strimmer estimate; `target` is one of `'A'..='F'`.
/// `intensity` may be null.
///
/// # Safety
/// `x` must be a live handle; `out` must be writable; `intensity` null or writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_schafer_strimmer(
    x: *const HdcovMatrix,
    target: c_char,
    out: *mut *mut HdcovMatrix,
    intensity: *mut f64,
) -> HdcovStatus {
    guard(|| {
        let x = data(matrix_ref(x, "x")?)?;
        out_ptr(out, "out")?;
        let t: SsTarget = check((target as u8 as char).to_string().parse())?;
        let est = check(schafer_strimmer(&x, t))?;
        if !intensity.is_null() {
            *intensity = est.intensity;
        }
        emit(out, est.estimate.into_inner());
        Ok(())
    })
}

/// Stein eigenvalue-shrunk covariance from a `p × p` sample covariance
/// computed from `n` observations.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_stein(s: *const HdcovMatrix, n: usize, out: *mut *mut HdcovMatrix) -> HdcovStatus {
    guard(|| {
        let s = symmetric(matrix_ref(s, "s")?)?;
        out_ptr(out, "out")?;
        emit(out, check(stein_shrink(&s, n))?.estimate().into_inner());
        Ok(())
    })
}

/// Adaptive (entry-specific) thresholding of the sample covariance of `x`.
///
/// # Safety
/// `x` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_adaptive_threshold(
    x: *const HdcovMatrix,
    delta: f64,
    soft: bool,
    out: *mut *mut HdcovMatrix,
) -> HdcovStatus {
    guard(|| {
        let x = data(matrix_ref(x, "x")?)?;
        out_ptr(out, "out")?;
        let kind = if soft { ThresholdKind::Soft } else { ThresholdKind::Hard };
        emit(out, check(adaptive_threshold(&x, delta, kind))?.into_inner());
        Ok(())
    })
}

/// Graphical lasso precision estimate for covariance `s`.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_graphical_lasso(
    s: *const HdcovMatrix,
    lambda: f64,
    tol: f64,
    out: *mut *mut HdcovMatrix,
) -> HdcovStatus {
    guard(|| {
        let s = symmetric(matrix_ref(s, "s")?)?;
        out_ptr(out, "out")?;
        emit(out, check(graphical_lasso(&s, lambda, tol))?.theta.into_inner());
        Ok(())
    })
}

/// Partial correlations `−ω_ij / sqrt(ω_ii ω_jj)` of a precision matrix.
///
/// # Safety
/// `omega` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_partial_correlations(omega: *const HdcovMatrix, out: *mut *mut HdcovMatrix) -> HdcovStatus {
    guard(|| {
        let omega = symmetric(matrix_ref(omega, "omega")?)?;
        out_ptr(out, "out")?;
        emit(out, check(partial_correlations(&omega))?.into_inner());
        Ok(())
    })
}

/// Benjamini-Hochberg at level `alpha`. Writes 1 for rejected hypotheses
/// and 0 otherwise into `rejected` (length `m`); the rejection count goes
/// to `num_rejected` unless it is null.
///
/// # Safety
/// `pvalues` must be valid for `m` reads and `rejected` for `m` writes.
#[no_mangle]
pub unsafe extern "C" fn hdcov_benjamini_hochberg(
    pvalues: *const f64,
    m: usize,
    alpha: f64,
    rejected: *mut u8,
    num_rejected: *mut usize,
) -> HdcovStatus {
    guard(|| {
        if pvalues.is_null() || rejected.is_null() {
            return Err(fail(HdcovStatus::NullPointer, "pvalues and rejected must be non-null"));
        }
        let values = std::slice::from_raw_parts(pvalues, m).to_vec();
        let set = check(PValueSet::from_values(values))?;
        let d = check(bh_procedure(&set, alpha))?;
        let out = std::slice::from_raw_parts_mut(rejected, m);
        for (o, &r) in out.iter_mut().zip(&d.rejected) {
            *o = r as u8;
        }
        if !num_rejected.is_null() {
            *num_rejected = d.num_rejected();
        }
        Ok(())
    })
}

/// Marchenko-Pastur CDF at `x` for scale `sigma` and ratio `y = p/n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hdcov_mp_cdf(x: f64, sigma: f64, y: f64, out: *mut f64) -> HdcovStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let law = check(mp_law(sigma, y))?;
        *out = mp_cdf(x, &law);
        Ok(())
    })
}

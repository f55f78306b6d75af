//! C ABI over the `snvc` engine.
//!
//! Every fallible function returns an [`SnvcStatus`]; on failure the message is
//! available from [`snvc_last_error_message`] on the same thread. Handles are
//! opaque and must be released with the matching `_free` function. Matrices are
//! column-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use nalgebra::DMatrix;
use snvc::{
    build_proximity, fit_snvc_with_basis, moran_coefficient, mst_range, ErrorClass, ModelSpec, RemlConfig, SiteSet,
    SnvcError, SpatialBasis, SplineFamily,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnvcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericalError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnvcSpline {
    NaturalCubic = 0,
    ThinPlate = 1,
}

/// Which additive part of the coefficient field to copy out.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnvcCoefPart {
    Mean = 0,
    Svc = 1,
    Nvc = 2,
    Total = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SnvcFitOptions {
    /// Spline basis size for every NVC term.
    pub n_basis: usize,
    pub spline: SnvcSpline,
    /// Likelihood evaluation budget per optimizer start.
    pub max_evals: usize,
}

/// Moran eigenvector basis of a site set.
pub struct SnvcSpatialBasis(SpatialBasis);

/// A fitted model with its coefficient fields.
pub struct SnvcFit(snvc::SnvcFit);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SnvcStatus, String);

impl From<SnvcError> for Failure {
    fn from(e: SnvcError) -> Self {
        let status = match e.class() {
            ErrorClass::Usage => SnvcStatus::InvalidArgument,
            ErrorClass::Data => SnvcStatus::DataError,
            ErrorClass::Numerical => SnvcStatus::NumericalError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SnvcStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SnvcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SnvcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SnvcStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, out_len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if out_len < src.len() {
        return Err(Failure(
            SnvcStatus::BufferTooSmall,
            format!("buffer holds {out_len} values, {} needed", src.len()),
        ));
    }
    slice::from_raw_parts_mut(out, src.len()).copy_from_slice(src);
    Ok(())
}

unsafe fn sites_from(coords: *const f64, n_sites: usize) -> Result<SiteSet, Failure> {
    let c = input(coords, 2 * n_sites, "coords")?;
    Ok(SiteSet::new(c.chunks_exact(2).map(|p| [p[0], p[1]]).collect())?)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn snvc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snvc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

#[no_mangle]
pub extern "C" fn snvc_fit_options_default() -> SnvcFitOptions {
    SnvcFitOptions { n_basis: 10, spline: SnvcSpline::NaturalCubic, max_evals: RemlConfig::default().max_evals }
}

/// Builds the Moran eigenvector basis for `n_sites` points given as
/// interleaved `x0, y0, x1, y1, ...`.
///
/// # Safety
/// `coords` must point to `2 * n_sites` readable doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn snvc_spatial_basis_new(
    coords: *const f64,
    n_sites: usize,
    out: *mut *mut SnvcSpatialBasis,
) -> SnvcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let basis = SpatialBasis::from_sites(&sites_from(coords, n_sites)?)?;
        *out = Box::into_raw(Box::new(SnvcSpatialBasis(basis)));
        Ok(())
    })
}

/// # Safety
/// `basis` must be null or a handle from [`snvc_spatial_basis_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snvc_spatial_basis_free(basis: *mut SnvcSpatialBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// # Safety
/// `basis` must be a live handle; `n_sites`, `n_eigen` and `range` writable.
#[no_mangle]
pub unsafe extern "C" fn snvc_spatial_basis_info(
    basis: *const SnvcSpatialBasis,
    n_sites: *mut usize,
    n_eigen: *mut usize,
    range: *mut f64,
) -> SnvcStatus {
    guard(|| {
        let b = &basis.as_ref().ok_or_else(|| null("basis"))?.0;
        if n_sites.is_null() || n_eigen.is_null() || range.is_null() {
            return Err(null("out"));
        }
        *n_sites = b.n_sites();
        *n_eigen = b.len();
        *range = b.range();
        Ok(())
    })
}

/// Copies the retained eigenvalues, largest first.
///
/// # Safety
/// `basis` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snvc_spatial_basis_eigenvalues(
    basis: *const SnvcSpatialBasis,
    out: *mut f64,
    out_len: usize,
) -> SnvcStatus {
    guard(|| copy_out(basis.as_ref().ok_or_else(|| null("basis"))?.0.eigvals(), out, out_len))
}

/// Copies the `n_sites x n_eigen` eigenvector matrix.
///
/// # Safety
/// `basis` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snvc_spatial_basis_eigenvectors(
    basis: *const SnvcSpatialBasis,
    out: *mut f64,
    out_len: usize,
) -> SnvcStatus {
    guard(|| copy_out(basis.as_ref().ok_or_else(|| null("basis"))?.0.eigvecs().as_slice(), out, out_len))
}

/// Moran coefficient of `z` under `exp(-d / r)` weights with `r` the longest
/// minimum spanning tree edge.
///
/// # Safety
/// `coords` must hold `2 * n_sites` doubles, `z` `n_sites` doubles, `out` one writable double.
#[no_mangle]
pub unsafe extern "C" fn snvc_moran_coefficient(
    coords: *const f64,
    n_sites: usize,
    z: *const f64,
    out: *mut f64,
) -> SnvcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sites = sites_from(coords, n_sites)?;
        let z = input(z, n_sites, "z")?;
        let c = build_proximity(&sites, mst_range(&sites)?)?;
        *out = moran_coefficient(z, &c)?;
        Ok(())
    })
}

/// Fits the model. `x` is `n_sites x n_covariates`; include a column of ones for
/// an intercept. `has_svc` and `has_nvc` hold one flag per covariate. `basis` may
/// be null when no flag in `has_svc` is set. `options` may be null for defaults.
///
/// # Safety
/// `x` must hold `n_sites * n_covariates` doubles, `y` `n_sites` doubles, the flag
/// arrays `n_covariates` bytes each; `basis` and `options` must be null or valid;
/// `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn snvc_fit(
    basis: *const SnvcSpatialBasis,
    x: *const f64,
    y: *const f64,
    n_sites: usize,
    n_covariates: usize,
    has_svc: *const u8,
    has_nvc: *const u8,
    options: *const SnvcFitOptions,
    out: *mut *mut SnvcFit,
) -> SnvcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let xs = input(x, n_sites * n_covariates, "x")?;
        let y = input(y, n_sites, "y")?;
        let svc: Vec<bool> = input(has_svc, n_covariates, "has_svc")?.iter().map(|&b| b != 0).collect();
        let nvc: Vec<bool> = input(has_nvc, n_covariates, "has_nvc")?.iter().map(|&b| b != 0).collect();
        let opts = options.as_ref().copied().unwrap_or_else(|| snvc_fit_options_default());
        let spatial = basis.as_ref().map(|b| b.0.clone());
        if spatial.is_none() && svc.iter().any(|&s| s) {
            return Err(Failure(SnvcStatus::InvalidArgument, "SVC terms requested without a spatial basis".into()));
        }
        let family = match opts.spline {
            SnvcSpline::NaturalCubic => SplineFamily::NaturalCubic,
            SnvcSpline::ThinPlate => SplineFamily::ThinPlate1d,
        };
        let names = (0..n_covariates).map(|k| format!("x{k}")).collect();
        let spec = ModelSpec::new(names, svc, nvc, vec![opts.n_basis; n_covariates], family)?;
        let config = RemlConfig { max_evals: opts.max_evals, ..RemlConfig::default() };
        let xm = DMatrix::from_column_slice(n_sites, n_covariates, xs);
        let fit = fit_snvc_with_basis(spatial, &xm, y, &spec, &config)?;
        *out = Box::into_raw(Box::new(SnvcFit(fit)));
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle from [`snvc_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snvc_fit_free(fit: *mut SnvcFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Scalar results. `converged` is set to 1 or 0.
///
/// # Safety
/// `fit` must be a live handle; every output pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn snvc_fit_summary(
    fit: *const SnvcFit,
    n_sites: *mut usize,
    n_covariates: *mut usize,
    sigma2: *mut f64,
    restricted_loglik: *mut f64,
    converged: *mut u8,
) -> SnvcStatus {
    guard(|| {
        let f = &fit.as_ref().ok_or_else(|| null("fit"))?.0;
        if n_sites.is_null() || n_covariates.is_null() || sigma2.is_null() || restricted_loglik.is_null() || converged.is_null()
        {
            return Err(null("out"));
        }
        *n_sites = f.coefficients.n_sites();
        *n_covariates = f.model.spec.k();
        *sigma2 = f.model.theta.sigma2;
        *restricted_loglik = f.model.restricted_loglik;
        *converged = u8::from(f.model.converged);
        Ok(())
    })
}

/// Variance parameters of covariate `k`.
///
/// # Safety
/// `fit` must be a live handle; the three outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn snvc_fit_theta(
    fit: *const SnvcFit,
    k: usize,
    tau2_svc: *mut f64,
    alpha: *mut f64,
    tau2_nvc: *mut f64,
) -> SnvcStatus {
    guard(|| {
        let f = &fit.as_ref().ok_or_else(|| null("fit"))?.0;
        if tau2_svc.is_null() || alpha.is_null() || tau2_nvc.is_null() {
            return Err(null("out"));
        }
        let t = f
            .model
            .theta
            .terms
            .get(k)
            .ok_or_else(|| Failure(SnvcStatus::InvalidArgument, format!("covariate index {k} out of range")))?;
        *tau2_svc = t.tau2_s;
        *alpha = t.alpha;
        *tau2_nvc = t.tau2_n;
        Ok(())
    })
}

/// Copies the `n_covariates` fixed-effect estimates.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snvc_fit_fixed_effects(fit: *const SnvcFit, out: *mut f64, out_len: usize) -> SnvcStatus {
    guard(|| copy_out(&fit.as_ref().ok_or_else(|| null("fit"))?.0.model.b_hat, out, out_len))
}

/// Copies the share of the spatially varying part per covariate.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snvc_fit_svc_shares(fit: *const SnvcFit, out: *mut f64, out_len: usize) -> SnvcStatus {
    guard(|| copy_out(&fit.as_ref().ok_or_else(|| null("fit"))?.0.coefficients.svc_share, out, out_len))
}

/// Copies one part of the coefficient field as an `n_sites x n_covariates` matrix.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snvc_fit_coefficients(
    fit: *const SnvcFit,
    part: SnvcCoefPart,
    out: *mut f64,
    out_len: usize,
) -> SnvcStatus {
    guard(|| {
        let c = &fit.as_ref().ok_or_else(|| null("fit"))?.0.coefficients;
        let n = c.n_sites();
        let values: Vec<f64> = match part {
            SnvcCoefPart::Mean => c.mean.iter().flat_map(|&m| std::iter::repeat_n(m, n)).collect(),
            SnvcCoefPart::Svc => c.svc.concat(),
            SnvcCoefPart::Nvc => c.nvc.concat(),
            SnvcCoefPart::Total => c.total.concat(),
        };
        copy_out(&values, out, out_len)
    })
}

//! C ABI over the online reduced-basis solver: load persisted artifacts into
//! an opaque handle and evaluate `k_eff`, the eigenvalue and the residual
//! estimators at raw coefficient parameters.
//!
//! Every function is panic-safe (panics map to [`RbStatus::Panic`]) and all
//! pointers are checked for null before use.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rbeig::driver::OnlineModel;
use rbeig::hifi::{ParameterPoint, SubdomainCoefficients};

/// ABI version of this header; bump on breaking changes.
pub const RBEIG_ABI_VERSION: u32 = 1;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    LoadFailed = 3,
    InvalidParameter = 4,
    SolveFailed = 5,
    Panic = 6,
}

/// Opaque reduced-basis model handle.
pub struct RbModel {
    inner: OnlineModel,
}

/// Online solve results for one parameter.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RbSolveResult {
    /// Effective multiplication factor `k_N`.
    pub k_eff: f64,
    /// Eigenvalue `lambda_N = 1/k_N`.
    pub lambda: f64,
    /// Residual norm of the direct problem.
    pub residual_direct: f64,
    /// Residual norm of the adjoint problem.
    pub residual_adjoint: f64,
    /// Eigenvalue estimator `eta_k`.
    pub eta_k: f64,
    /// Calibrated error estimate `delta_k`; NaN when uncalibrated.
    pub delta_k: f64,
    /// Power iteration counts (direct, adjoint).
    pub iterations_direct: u32,
    pub iterations_adjoint: u32,
}

#[no_mangle]
pub extern "C" fn rbeig_abi_version() -> u32 {
    RBEIG_ABI_VERSION
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn rbeig_status_message(status: RbStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        RbStatus::Ok => b"ok\0",
        RbStatus::NullArgument => b"null argument\0",
        RbStatus::InvalidUtf8 => b"path is not valid UTF-8\0",
        RbStatus::LoadFailed => b"artifact directory failed to load\0",
        RbStatus::InvalidParameter => b"parameter violates model constraints\0",
        RbStatus::SolveFailed => b"reduced solve failed\0",
        RbStatus::Panic => b"internal panic\0",
    };
    msg.as_ptr() as *const c_char
}

/// Loads artifacts produced by `rbeig offline` into a model handle.
///
/// # Safety
/// `artifact_dir` must be a NUL-terminated string and `out` a valid pointer;
/// the returned handle must be released with [`rbeig_model_free`].
#[no_mangle]
pub unsafe extern "C" fn rbeig_model_load(
    artifact_dir: *const c_char,
    out: *mut *mut RbModel,
) -> RbStatus {
    if artifact_dir.is_null() || out.is_null() {
        return RbStatus::NullArgument;
    }
    let result = catch_unwind(AssertUnwindSafe(|| {
        let path = match CStr::from_ptr(artifact_dir).to_str() {
            Ok(s) => s,
            Err(_) => return RbStatus::InvalidUtf8,
        };
        match OnlineModel::load(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RbModel { inner }));
                RbStatus::Ok
            }
            Err(_) => RbStatus::LoadFailed,
        }
    }));
    result.unwrap_or(RbStatus::Panic)
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must come from [`rbeig_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rbeig_model_free(model: *mut RbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Reduced-basis dimension of the loaded model.
///
/// # Safety
/// `model` must be a live handle from [`rbeig_model_load`].
#[no_mangle]
pub unsafe extern "C" fn rbeig_model_basis_dim(model: *const RbModel) -> u32 {
    if model.is_null() {
        return 0;
    }
    (*model).inner.basis_dim() as u32
}

/// Number of parameter subdomains the model expects.
///
/// # Safety
/// `model` must be a live handle from [`rbeig_model_load`].
#[no_mangle]
pub unsafe extern "C" fn rbeig_model_subdomain_count(model: *const RbModel) -> u32 {
    if model.is_null() {
        return 0;
    }
    (*model).inner.manifest.k_subdomains as u32
}

/// Solves the reduced eigenproblem at one parameter given as raw
/// coefficients: `f_coeffs` holds `6 * K` values `(D1, Sigma11, Sigma12, D2,
/// Sigma21, Sigma22)` per subdomain and `g_coeffs` `4 * K` fission products
/// `(chi1 nuSigf1, chi1 nuSigf2, chi2 nuSigf1, chi2 nuSigf2)`.
///
/// # Safety
/// `model` must be a live handle; `f_coeffs` and `g_coeffs` must point to at
/// least `6 * K` and `4 * K` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rbeig_model_solve(
    model: *const RbModel,
    f_coeffs: *const f64,
    g_coeffs: *const f64,
    out: *mut RbSolveResult,
) -> RbStatus {
    if model.is_null() || f_coeffs.is_null() || g_coeffs.is_null() || out.is_null() {
        return RbStatus::NullArgument;
    }
    let result = catch_unwind(AssertUnwindSafe(|| {
        let model = &(*model).inner;
        let k = model.manifest.k_subdomains;
        let f = std::slice::from_raw_parts(f_coeffs, 6 * k);
        let g = std::slice::from_raw_parts(g_coeffs, 4 * k);
        let mu = ParameterPoint {
            subdomains: (0..k)
                .map(|i| SubdomainCoefficients {
                    f: f[6 * i..6 * i + 6].try_into().unwrap(),
                    g: g[4 * i..4 * i + 4].try_into().unwrap(),
                })
                .collect(),
            macros: None,
        };
        if mu.validate().is_err() {
            return RbStatus::InvalidParameter;
        }
        let settings = model.manifest.config.solver.settings();
        match model.solve(&mu, &settings) {
            Ok(sol) => {
                *out = RbSolveResult {
                    k_eff: sol.k_n,
                    lambda: sol.lambda_n,
                    residual_direct: sol.norm_r,
                    residual_adjoint: sol.norm_r_star,
                    eta_k: sol.eta_k,
                    delta_k: sol.delta_k.unwrap_or(f64::NAN),
                    iterations_direct: sol.iterations.0 as u32,
                    iterations_adjoint: sol.iterations.1 as u32,
                };
                RbStatus::Ok
            }
            Err(_) => RbStatus::SolveFailed,
        }
    }));
    result.unwrap_or(RbStatus::Panic)
}

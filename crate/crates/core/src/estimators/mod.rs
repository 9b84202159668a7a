//! A posteriori estimator toolkit: residual pairs, the eigenvalue estimator
//! `eta_N^k`, exact and heuristic prefactors, perturbative diagnostics and
//! efficiency calibration.

mod calibrate;
mod perturbation;
mod prefactor;

pub use calibrate::{calibrate, CalibrationSet, EfficiencyRow};
pub use perturbation::{
    fit_log_log_slope, four_by_four_study_case, log_spaced, perturbation_study, PerturbationRow,
    PerturbationStudy,
};
pub use prefactor::{
    exact_prefactors, numrange_prefactor_bound, symmetric_prefactor, PrefactorContext,
    PrefactorReport,
};

use faer::{Col, Mat};
use thiserror::Error;

use crate::hifi::{GramNorm, ModelError};
use crate::linalg::{LinalgError, SparseMatrix};
use crate::residual::ResidualError;
use crate::rom::{ReducedSolution, RomError};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("degenerate pairing <u*_N, A u_N> = {pairing:e}")]
    DegeneratePairing { pairing: f64 },
    #[error("gap assumption k >= k_N > k2 > 0 violated: k = {k}, k_N = {k_n}, k2 = {k2}")]
    GapViolated { k: f64, k2: f64, k_n: f64 },
    #[error("k_N = {k_n} lies inside a numerical range interval [{low}, {high}]")]
    ZeroDistance { k_n: f64, low: f64, high: f64 },
    #[error("residual norm below cutoff; efficiency undefined")]
    ZeroResidual,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rom(#[from] RomError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
}

/// Absolute pairing floor of the `eta_N^k` denominator.
const ETA_PAIRING_TOL: f64 = 1e-14;

/// Residual vectors of an approximate eigenpair, with norms in the configured
/// dual norm (Euclidean when X = I).
#[derive(Clone, Debug)]
pub struct ResidualPair {
    pub r: Col<f64>,
    pub r_star: Col<f64>,
    pub norm_r: f64,
    pub norm_r_star: f64,
}

/// Minimal operator interface shared by sparse production matrices and the
/// dense diagnostics path.
pub trait MatVecOps {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Col<f64>) -> Col<f64>;
    fn apply_transpose(&self, x: &Col<f64>) -> Col<f64>;
}

impl MatVecOps for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &Col<f64>) -> Col<f64> {
        self.matvec(x)
    }
    fn apply_transpose(&self, x: &Col<f64>) -> Col<f64> {
        self.matvec_transpose(x)
    }
}

impl MatVecOps for Mat<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &Col<f64>) -> Col<f64> {
        self * x
    }
    fn apply_transpose(&self, x: &Col<f64>) -> Col<f64> {
        self.transpose() * x
    }
}

/// `R_N = (B - k_N A) u_N` and `R*_N = (B^T - k_N A^T) u*_N`.
pub fn residual_pair(
    a: &impl MatVecOps,
    b: &impl MatVecOps,
    u_n: &Col<f64>,
    u_star_n: &Col<f64>,
    k_n: f64,
    gram: &GramNorm,
) -> ResidualPair {
    let r = &b.apply(u_n) - &(k_n * &a.apply(u_n));
    let r_star = &b.apply_transpose(u_star_n) - &(k_n * &a.apply_transpose(u_star_n));
    let norm_r = gram.dual_norm(&r);
    let norm_r_star = gram.dual_norm(&r_star);
    ResidualPair {
        r,
        r_star,
        norm_r,
        norm_r_star,
    }
}

/// Residuals of a lifted reduced solution against the assembled pencil.
pub fn residuals(
    a_mu: &SparseMatrix,
    b_mu: &SparseMatrix,
    sol: &ReducedSolution,
    gram: &GramNorm,
) -> ResidualPair {
    let u_n = sol.u_n.as_ref().expect("solution must be lifted");
    let u_star_n = sol.u_star_n.as_ref().expect("solution must be lifted");
    residual_pair(a_mu, b_mu, u_n, u_star_n, sol.k_n, gram)
}

/// `eta_N^k = ||R_N|| ||R*_N|| / |<u*_N, A u_N>|`.
pub fn eta_k(
    res: &ResidualPair,
    u_n: &Col<f64>,
    u_star_n: &Col<f64>,
    a: &impl MatVecOps,
) -> Result<f64, EstimatorError> {
    let au = a.apply(u_n);
    let pairing: f64 = u_star_n.transpose() * &au;
    eta_k_from_pairing(res, pairing)
}

/// Same estimator with the pairing already known (e.g. from the reduced
/// equations, where `<c*, A_N c> = <u*_N, A u_N>`).
pub fn eta_k_from_pairing(res: &ResidualPair, pairing: f64) -> Result<f64, EstimatorError> {
    if pairing.abs() <= ETA_PAIRING_TOL {
        return Err(EstimatorError::DegeneratePairing { pairing });
    }
    Ok(res.norm_r * res.norm_r_star / pairing.abs())
}

/// Ratio of the skew to the symmetric part of `A` in spectral norm;
/// `+inf` when the symmetric part vanishes.
pub fn perturbation_magnitude(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let skew = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] - a[(j, i)]));
    let s = crate::linalg::spectral_norm(&sym);
    let t = crate::linalg::spectral_norm(&skew);
    if s == 0.0 {
        if t == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        t / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_zero_for_exact_pair() {
        // diag pencil: (u, lambda) = (e0, 2), k = 0.5
        let a = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 + 3.0 * i as f64 } else { 0.0 });
        let b = Mat::<f64>::identity(2, 2);
        let e0 = Col::from_fn(2, |i| if i == 0 { 1.0 } else { 0.0 });
        let gram = GramNorm::identity();
        let res = residual_pair(&a, &b, &e0, &e0, 0.5, &gram);
        assert!(res.norm_r < 1e-12 && res.norm_r_star < 1e-12);
        let eta = eta_k(&res, &e0, &e0, &a).unwrap();
        assert!(eta < 1e-24);
    }

    #[test]
    fn residual_of_perturbed_k_is_delta_times_au() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
        let b = Mat::<f64>::identity(3, 3);
        let spec = crate::linalg::dense_eig_oracle(&a, &b).unwrap();
        let (lam, u, _) = spec.smallest_real().unwrap();
        let k = 1.0 / lam;
        let delta = 1e-3;
        let gram = GramNorm::identity();
        let res = residual_pair(&a, &b, u, u, k + delta, &gram);
        let au_norm = (&a * u).norm_l2();
        assert!((res.norm_r - delta * au_norm).abs() < 1e-9 * au_norm);
    }

    #[test]
    fn eta_scale_invariance_under_renormalization() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 + i as f64 } else { 0.05 });
        let b = Mat::<f64>::identity(3, 3);
        let gram = GramNorm::identity();
        let u = Col::from_fn(3, |i| 0.5 + i as f64 * 0.1);
        let us = Col::from_fn(3, |i| 0.4 - i as f64 * 0.05);
        let (nu, nus) = (u.norm_l2(), us.norm_l2());
        let u_hat = (1.0 / nu) * &u;
        let us_hat = (1.0 / nus) * &us;
        let k_n = 0.7;
        let res_raw = residual_pair(&a, &b, &u, &us, k_n, &gram);
        let res_hat = residual_pair(&a, &b, &u_hat, &us_hat, k_n, &gram);
        let eta_raw = eta_k(&res_raw, &u, &us, &a).unwrap();
        let eta_hat = eta_k(&res_hat, &u_hat, &us_hat, &a).unwrap();
        assert!((eta_raw - eta_hat).abs() < 1e-12 * eta_raw.max(1.0));
    }

    #[test]
    fn degenerate_pairing_detected() {
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => 1.0,
            (0, 1) => -1.0,
            _ => 0.0,
        });
        let b = Mat::<f64>::identity(2, 2);
        let e0 = Col::from_fn(2, |i| if i == 0 { 1.0 } else { 0.0 });
        let e1 = Col::from_fn(2, |i| if i == 1 { 1.0 } else { 0.0 });
        let gram = GramNorm::identity();
        let res = residual_pair(&a, &b, &e0, &e1, 1.0, &gram);
        assert!(matches!(
            eta_k(&res, &e0, &e1, &a),
            Err(EstimatorError::DegeneratePairing { .. })
        ));
    }

    #[test]
    fn perturbation_magnitude_cases() {
        let sym = Mat::from_fn(2, 2, |i, j| if i == j { 3.0 } else { 1.0 });
        assert_eq!(perturbation_magnitude(&sym), 0.0);
        let skew = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => 2.0,
            (1, 0) => -2.0,
            _ => 0.0,
        });
        assert_eq!(perturbation_magnitude(&skew), f64::INFINITY);
        let mixed = &sym + &skew;
        let eps = perturbation_magnitude(&mixed);
        assert!(eps > 0.0 && eps.is_finite());
    }
}

//! Dense full-spectrum oracle for the generalized pencil `A v = lambda B v`.
//!
//! Eigenvalues come from a QZ decomposition; eigenvectors of (numerically)
//! real eigenvalues are recomputed by shift-perturbed inverse iteration on the
//! pencil, the left ones on the transposed pencil. Reserved for diagnostic
//! sizes; prefactor formulas are desk-scale, not online quantities.

use faer::linalg::solvers::{GeneralizedEigen, Solve};
use faer::{Col, Mat};
use num_complex::Complex;

use super::power::start_vector;
use super::{sign_normalize, LinalgError};

/// Relative imaginary-part threshold below which an eigenvalue is real.
const REALNESS_TOL: f64 = 1e-10;
/// Hard cap on the dense oracle; beyond this the full spectrum is pointless.
const MAX_ORACLE_DIM: usize = 5000;

#[derive(Clone, Debug)]
pub struct GenEigenPair {
    pub lambda: Complex<f64>,
    /// Unit right eigenvector; present when the eigenvalue is real and finite.
    pub right: Option<Col<f64>>,
    /// Unit left eigenvector of the same pencil (`A^T u* = lambda B^T u*`).
    pub left: Option<Col<f64>>,
    /// True for infinite eigenvalues (directions in the null space of B).
    pub infinite: bool,
}

impl GenEigenPair {
    pub fn is_real(&self) -> bool {
        !self.infinite && self.lambda.im.abs() <= REALNESS_TOL * self.lambda.norm().max(1e-300)
    }
}

#[derive(Clone, Debug)]
pub struct GeneralizedSpectrum {
    /// Eigenpairs sorted by |lambda| ascending; infinite eigenvalues last.
    pub pairs: Vec<GenEigenPair>,
    pub dim: usize,
}

impl GeneralizedSpectrum {
    /// Smallest-modulus real finite eigenpair `(lambda, u, u_star)`.
    pub fn smallest_real(&self) -> Result<(f64, &Col<f64>, &Col<f64>), LinalgError> {
        for p in &self.pairs {
            if p.is_real() {
                if let (Some(r), Some(l)) = (&p.right, &p.left) {
                    return Ok((p.lambda.re, r, l));
                }
            }
        }
        Err(LinalgError::NoRealEigenvalue)
    }

    /// Finite eigenvalues of `M = A^{-1}B` (the `k` values), sorted descending
    /// by real part, real ones only.
    pub fn k_values_real_desc(&self) -> Vec<f64> {
        let mut ks: Vec<f64> = self
            .pairs
            .iter()
            .filter(|p| p.is_real() && p.lambda.norm() > 0.0)
            .map(|p| 1.0 / p.lambda.re)
            .collect();
        ks.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ks
    }
}

/// Full generalized eigendecomposition of `(A, B)`.
pub fn dense_eig_oracle(a: &Mat<f64>, b: &Mat<f64>) -> Result<GeneralizedSpectrum, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(LinalgError::Dimension(
            "oracle requires square matrices of equal dimension".into(),
        ));
    }
    if n > MAX_ORACLE_DIM {
        return Err(LinalgError::Dimension(format!(
            "dense oracle limited to dimension {MAX_ORACLE_DIM}, got {n}"
        )));
    }
    // The complex single-shift QZ is used even for real input: the real
    // double-shift path underflows its deflation-window indices on
    // diffusion-like pencils, and these are diagnostic sizes anyway.
    let ac = Mat::from_fn(n, n, |i, j| Complex::new(a[(i, j)], 0.0));
    let bc = Mat::from_fn(n, n, |i, j| Complex::new(b[(i, j)], 0.0));
    let qz = GeneralizedEigen::new(ac.as_ref(), bc.as_ref())
        .map_err(|e| LinalgError::SolverFailure(format!("QZ failed: {e:?}")))?;
    let alphas = qz.S_a();
    let betas = qz.S_b();

    let mut scale = 0.0f64;
    for i in 0..n {
        scale = scale.max(alphas[i].norm()).max(betas[i].norm());
    }
    let scale = scale.max(1e-300);

    let mut pairs: Vec<GenEigenPair> = Vec::with_capacity(n);
    for i in 0..n {
        let alpha = alphas[i];
        let beta = betas[i];
        if beta.norm() <= 1e-14 * scale {
            pairs.push(GenEigenPair {
                lambda: Complex::new(f64::INFINITY, 0.0),
                right: None,
                left: None,
                infinite: true,
            });
            continue;
        }
        let lambda = alpha / beta;
        pairs.push(GenEigenPair {
            lambda,
            right: None,
            left: None,
            infinite: false,
        });
    }

    let lambda_scale = pairs
        .iter()
        .filter(|p| !p.infinite)
        .map(|p| p.lambda.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);

    for idx in 0..pairs.len() {
        if pairs[idx].is_real() {
            let lam = pairs[idx].lambda.re;
            pairs[idx].right = Some(eigvec_inverse_iteration(a, b, lam, lambda_scale, false)?);
            pairs[idx].left = Some(eigvec_inverse_iteration(a, b, lam, lambda_scale, true)?);
        }
    }

    pairs.sort_by(|x, y| {
        let mx = if x.infinite { f64::INFINITY } else { x.lambda.norm() };
        let my = if y.infinite { f64::INFINITY } else { y.lambda.norm() };
        mx.partial_cmp(&my)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| x.lambda.im.partial_cmp(&y.lambda.im).unwrap_or(std::cmp::Ordering::Equal))
    });

    Ok(GeneralizedSpectrum { pairs, dim: n })
}

/// Inverse iteration with a slightly perturbed shift. The perturbation keeps
/// `A - sigma B` factorizable even when `lambda` is exact to machine
/// precision; for simple eigenvalues a couple of iterations reach the
/// eigenvector floor.
fn eigvec_inverse_iteration(
    a: &Mat<f64>,
    b: &Mat<f64>,
    lambda: f64,
    lambda_scale: f64,
    left: bool,
) -> Result<Col<f64>, LinalgError> {
    let n = a.nrows();
    let a_norm = frob(a);
    let b_norm = frob(b);
    let res_scale = (a_norm + lambda.abs() * b_norm).max(1e-300);

    let mut delta = 3e-9 * lambda_scale.max(lambda.abs());
    for _attempt in 0..4 {
        let sigma = lambda + delta;
        let shifted = Mat::from_fn(n, n, |i, j| a[(i, j)] - sigma * b[(i, j)]);
        let lu = shifted.partial_piv_lu();

        let mut x = start_vector(n, 0xedac + n as u64);
        let mut best: Option<(f64, Col<f64>)> = None;
        for _ in 0..8 {
            let rhs = if left {
                b.transpose() * &x
            } else {
                b * &x
            };
            let mut y = if left {
                lu.solve_transpose(&rhs)
            } else {
                lu.solve(&rhs)
            };
            let norm = y.norm_l2();
            if !norm.is_finite() || norm == 0.0 {
                break;
            }
            for i in 0..n {
                y[i] /= norm;
            }
            let res = if left {
                (a.transpose() * &y - lambda * (b.transpose() * &y)).norm_l2()
            } else {
                (a * &y - lambda * (b * &y)).norm_l2()
            };
            let keep = best.as_ref().map_or(true, |(r, _)| res < *r);
            if keep {
                best = Some((res, y.clone()));
            }
            x = y;
            if res <= 1e-13 * res_scale {
                break;
            }
        }
        if let Some((res, mut v)) = best {
            if res <= 1e-8 * res_scale {
                sign_normalize(&mut v);
                return Ok(v);
            }
        }
        delta *= 32.0;
    }
    Err(LinalgError::SolverFailure(format!(
        "inverse iteration failed to produce an eigenvector for lambda = {lambda}"
    )))
}

fn frob(m: &Mat<f64>) -> f64 {
    m.norm_l2()
}

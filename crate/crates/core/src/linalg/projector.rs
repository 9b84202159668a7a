//! Oblique spectral projectors associated with a simple eigenpair and the
//! restricted Moore-Penrose inverses entering the prefactor formulas.
//!
//! With `u` the right eigenvector and `u~* = A^T u* / ||A^T u*||`,
//! `P = I - u (u~*)^T / <u, u~*>` projects onto `span{u~*}^perp` along
//! `span{u}`, and `P*` is its counterpart for the transposed operator.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat};

use super::{dot, LinalgError};

const PAIRING_TOL: f64 = 1e-12;
/// Relative singular-value floor below which the shifted restricted operator
/// is declared to collide with the spectrum.
const COLLISION_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ObliqueProjectorPair {
    pub p: Mat<f64>,
    pub p_star: Mat<f64>,
    pub u: Col<f64>,
    pub u_tilde_star: Col<f64>,
    /// `<u, u~*>`; nonzero for simple dominant eigenpairs.
    pub pairing: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PseudoInverseSide {
    Direct,
    Adjoint,
}

/// Builds the projector pair from unit vectors `u` and `u~*`.
pub fn make_projectors(
    u: &Col<f64>,
    u_tilde_star: &Col<f64>,
) -> Result<ObliqueProjectorPair, LinalgError> {
    let n = u.nrows();
    if u_tilde_star.nrows() != n {
        return Err(LinalgError::Dimension(
            "projector vectors must share a dimension".into(),
        ));
    }
    let pairing = dot(u, u_tilde_star);
    if pairing.abs() <= PAIRING_TOL {
        return Err(LinalgError::DegeneratePairing { pairing });
    }
    let mut p = Mat::<f64>::identity(n, n);
    let mut p_star = Mat::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] -= u[i] * u_tilde_star[j] / pairing;
            p_star[(i, j)] -= u_tilde_star[i] * u[j] / pairing;
        }
    }
    Ok(ObliqueProjectorPair {
        p,
        p_star,
        u: u.cloned(),
        u_tilde_star: u_tilde_star.cloned(),
        pairing,
    })
}

/// Orthonormal basis of `w^perp` as the trailing `n-1` columns of the
/// Householder reflection mapping `e_1` onto `w` (up to sign).
pub fn complement_basis(w: &Col<f64>) -> Mat<f64> {
    let n = w.nrows();
    let wn = w.norm_l2();
    let mut v = Col::from_fn(n, |i| w[i] / wn);
    let alpha = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += alpha;
    let vtv = dot(&v, &v);
    Mat::from_fn(n, n - 1, |i, jm| {
        let j = jm + 1;
        let e = if i == j { 1.0 } else { 0.0 };
        e - 2.0 * v[i] * v[j] / vtv
    })
}

/// Compression `(Q, Q^T M Q)` of `m` onto the orthogonal complement of `w`.
/// When the complement is invariant under `m`, the compressed matrix is the
/// matrix of the restricted operator in the basis `Q`.
pub fn restrict_to_complement(m: &Mat<f64>, w: &Col<f64>) -> (Mat<f64>, Mat<f64>) {
    let q = complement_basis(w);
    let mq = m * &q;
    let compressed = q.transpose() * &mq;
    (q, compressed)
}

/// Restricted Moore-Penrose inverse of `T = PMP - k_N I` (side `Direct`) or
/// `T = P* M^T P* - k_N I` (side `Adjoint`): inverts `T` on the orthogonal
/// complement of `u~*` (resp. `u`) and annihilates `span{u}` (resp.
/// `span{u~*}`).
pub fn restricted_pseudo_inverse(
    t: &Mat<f64>,
    proj: &ObliqueProjectorPair,
    side: PseudoInverseSide,
) -> Result<Mat<f64>, LinalgError> {
    let (complement_of, oblique) = match side {
        PseudoInverseSide::Direct => (&proj.u_tilde_star, &proj.p),
        PseudoInverseSide::Adjoint => (&proj.u, &proj.p_star),
    };
    let (q, t_c) = restrict_to_complement(t, complement_of);

    let svd = t_c
        .svd()
        .map_err(|e| LinalgError::SolverFailure(format!("SVD of restricted operator: {e:?}")))?;
    let s = svd.S();
    let smax = s[0];
    let smin = s[s.dim() - 1];
    if smax == 0.0 || smin < COLLISION_TOL * smax {
        return Err(LinalgError::SpectrumCollision {
            sigma_min: smin,
            scale: smax,
        });
    }

    // Q T_c^{-1} Q^T P (resp. P*): the oblique projector realizes the
    // direct-sum splitting, the orthonormal Q the inversion on the complement.
    let lu = t_c.partial_piv_lu();
    let qt_p = q.transpose() * oblique;
    let solved = lu.solve(&qt_p);
    Ok(&q * &solved)
}

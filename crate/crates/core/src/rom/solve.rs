//! Galerkin projection onto the reduced basis and the reduced direct/adjoint
//! eigensolves. The adjoint problem uses the transpose of the projected
//! matrices, which coincides with projecting the transposed operator.

use faer::{Col, Mat};

use super::basis::ReducedBasis;
use super::RomError;
use crate::hifi::{AffineCoefficients, AffineOperatorFamily, GramNorm, ParameterPoint};
use crate::linalg::{inverse_power, DensePencil, LinalgError, PowerIterationSettings};

/// Relative pairing floor below which `<c*, A_N c>` counts as degenerate.
const PAIRING_REL_TOL: f64 = 1e-14;

/// Projected affine components `V^T A_{k,p} V`, `V^T B_{k,q} V` and the
/// boundary term, extendable when the basis grows by appended columns.
pub struct ProjectedFamily {
    a_hat: Vec<Mat<f64>>,
    bc_hat: Option<Mat<f64>>,
    b_hat: Vec<Mat<f64>>,
    n: usize,
}

impl std::fmt::Debug for ProjectedFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectedFamily").field("dim", &self.n).finish()
    }
}

impl ProjectedFamily {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn a_hat(&self) -> &[Mat<f64>] {
        &self.a_hat
    }

    pub fn bc_hat(&self) -> Option<&Mat<f64>> {
        self.bc_hat.as_ref()
    }

    pub fn b_hat(&self) -> &[Mat<f64>] {
        &self.b_hat
    }

    /// Rebuilds a projected family from persisted blocks.
    pub fn from_parts(a_hat: Vec<Mat<f64>>, bc_hat: Option<Mat<f64>>, b_hat: Vec<Mat<f64>>) -> Self {
        let n = a_hat.first().map_or(0, faer::Mat::ncols);
        Self {
            a_hat,
            bc_hat,
            b_hat,
            n,
        }
    }

    pub fn project(family: &AffineOperatorFamily, basis: &ReducedBasis) -> Self {
        let v = &basis.v;
        let project_one = |m: &crate::linalg::SparseMatrix| {
            let y = m.matmul(v);
            v.transpose() * &y
        };
        Self {
            a_hat: family.a_components().iter().map(project_one).collect(),
            bc_hat: family.m_bc().map(project_one),
            b_hat: family.b_components().iter().map(project_one).collect(),
            n: basis.dim(),
        }
    }

    /// Extends every projected component after the basis grew from
    /// `old_n` columns to `basis.dim()` by appending new columns. Existing
    /// blocks remain the leading principal submatrices.
    pub fn extend(&mut self, family: &AffineOperatorFamily, basis: &ReducedBasis) {
        let new_n = basis.dim();
        let old_n = self.n;
        if new_n == old_n {
            return;
        }
        assert!(new_n > old_n, "basis must grow by appended columns");
        let v = &basis.v;
        let v_new = v.get(.., old_n..new_n);

        let extend_one = |hat: &Mat<f64>, m: &crate::linalg::SparseMatrix| -> Mat<f64> {
            let y_new = m.matmul(&v_new.cloned());
            let yt_new = m.matmul_transpose(&v_new.cloned());
            let top_right = v.get(.., 0..old_n).transpose() * &y_new;
            let bottom_left = yt_new.transpose().get(0..new_n - old_n, ..)
                * v.get(.., 0..old_n);
            let corner = v_new.transpose() * &y_new;
            let mut out = Mat::zeros(new_n, new_n);
            for i in 0..old_n {
                for j in 0..old_n {
                    out[(i, j)] = hat[(i, j)];
                }
            }
            for i in 0..old_n {
                for j in 0..new_n - old_n {
                    out[(i, old_n + j)] = top_right[(i, j)];
                }
            }
            for i in 0..new_n - old_n {
                for j in 0..old_n {
                    out[(old_n + i, j)] = bottom_left[(i, j)];
                }
                for j in 0..new_n - old_n {
                    out[(old_n + i, old_n + j)] = corner[(i, j)];
                }
            }
            out
        };

        for (hat, m) in self.a_hat.iter_mut().zip(family.a_components()) {
            *hat = extend_one(hat, m);
        }
        if let (Some(hat), Some(bc)) = (self.bc_hat.as_mut(), family.m_bc()) {
            *hat = extend_one(hat, bc);
        }
        for (hat, m) in self.b_hat.iter_mut().zip(family.b_components()) {
            *hat = extend_one(hat, m);
        }
        self.n = new_n;
    }

    /// Assembles the reduced pencil at the given coefficients, truncated to
    /// the leading `n` basis vectors.
    pub fn assemble(&self, coeffs: &AffineCoefficients, n: usize) -> (Mat<f64>, Mat<f64>) {
        assert!(n <= self.n);
        let mut a = Mat::<f64>::zeros(n, n);
        for (c, hat) in coeffs.f_hat.iter().zip(&self.a_hat) {
            accumulate(&mut a, *c, hat, n);
        }
        if let Some(bc) = &self.bc_hat {
            accumulate(&mut a, 1.0, bc, n);
        }
        let mut b = Mat::<f64>::zeros(n, n);
        for (c, hat) in coeffs.g_hat.iter().zip(&self.b_hat) {
            accumulate(&mut b, *c, hat, n);
        }
        (a, b)
    }
}

fn accumulate(dst: &mut Mat<f64>, coef: f64, src: &Mat<f64>, n: usize) {
    if coef == 0.0 {
        return;
    }
    for j in 0..n {
        for i in 0..n {
            dst[(i, j)] += coef * src[(i, j)];
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReducedSolution {
    /// Direct reduced coordinates, unit Euclidean norm.
    pub c: Col<f64>,
    /// Adjoint reduced coordinates, unit Euclidean norm.
    pub c_star: Col<f64>,
    pub lambda_n: f64,
    pub k_n: f64,
    pub iterations: (usize, usize),
    /// Lifted representatives, populated by [`ReducedSolution::lift`].
    pub u_n: Option<Col<f64>>,
    pub u_star_n: Option<Col<f64>>,
}

impl ReducedSolution {
    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    /// Lifts both coordinate vectors through the basis, renormalizes in the
    /// Gram norm and applies the sign convention (largest-magnitude entry of
    /// the lifted vector positive), keeping coordinates consistent.
    pub fn lift(&mut self, basis: &ReducedBasis, gram: &GramNorm) {
        let mut u = basis.lift(&self.c);
        let mut us = basis.lift(&self.c_star);
        normalize_pair(&mut u, &mut self.c, gram);
        normalize_pair(&mut us, &mut self.c_star, gram);
        self.u_n = Some(u);
        self.u_star_n = Some(us);
    }
}

fn normalize_pair(u: &mut Col<f64>, c: &mut Col<f64>, gram: &GramNorm) {
    let norm = gram.primal_norm(u);
    if norm > 0.0 {
        for i in 0..u.nrows() {
            u[i] /= norm;
        }
        for i in 0..c.nrows() {
            c[i] /= norm;
        }
    }
    let mut idx = 0usize;
    let mut best = -1.0;
    for i in 0..u.nrows() {
        if u[i].abs() > best {
            best = u[i].abs();
            idx = i;
        }
    }
    if u[idx] < 0.0 {
        for i in 0..u.nrows() {
            u[i] = -u[i];
        }
        for i in 0..c.nrows() {
            c[i] = -c[i];
        }
    }
}

/// Solves the reduced direct and adjoint eigenproblems from pre-projected
/// components. `k_N` is the Rayleigh-like quotient
/// `<c*, B_N c> / <c*, A_N c>` and `lambda_N = 1/k_N`.
pub fn solve_reduced_projected(
    proj: &ProjectedFamily,
    coeffs: &AffineCoefficients,
    n: usize,
    settings: &PowerIterationSettings,
) -> Result<ReducedSolution, RomError> {
    let (a_n, b_n) = proj.assemble(coeffs, n);
    solve_reduced_pencil(&a_n, &b_n, settings)
}

/// Solves a reduced pencil given directly (online entry point).
pub fn solve_reduced_pencil(
    a_n: &Mat<f64>,
    b_n: &Mat<f64>,
    settings: &PowerIterationSettings,
) -> Result<ReducedSolution, RomError> {
    let map_err = |e: LinalgError| match e {
        LinalgError::NotConverged { .. } | LinalgError::FactorizationFailed(_) => {
            RomError::ReducedNotConverged
        }
        other => RomError::Linalg(other),
    };
    let direct_pencil = DensePencil::new(a_n, b_n, false).map_err(map_err)?;
    let direct = inverse_power(&direct_pencil, settings).map_err(map_err)?;
    let adjoint_pencil = DensePencil::new(a_n, b_n, true).map_err(map_err)?;
    let adjoint = inverse_power(&adjoint_pencil, settings).map_err(map_err)?;

    let c = direct.u;
    let c_star = adjoint.u;
    let a_c = a_n * &c;
    let pairing: f64 = c_star.transpose() * &a_c;
    let scale = a_n.norm_l2().max(1e-300);
    if pairing.abs() <= PAIRING_REL_TOL * scale {
        return Err(RomError::DegeneratePairing { pairing });
    }
    let b_c = b_n * &c;
    let num: f64 = c_star.transpose() * &b_c;
    let k_n = num / pairing;
    Ok(ReducedSolution {
        c,
        c_star,
        lambda_n: 1.0 / k_n,
        k_n,
        iterations: (direct.iterations, adjoint.iterations),
        u_n: None,
        u_star_n: None,
    })
}

/// Convenience entry point: project the affine family onto the basis and
/// solve at one parameter.
pub fn solve_reduced(
    family: &AffineOperatorFamily,
    mu: &ParameterPoint,
    basis: &ReducedBasis,
    settings: &PowerIterationSettings,
    gram: &GramNorm,
) -> Result<ReducedSolution, RomError> {
    let proj = ProjectedFamily::project(family, basis);
    let coeffs = family.coefficients(mu)?;
    let mut sol = solve_reduced_projected(&proj, &coeffs, basis.dim(), settings)?;
    sol.lift(basis, gram);
    Ok(sol)
}

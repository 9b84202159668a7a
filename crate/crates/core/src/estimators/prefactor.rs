//! Prefactor computations. The exact constants need the exact eigentriple
//! and dense resolvent-like compositions, so they are offline diagnostics;
//! the online path never touches them.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat};

use super::EstimatorError;
use crate::linalg::{
    dense_eig_oracle, make_projectors, numerical_range_interval, restrict_to_complement,
    restricted_pseudo_inverse, spectral_norm, ObliqueProjectorPair, PseudoInverseSide,
};

#[derive(Clone, Debug)]
pub struct PrefactorReport {
    pub k_n: f64,
    pub k_exact: f64,
    pub k2: Option<f64>,
    /// `|| [P*(P*M^T P*-k_N)^+P*]^T (M-kI) P(PMP-k_N)^+P A^{-1} ||`.
    pub c_k_exact: f64,
    /// `|| P (PMP-k_N)^+ P A^{-1} ||`.
    pub c_u_exact: f64,
    /// `|| A^{-T} P* (P*M^T P*-k_N)^+ P* ||`.
    pub c_ustar_exact: f64,
    /// Closed form `k2 (k-k2) / (k_N-k2)^2`, when the gap assumption holds.
    pub c_k_symmetric: Option<f64>,
    pub gap_assumption_holds: bool,
    pub c_k_numrange_bound: Option<f64>,
    pub eta_k: Option<f64>,
}

/// Exact eigendata of one dense pencil, reusable across several `k_N`.
pub struct PrefactorContext {
    a_lu: faer::linalg::solvers::PartialPivLu<f64>,
    /// `M = A^{-1} B`.
    m: Mat<f64>,
    pub proj: ObliqueProjectorPair,
    pub k: f64,
    pub k2: Option<f64>,
}

impl PrefactorContext {
    pub fn new(a: &Mat<f64>, b: &Mat<f64>) -> Result<Self, EstimatorError> {
        let spec = dense_eig_oracle(a, b)?;
        let (lambda, u, u_star) = spec.smallest_real()?;
        let k = 1.0 / lambda;
        let ks = spec.k_values_real_desc();
        // second-largest real k strictly below the dominant one
        let k2 = ks.iter().copied().find(|&x| x < k * (1.0 - 1e-12));

        let a_lu = a.partial_piv_lu();
        let m = a_lu.solve(b);

        let atu = a.transpose() * u_star;
        let norm = atu.norm_l2();
        let u_tilde_star = (1.0 / norm) * &atu;
        let proj = make_projectors(u, &u_tilde_star)?;

        Ok(Self {
            a_lu,
            m,
            proj,
            k,
            k2,
        })
    }

    pub fn u(&self) -> &Col<f64> {
        &self.proj.u
    }

    pub fn u_tilde_star(&self) -> &Col<f64> {
        &self.proj.u_tilde_star
    }

    pub fn m(&self) -> &Mat<f64> {
        &self.m
    }

    /// `X A^{-1}` via a transposed solve, avoiding the explicit inverse.
    fn mul_right_a_inv(&self, x: &Mat<f64>) -> Mat<f64> {
        let xt = x.transpose().cloned();
        let solved = self.a_lu.solve_transpose(&xt);
        solved.transpose().cloned()
    }

    fn mul_left_a_inv_t(&self, x: &Mat<f64>) -> Mat<f64> {
        self.a_lu.solve_transpose(x)
    }

    fn shifted_direct(&self, k_n: f64) -> Mat<f64> {
        let n = self.m.nrows();
        let pmp = &(&self.proj.p * &self.m) * &self.proj.p;
        &pmp - &(k_n * Mat::<f64>::identity(n, n))
    }

    fn shifted_adjoint(&self, k_n: f64) -> Mat<f64> {
        let n = self.m.nrows();
        let pmtp = &(&self.proj.p_star * &self.m.transpose().cloned()) * &self.proj.p_star;
        &pmtp - &(k_n * Mat::<f64>::identity(n, n))
    }

    /// The three exact prefactors `(C_u, C_u*, C_k)` at the given `k_N`.
    pub fn exact(&self, k_n: f64) -> Result<(f64, f64, f64), EstimatorError> {
        let n = self.m.nrows();
        let t_dir = self.shifted_direct(k_n);
        let plus_dir = restricted_pseudo_inverse(&t_dir, &self.proj, PseudoInverseSide::Direct)?;
        let t_adj = self.shifted_adjoint(k_n);
        let plus_adj = restricted_pseudo_inverse(&t_adj, &self.proj, PseudoInverseSide::Adjoint)?;

        let p_plus_p = &(&self.proj.p * &plus_dir) * &self.proj.p;
        let dir_chain = self.mul_right_a_inv(&p_plus_p);
        let c_u = spectral_norm(&dir_chain);

        let ps_plus_ps = &(&self.proj.p_star * &plus_adj) * &self.proj.p_star;
        let adj_chain = self.mul_left_a_inv_t(&ps_plus_ps);
        let c_ustar = spectral_norm(&adj_chain);

        let m_minus_k = &self.m - &(self.k * Mat::<f64>::identity(n, n));
        let full = &ps_plus_ps.transpose().cloned() * &(&m_minus_k * &dir_chain);
        let c_k = spectral_norm(&full);
        Ok((c_u, c_ustar, c_k))
    }

    /// Resolvent-style upper bound on `C_N^k` through the distances from
    /// `k_N` to the numerical ranges of the restricted operators.
    pub fn numrange_bound(&self, k_n: f64) -> Result<f64, EstimatorError> {
        let n = self.m.nrows();
        let pmp = &(&self.proj.p * &self.m) * &self.proj.p;
        let (_, restr_dir) = restrict_to_complement(&pmp, &self.proj.u_tilde_star);
        let range_dir = numerical_range_interval(&restr_dir);
        let dist_dir = range_dir.dist(k_n);
        if dist_dir == 0.0 {
            return Err(EstimatorError::ZeroDistance {
                k_n,
                low: range_dir.low,
                high: range_dir.high,
            });
        }
        let pmtp = &(&self.proj.p_star * &self.m.transpose().cloned()) * &self.proj.p_star;
        let (_, restr_adj) = restrict_to_complement(&pmtp, &self.proj.u);
        let range_adj = numerical_range_interval(&restr_adj);
        let dist_adj = range_adj.dist(k_n);
        if dist_adj == 0.0 {
            return Err(EstimatorError::ZeroDistance {
                k_n,
                low: range_adj.low,
                high: range_adj.high,
            });
        }

        let m_minus_k = &self.m - &(self.k * Mat::<f64>::identity(n, n));
        let pa_inv = self.mul_right_a_inv(&self.proj.p);
        Ok(spectral_norm(&m_minus_k) * spectral_norm(&pa_inv) / (dist_dir * dist_adj))
    }

    pub fn report(&self, k_n: f64) -> Result<PrefactorReport, EstimatorError> {
        let (c_u, c_ustar, c_k) = self.exact(k_n)?;
        let (gap, c_sym) = match self.k2 {
            Some(k2) => match symmetric_prefactor(self.k, k2, k_n) {
                Ok(v) => (true, Some(v)),
                Err(_) => (false, None),
            },
            None => (false, None),
        };
        let bound = self.numrange_bound(k_n).ok();
        Ok(PrefactorReport {
            k_n,
            k_exact: self.k,
            k2: self.k2,
            c_k_exact: c_k,
            c_u_exact: c_u,
            c_ustar_exact: c_ustar,
            c_k_symmetric: c_sym,
            gap_assumption_holds: gap,
            c_k_numrange_bound: bound,
            eta_k: None,
        })
    }
}

/// Exact prefactors of the pencil `(A, B)` at `k_N` (dense diagnostics).
pub fn exact_prefactors(
    a: &Mat<f64>,
    b: &Mat<f64>,
    k_n: f64,
) -> Result<PrefactorReport, EstimatorError> {
    PrefactorContext::new(a, b)?.report(k_n)
}

/// Closed form `k2 (k - k2) / (k_N - k2)^2` under `k >= k_N > k2 > 0`.
pub fn symmetric_prefactor(k: f64, k2: f64, k_n: f64) -> Result<f64, EstimatorError> {
    if !(k >= k_n && k_n > k2 && k2 > 0.0) {
        return Err(EstimatorError::GapViolated { k, k2, k_n });
    }
    Ok(k2 * (k - k2) / ((k_n - k2) * (k_n - k2)))
}

/// Numerical-range upper bound on `C_N^k` for the pencil `(A, B)`.
pub fn numrange_prefactor_bound(
    a: &Mat<f64>,
    b: &Mat<f64>,
    k_n: f64,
) -> Result<f64, EstimatorError> {
    PrefactorContext::new(a, b)?.numrange_bound(k_n)
}

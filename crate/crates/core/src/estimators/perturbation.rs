//! Perturbative diagnostics: behaviour of the exact prefactor for
//! `A = S + eps T` (S symmetric positive definite, T skew) against the
//! symmetric closed form, including first-order eigenpair expansions.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat};

use super::prefactor::{symmetric_prefactor, PrefactorContext};
use super::EstimatorError;
use crate::linalg::{complement_basis, spectral_norm};

#[derive(Clone, Debug)]
pub struct PerturbationRow {
    pub epsilon: f64,
    pub c_k_eps: f64,
    /// `|C^k(eps) - C^k_sym|`.
    pub diff: f64,
    pub lambda_eps: f64,
    /// `|lambda^eps - lambda_S| / eps^2`; bounded when the expansion holds.
    pub lambda_drift_ratio: f64,
    /// `||u^eps - (u_S - eps w)|| / eps^2` with `w` the first-order
    /// correction; bounded when the expansion holds.
    pub eigvec_first_order_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct PerturbationStudy {
    pub rows: Vec<PerturbationRow>,
    pub c_k_sym: f64,
    pub k_s: f64,
    pub k_s2: f64,
    pub k_n: f64,
}

impl PerturbationStudy {
    /// Least-squares log-log slope of `diff` vs `epsilon`, skipping values
    /// within the numerical floor `1e3 * eps_machine * C_sym`.
    pub fn slope(&self) -> Option<f64> {
        let floor = 1e3 * f64::EPSILON * self.c_k_sym;
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.diff > floor)
            .map(|r| (r.epsilon, r.diff))
            .collect();
        fit_log_log_slope(&pts)
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` below two points.
pub fn fit_log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Runs the sweep `A^eps = S + eps T`, `B = I`, evaluating the exact
/// prefactor at the fixed `k_N` alongside first-order expansion checks.
pub fn perturbation_study(
    s: &Mat<f64>,
    t: &Mat<f64>,
    epsilons: &[f64],
    k_n: f64,
) -> Result<PerturbationStudy, EstimatorError> {
    let n = s.nrows();
    let sym_check = Mat::from_fn(n, n, |i, j| s[(i, j)] - s[(j, i)]);
    let skew_check = Mat::from_fn(n, n, |i, j| t[(i, j)] + t[(j, i)]);
    if spectral_norm(&sym_check) > 1e-12 * spectral_norm(s)
        || spectral_norm(&skew_check) > 1e-12 * spectral_norm(t).max(1.0)
    {
        return Err(EstimatorError::Linalg(crate::linalg::LinalgError::Dimension(
            "perturbation study requires symmetric S and skew T".into(),
        )));
    }

    // Exact data of the unperturbed operator.
    let eig = s
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| EstimatorError::Linalg(crate::linalg::LinalgError::SolverFailure(format!("{e:?}"))))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.S()[a].partial_cmp(&eig.S()[b]).unwrap());
    let lambda_s = eig.S()[order[0]];
    let lambda_s2 = eig.S()[order[1]];
    let u_s = Col::from_fn(n, |i| eig.U()[(i, order[0])]);
    let k_s = 1.0 / lambda_s;
    let k_s2 = 1.0 / lambda_s2;
    let c_k_sym = symmetric_prefactor(k_s, k_s2, k_n)?;

    // First-order eigenvector correction w = (S - lambda_S)^{-1}|_perp T u_S.
    let q = complement_basis(&u_s);
    let shifted = s - &(lambda_s * Mat::<f64>::identity(n, n));
    let restricted = q.transpose() * &(&shifted * &q);
    let rhs = q.transpose() * &(t * &u_s);
    let w = &q * &restricted.partial_piv_lu().solve(&rhs);

    let b = Mat::<f64>::identity(n, n);
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let a_eps = s + &(eps * t);
        let ctx = PrefactorContext::new(&a_eps, &b)?;
        let (_, _, c_k_eps) = ctx.exact(k_n)?;

        // Align u^eps with <u^eps, u_S> > 0 for the expansion comparison.
        let mut u_eps = ctx.u().cloned();
        let overlap: f64 = u_eps.transpose() * &u_s;
        if overlap < 0.0 {
            u_eps = -&u_eps;
        }
        let lambda_eps = 1.0 / ctx.k;
        let first_order = &u_s - &(eps * &w);
        let vec_res = (&u_eps - &first_order).norm_l2();

        rows.push(PerturbationRow {
            epsilon: eps,
            c_k_eps,
            diff: (c_k_eps - c_k_sym).abs(),
            lambda_eps,
            lambda_drift_ratio: (lambda_eps - lambda_s).abs() / (eps * eps),
            eigvec_first_order_ratio: vec_res / (eps * eps),
        });
    }

    Ok(PerturbationStudy {
        rows,
        c_k_sym,
        k_s,
        k_s2,
        k_n,
    })
}

/// The 4x4 reference case: `S = diag(2000, 1500, 1000, 0.02)`, `T` the unit
/// skew pattern rescaled to `||S|| / ||T_0||`, evaluated at `k_N = k_S = 50`.
pub fn four_by_four_study_case() -> (Mat<f64>, Mat<f64>, f64) {
    let s = Mat::from_fn(4, 4, |i, j| {
        if i == j {
            [2000.0, 1500.0, 1000.0, 0.02][i]
        } else {
            0.0
        }
    });
    let t0 = Mat::from_fn(4, 4, |i, j| {
        if i < j {
            1.0
        } else if i > j {
            -1.0
        } else {
            0.0
        }
    });
    let scale = spectral_norm(&s) / spectral_norm(&t0);
    (s, scale * &t0, 50.0)
}

/// Log-spaced grid, inclusive of both endpoints.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_skew_zero_difference() {
        let (s, _, k_n) = four_by_four_study_case();
        let t = Mat::<f64>::zeros(4, 4);
        let study = perturbation_study(&s, &t, &[1e-4, 1e-3], k_n).unwrap();
        for row in &study.rows {
            assert!(row.diff < 1e-12 * study.c_k_sym.max(1.0));
        }
    }

    #[test]
    fn slope_fit_recovers_power() {
        let pts: Vec<(f64, f64)> = (1..=10)
            .map(|i| {
                let x = 10f64.powi(-i);
                (x, 3.0 * x * x)
            })
            .collect();
        let slope = fit_log_log_slope(&pts).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_skew_t_rejected() {
        let (s, _, k_n) = four_by_four_study_case();
        let t = Mat::<f64>::identity(4, 4);
        assert!(perturbation_study(&s, &t, &[1e-3], k_n).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_spaced(1e-6, 1e-2, 12);
        assert_eq!(g.len(), 12);
        assert!((g[0] - 1e-6).abs() < 1e-18);
        assert!((g[11] - 1e-2).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}

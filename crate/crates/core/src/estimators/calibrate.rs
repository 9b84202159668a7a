//! Heuristic prefactor calibration: efficiency ratios over an estimation set
//! disjoint from the training set, and their maxima as practical constants.

use super::{eta_k_from_pairing, EstimatorError};
use crate::hifi::{AffineOperatorFamily, GramNorm, HfSolver, ParameterPoint};
use crate::linalg::PowerIterationSettings;
use crate::residual::{ResidualFactorization, ResidualSide};
use crate::rom::{solve_reduced_projected, ProjectedFamily, ReducedBasis};

/// Residual norms below this cutoff make the efficiency ratio meaningless;
/// the parameter is skipped with a warning.
const ZERO_RESIDUAL_CUTOFF: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct EfficiencyRow {
    pub index: usize,
    pub k_hf: f64,
    pub k_rb: f64,
    pub e_k: f64,
    pub eta_k: f64,
    /// `E_k = |k_N - k| / eta_k`.
    pub eff_k: f64,
    pub e_u: f64,
    pub norm_r: f64,
    pub eff_u: f64,
    pub e_ustar: f64,
    pub norm_r_star: f64,
    pub eff_ustar: f64,
}

#[derive(Clone, Debug)]
pub struct CalibrationSet {
    pub rows: Vec<EfficiencyRow>,
    /// Skipped parameters with the reason (index into the estimation set).
    pub skipped: Vec<(usize, String)>,
    pub c_bar_k: f64,
    pub c_bar_u: f64,
    pub c_bar_ustar: f64,
    /// All rows skipped or maxima zero: the reduced model reproduces the
    /// estimation set exactly and the calibrated estimators degenerate.
    pub degenerate: bool,
}

impl CalibrationSet {
    pub fn delta_k(&self, eta: f64) -> f64 {
        self.c_bar_k * eta
    }

    pub fn delta_u(&self, norm_r: f64) -> f64 {
        self.c_bar_u * norm_r
    }

    pub fn delta_ustar(&self, norm_r_star: f64) -> f64 {
        self.c_bar_ustar * norm_r_star
    }
}

/// Computes efficiency ratios on `p_pref` for the given reduced model and
/// takes componentwise maxima as the practical prefactors.
#[allow(clippy::too_many_arguments)]
pub fn calibrate(
    family: &AffineOperatorFamily,
    hf: &HfSolver,
    basis: &ReducedBasis,
    proj: &ProjectedFamily,
    fact: &ResidualFactorization,
    settings: &PowerIterationSettings,
    gram: &GramNorm,
    p_pref: &[ParameterPoint],
) -> Result<CalibrationSet, EstimatorError> {
    let mut rows = Vec::with_capacity(p_pref.len());
    let mut skipped = Vec::new();
    let n = basis.dim();

    for (index, mu) in p_pref.iter().enumerate() {
        let hf_sol = hf.solve(mu)?;
        let coeffs = family.coefficients(mu)?;
        let mut rb = match solve_reduced_projected(proj, &coeffs, n, settings) {
            Ok(s) => s,
            Err(e) => {
                skipped.push((index, format!("reduced solve failed: {e}")));
                continue;
            }
        };
        rb.lift(basis, gram);

        let norm_r = fact.online_norm(&coeffs, &rb.c, rb.k_n, ResidualSide::Direct)?;
        let norm_r_star = fact.online_norm(&coeffs, &rb.c_star, rb.k_n, ResidualSide::Adjoint)?;
        if norm_r < ZERO_RESIDUAL_CUTOFF || norm_r_star < ZERO_RESIDUAL_CUTOFF {
            skipped.push((index, "residual below cutoff; efficiency undefined".into()));
            continue;
        }

        // The reduced pairing equals <u*_N, A u_N>.
        let a_n = proj.assemble(&coeffs, n).0;
        let a_c = &a_n * &rb.c;
        let pairing: f64 = rb.c_star.transpose() * &a_c;
        let res = crate::estimators::ResidualPair {
            r: faer::Col::zeros(0),
            r_star: faer::Col::zeros(0),
            norm_r,
            norm_r_star,
        };
        let eta = eta_k_from_pairing(&res, pairing)?;

        let u_n = rb.u_n.as_ref().unwrap();
        let u_star_n = rb.u_star_n.as_ref().unwrap();
        let e_k = (rb.k_n - hf_sol.k).abs();
        let e_u = (u_n - &hf_sol.u).norm_l2();
        let e_ustar = (u_star_n - &hf_sol.u_star).norm_l2();

        rows.push(EfficiencyRow {
            index,
            k_hf: hf_sol.k,
            k_rb: rb.k_n,
            e_k,
            eta_k: eta,
            eff_k: e_k / eta,
            e_u,
            norm_r,
            eff_u: e_u / norm_r,
            e_ustar,
            norm_r_star,
            eff_ustar: e_ustar / norm_r_star,
        });
    }

    let max_of = |f: fn(&EfficiencyRow) -> f64| rows.iter().map(f).fold(0.0f64, f64::max);
    let c_bar_k = max_of(|r| r.eff_k);
    let c_bar_u = max_of(|r| r.eff_u);
    let c_bar_ustar = max_of(|r| r.eff_ustar);
    let degenerate = rows.is_empty() || c_bar_k == 0.0;

    Ok(CalibrationSet {
        rows,
        skipped,
        c_bar_k,
        c_bar_u,
        c_bar_ustar,
        degenerate,
    })
}

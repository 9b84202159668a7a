//! High-fidelity model generator: structured 2D mesh, Q1 finite-element
//! assembly of the two-group diffusion forms, affine component matrices,
//! Dirichlet and Robin (void) boundary conditions, and parameter samplers for
//! both test cases.

mod assembly;
mod mesh;
mod sampling;

pub use assembly::{
    assemble_affine_family, assemble_parametric, flatten_coefficients, AffineCoefficients,
    AffineOperatorFamily, FissionMode, GramChoice, GramNorm,
};
pub use mesh::{build_mesh, BoundaryKind, Mesh2D, SubdomainGrid};
pub use sampling::{
    coefficients_from_macros, sample_synthetic_minicore, sample_synthetic_minicore_disjoint,
    sample_toycore, sample_toycore_disjoint, synthetic_minicore_layout, AssemblyMaterial,
    MacroParameters,
};

use std::sync::atomic::{AtomicU64, Ordering};

use faer::Col;
use thiserror::Error;

use crate::linalg::{
    inverse_power, sign_normalize, LinalgError, PowerIterationSettings, SparsePencil,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("subdomain partition does not align with cell edges: {0}")]
    MisalignedPartition(String),
    #[error("parameter violates the coercivity conditions: {0}")]
    CoercivityViolation(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One parameter value: the per-subdomain groups of PDE coefficients,
/// `f = (D1, Sigma11, Sigma12, D2, Sigma21, Sigma22)` and
/// `g = (chi1 nuSigf1, chi1 nuSigf2, chi2 nuSigf1, chi2 nuSigf2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterPoint {
    pub subdomains: Vec<SubdomainCoefficients>,
    /// Macro-parameter provenance when sampled through the synthetic
    /// minicore table; `None` for raw coefficient parameters.
    pub macros: Option<Vec<MacroParameters>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubdomainCoefficients {
    pub f: [f64; 6],
    pub g: [f64; 4],
}

impl ParameterPoint {
    pub fn n_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    /// Checks the coercivity conditions: positive diffusion and removal,
    /// couplings strictly dominated by the removals, non-negative fission
    /// with at least one product nonzero somewhere in the domain.
    pub fn validate(&self) -> Result<(), ModelError> {
        const ALPHA: f64 = 1e-6;
        let mut any_fission = false;
        for (k, sd) in self.subdomains.iter().enumerate() {
            let [d1, s11, s12, d2, s21, s22] = sd.f;
            if d1 < ALPHA || d2 < ALPHA {
                return Err(ModelError::CoercivityViolation(format!(
                    "subdomain {k}: diffusion coefficients must be >= {ALPHA}"
                )));
            }
            if s11 < ALPHA || s22 < ALPHA {
                return Err(ModelError::CoercivityViolation(format!(
                    "subdomain {k}: removal cross sections must be >= {ALPHA}"
                )));
            }
            if s12.abs() >= s11 || s21.abs() >= s22 {
                return Err(ModelError::CoercivityViolation(format!(
                    "subdomain {k}: |coupling| must stay below the removals"
                )));
            }
            if sd.g.iter().any(|&x| x < 0.0) {
                return Err(ModelError::CoercivityViolation(format!(
                    "subdomain {k}: fission products must be non-negative"
                )));
            }
            any_fission |= sd.g.iter().any(|&x| x > 0.0);
        }
        if !any_fission {
            return Err(ModelError::CoercivityViolation(
                "no nonzero fission product in any subdomain".into(),
            ));
        }
        Ok(())
    }
}

/// Direct and adjoint eigenpair of one high-fidelity solve.
#[derive(Clone, Debug)]
pub struct EigenSolution {
    pub u: Col<f64>,
    pub u_star: Col<f64>,
    pub lambda: f64,
    pub k: f64,
}

/// High-fidelity solver over one affine family; counts its factorizations so
/// the greedy loop can assert how often it was called.
pub struct HfSolver<'a> {
    pub family: &'a AffineOperatorFamily,
    pub settings: PowerIterationSettings,
    solves: AtomicU64,
}

impl<'a> HfSolver<'a> {
    pub fn new(family: &'a AffineOperatorFamily, settings: PowerIterationSettings) -> Self {
        Self {
            family,
            settings,
            solves: AtomicU64::new(0),
        }
    }

    pub fn solve_count(&self) -> u64 {
        self.solves.load(Ordering::Relaxed)
    }

    /// Assembles the pencil at `mu` and runs the direct and adjoint inverse
    /// power iterations off a single LU of `A_mu`.
    pub fn solve(&self, mu: &ParameterPoint) -> Result<EigenSolution, ModelError> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        let (a, b) = assemble_parametric(self.family, mu)?;
        let lu = a.lu()?;
        let direct = inverse_power(&SparsePencil::new(&lu, &b, false), &self.settings)?;
        let adjoint = inverse_power(&SparsePencil::new(&lu, &b, true), &self.settings)?;
        let mut u = direct.u;
        let mut u_star = adjoint.u;
        sign_normalize(&mut u);
        sign_normalize(&mut u_star);
        Ok(EigenSolution {
            u,
            u_star,
            lambda: direct.lambda,
            k: direct.k,
        })
    }
}

//! Inverse power iteration on a generalized pencil `A u = lambda B u`,
//! converging to the eigenvalue of smallest modulus (equivalently the
//! dominant eigenvalue `k = 1/lambda` of `A^{-1} B`).

use faer::linalg::solvers::Solve;
use faer::{Col, Mat};
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sparse::{SparseLu, SparseMatrix};
use super::{dot, sign_normalize, LinalgError};

#[derive(Clone, Copy, Debug)]
pub struct PowerIterationSettings {
    /// Relative tolerance on the eigenvector update.
    pub tau_u: f64,
    /// Relative tolerance on the eigenvalue update.
    pub tau_lambda: f64,
    pub max_iterations: usize,
    /// Seed of the deterministic uniform-positive start vector.
    pub seed: u64,
}

impl Default for PowerIterationSettings {
    fn default() -> Self {
        Self {
            tau_u: 1e-6,
            tau_lambda: 1e-7,
            max_iterations: 10_000,
            seed: 0x5eed,
        }
    }
}

impl PowerIterationSettings {
    pub fn validate(&self) -> Result<(), LinalgError> {
        let bad_tol = |t: f64| !t.is_finite() || t <= 0.0;
        if bad_tol(self.tau_u) || bad_tol(self.tau_lambda) || self.max_iterations < 1 {
            return Err(LinalgError::Dimension(
                "power iteration settings require positive tolerances and max_iterations >= 1"
                    .into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PowerSolution {
    /// Unit eigenvector, sign-normalized (largest-magnitude entry positive).
    pub u: Col<f64>,
    /// Eigenvalue of smallest modulus, `lambda = 1/k`.
    pub lambda: f64,
    /// Effective multiplication factor `k = <v, u>` at convergence.
    pub k: f64,
    pub iterations: usize,
}

/// One factorized pencil, solvable on the direct or the transposed side so a
/// single LU serves both the direct and the adjoint eigenproblem.
pub trait PencilOps {
    fn dim(&self) -> usize;
    fn solve_a(&self, rhs: &Col<f64>) -> Col<f64>;
    fn apply_b(&self, x: &Col<f64>) -> Col<f64>;
}

/// Sparse pencil backed by a shared LU of `A`.
pub struct SparsePencil<'a> {
    lu: &'a SparseLu,
    b: &'a SparseMatrix,
    adjoint: bool,
}

impl<'a> SparsePencil<'a> {
    pub fn new(lu: &'a SparseLu, b: &'a SparseMatrix, adjoint: bool) -> Self {
        Self { lu, b, adjoint }
    }
}

impl PencilOps for SparsePencil<'_> {
    fn dim(&self) -> usize {
        self.b.nrows()
    }

    fn solve_a(&self, rhs: &Col<f64>) -> Col<f64> {
        if self.adjoint {
            self.lu.solve_transpose(rhs)
        } else {
            self.lu.solve(rhs)
        }
    }

    fn apply_b(&self, x: &Col<f64>) -> Col<f64> {
        if self.adjoint {
            self.b.matvec_transpose(x)
        } else {
            self.b.matvec(x)
        }
    }
}

/// Dense pencil with an owned LU, used by the reduced-order solves.
pub struct DensePencil {
    lu: faer::linalg::solvers::PartialPivLu<f64>,
    b: Mat<f64>,
    adjoint: bool,
    dim: usize,
}

impl DensePencil {
    pub fn new(a: &Mat<f64>, b: &Mat<f64>, adjoint: bool) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
            return Err(LinalgError::Dimension(
                "pencil matrices must be square with equal dimensions".into(),
            ));
        }
        let lu = a.partial_piv_lu();
        // faer's partial-pivot LU does not report singularity; probe it.
        let probe = lu.solve(Col::<f64>::from_fn(a.nrows(), |_| 1.0));
        if probe.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::FactorizationFailed(
                "dense LU produced non-finite solve".into(),
            ));
        }
        Ok(Self {
            lu,
            b: b.cloned(),
            adjoint,
            dim: a.nrows(),
        })
    }
}

impl PencilOps for DensePencil {
    fn dim(&self) -> usize {
        self.dim
    }

    fn solve_a(&self, rhs: &Col<f64>) -> Col<f64> {
        if self.adjoint {
            self.lu.solve_transpose(rhs)
        } else {
            self.lu.solve(rhs)
        }
    }

    fn apply_b(&self, x: &Col<f64>) -> Col<f64> {
        if self.adjoint {
            self.b.transpose() * x
        } else {
            &self.b * x
        }
    }
}

/// Deterministic uniform-positive unit start vector.
pub(crate) fn start_vector(n: usize, seed: u64) -> Col<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Col::from_fn(n, |_| rng.random::<f64>() + 0.05);
    let norm = v.norm_l2();
    for i in 0..n {
        v[i] /= norm;
    }
    v
}

/// Inverse power iteration. Each step solves `A v = B u`, renormalizes, and
/// updates `k = <v, u>`; the loop exits once both the eigenvector and the
/// eigenvalue updates fall below their relative tolerances.
pub fn inverse_power(
    pencil: &impl PencilOps,
    settings: &PowerIterationSettings,
) -> Result<PowerSolution, LinalgError> {
    settings.validate()?;
    let n = pencil.dim();
    let mut u = start_vector(n, settings.seed);
    let mut k = 1.0f64;

    for iter in 1..=settings.max_iterations {
        let v = pencil.solve_a(&pencil.apply_b(&u));
        let vnorm = v.norm_l2();
        if !vnorm.is_finite() || vnorm == 0.0 {
            return Err(LinalgError::SolverFailure(
                "inverse power produced a non-finite or zero iterate".into(),
            ));
        }
        let mut u_next = v.clone();
        for i in 0..n {
            u_next[i] /= vnorm;
        }
        let k_next = dot(&v, &u);

        let du = (&u_next - &u).norm_l2() / u.norm_l2();
        let dk = (k_next - k).abs() / k.abs();
        u = u_next;
        k = k_next;
        if du <= settings.tau_u && dk <= settings.tau_lambda {
            if k == 0.0 || !k.is_finite() {
                return Err(LinalgError::SolverFailure(format!(
                    "converged to invalid multiplication factor k = {k}"
                )));
            }
            sign_normalize(&mut u);
            return Ok(PowerSolution {
                u,
                lambda: 1.0 / k,
                k,
                iterations: iter,
            });
        }
    }
    Err(LinalgError::NotConverged {
        iterations: settings.max_iterations,
    })
}

//! Reduced-basis data structures and solves: orthonormalization, POD
//! compression, Galerkin projection and the reduced direct/adjoint
//! eigensolves producing `k_N`.

mod basis;
mod solve;

pub use basis::{orthonormalize, pod_compress, ReducedBasis, SnapshotSide, SnapshotTag};
pub use solve::{solve_reduced, solve_reduced_pencil, solve_reduced_projected, ProjectedFamily, ReducedSolution};

use thiserror::Error;

use crate::hifi::ModelError;
use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum RomError {
    #[error("all snapshots were dropped during orthonormalization")]
    EmptyBasis,
    #[error("snapshot matrix is rank deficient: rank {rank} < requested dimension {requested}")]
    RankDeficient { rank: usize, requested: usize },
    #[error("reduced power iteration did not converge; parameter is a snapshot candidate")]
    ReducedNotConverged,
    #[error("degenerate reduced pairing <c*, A_N c> = {pairing:e}")]
    DegeneratePairing { pairing: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

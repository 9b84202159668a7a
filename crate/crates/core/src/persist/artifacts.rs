//! Artifact directory layout:
//!
//! ```text
//! artifacts/
//!   manifest.toml            metadata, block counts, file map, schema notes
//!   basis.mtx                orthonormal basis (dense array, N columns)
//!   provenance.toml          snapshot tags per basis column
//!   projected_a.mtx          stacked N x N blocks, one per A component
//!   projected_bc.mtx         boundary block (Robin only)
//!   projected_b.mtx          stacked B-component blocks
//!   residual_{dir,adj}_{d,e,f}.mtx   stacked residual Gram blocks
//! ```
//!
//! Block stacking orders match the in-memory layouts: `d`/`f` hold the upper
//! triangle `(a <= b)` row-packed, `e` the full rectangle row-major.

use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::matrix_market::{
    read_dense, read_sparse, read_stacked_blocks, write_dense, write_sparse, write_stacked_blocks,
};
use super::PersistError;
use crate::config::RunConfig;
use crate::hifi::{AffineOperatorFamily, FissionMode, GramChoice};
use crate::residual::{ResidualFactorization, ResidualSide};
use crate::rom::{ProjectedFamily, ReducedBasis, SnapshotTag};

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationConstants {
    pub c_bar_k: f64,
    pub c_bar_u: f64,
    pub c_bar_ustar: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockCounts {
    pub n_a: usize,
    pub n_b: usize,
    pub d_pairs: usize,
    pub e_blocks: usize,
    pub f_pairs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactManifest {
    pub format_version: u32,
    pub k_subdomains: usize,
    pub fission: FissionMode,
    pub gram: GramChoice,
    pub basis_dim: usize,
    pub full_dim: usize,
    pub has_bc: bool,
    pub counts: BlockCounts,
    pub calibration: Option<CalibrationConstants>,
    /// Configuration that produced the artifacts, for verification reruns.
    pub config: RunConfig,
    /// Human-readable notes on file layouts and CSV schemas.
    pub schema: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceFile {
    tags: Vec<SnapshotTag>,
}

pub struct LoadedArtifacts {
    pub manifest: ArtifactManifest,
    pub basis: Mat<f64>,
    pub proj: ProjectedFamily,
    pub fact: ResidualFactorization,
    pub provenance: Vec<SnapshotTag>,
}

pub fn save_artifacts(
    dir: &Path,
    family: &AffineOperatorFamily,
    config: &RunConfig,
    gram: GramChoice,
    basis: &ReducedBasis,
    proj: &ProjectedFamily,
    fact: &ResidualFactorization,
    calibration: Option<CalibrationConstants>,
) -> Result<(), PersistError> {
    std::fs::create_dir_all(dir)?;
    let direct = fact.side(ResidualSide::Direct);
    let manifest = ArtifactManifest {
        format_version: ARTIFACT_FORMAT_VERSION,
        k_subdomains: family.n_subdomains(),
        fission: family.fission,
        gram,
        basis_dim: basis.dim(),
        full_dim: basis.full_dim(),
        has_bc: direct.has_bc(),
        counts: BlockCounts {
            n_a: direct.n_a_components(),
            n_b: direct.n_b_components(),
            d_pairs: direct.d_blocks().len(),
            e_blocks: direct.e_blocks().len(),
            f_pairs: direct.f_blocks().len(),
        },
        calibration,
        config: config.clone(),
        schema: vec![
            "basis.mtx: dense array, one orthonormal basis vector per column".into(),
            "projected_a.mtx: V^T A_{k,p} V stacked vertically in (k, p) order".into(),
            "projected_b.mtx: V^T B_{k,q} V stacked in (k, q) order (single identity block in identity-fission mode)".into(),
            "residual_*_d.mtx / _f.mtx: upper-triangle pairs (a <= b) row-packed; _e.mtx: full rectangle row-major".into(),
            "online.csv columns: mu_id,k_n,lambda_n,eta_k,norm_r,norm_r_star,delta_k,iters_direct,iters_adjoint,t_solve_s,t_estimator_s".into(),
        ],
    };
    std::fs::write(
        dir.join("manifest.toml"),
        toml::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    std::fs::write(
        dir.join("provenance.toml"),
        toml::to_string_pretty(&ProvenanceFile {
            tags: basis.provenance.clone(),
        })
        .expect("provenance serializes"),
    )?;

    write_dense(&dir.join("basis.mtx"), &basis.v)?;
    write_stacked_blocks(&dir.join("projected_a.mtx"), proj.a_hat())?;
    if let Some(bc) = proj.bc_hat() {
        write_dense(&dir.join("projected_bc.mtx"), bc)?;
    }
    write_stacked_blocks(&dir.join("projected_b.mtx"), proj.b_hat())?;

    for (side, name) in [(ResidualSide::Direct, "dir"), (ResidualSide::Adjoint, "adj")] {
        let s = fact.side(side);
        write_stacked_blocks(&dir.join(format!("residual_{name}_d.mtx")), s.d_blocks())?;
        write_stacked_blocks(&dir.join(format!("residual_{name}_e.mtx")), s.e_blocks())?;
        write_stacked_blocks(&dir.join(format!("residual_{name}_f.mtx")), s.f_blocks())?;
    }
    Ok(())
}

pub fn load_artifacts(dir: &Path) -> Result<LoadedArtifacts, PersistError> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.toml"))?;
    let manifest: ArtifactManifest = toml::from_str(&manifest_text)
        .map_err(|e| PersistError::Format(format!("manifest.toml: {e}")))?;
    if manifest.format_version != ARTIFACT_FORMAT_VERSION {
        return Err(PersistError::ArtifactVersionMismatch {
            found: manifest.format_version,
            expected: ARTIFACT_FORMAT_VERSION,
        });
    }
    let provenance: ProvenanceFile =
        toml::from_str(&std::fs::read_to_string(dir.join("provenance.toml"))?)
            .map_err(|e| PersistError::Format(format!("provenance.toml: {e}")))?;

    let basis = read_dense(&dir.join("basis.mtx"))?;
    if basis.ncols() != manifest.basis_dim || basis.nrows() != manifest.full_dim {
        return Err(PersistError::Format(format!(
            "basis dimensions {}x{} disagree with manifest {}x{}",
            basis.nrows(),
            basis.ncols(),
            manifest.full_dim,
            manifest.basis_dim
        )));
    }

    let n_a_raw = match manifest.has_bc {
        true => manifest.counts.n_a - 1,
        false => manifest.counts.n_a,
    };
    let a_hat = read_stacked_blocks(&dir.join("projected_a.mtx"), n_a_raw)?;
    let bc_hat = if manifest.has_bc {
        Some(read_dense(&dir.join("projected_bc.mtx"))?)
    } else {
        None
    };
    let b_hat = read_stacked_blocks(&dir.join("projected_b.mtx"), manifest.counts.n_b)?;
    let proj = ProjectedFamily::from_parts(a_hat, bc_hat, b_hat);

    let mut sides = Vec::with_capacity(2);
    for name in ["dir", "adj"] {
        let d = read_stacked_blocks(
            &dir.join(format!("residual_{name}_d.mtx")),
            manifest.counts.d_pairs,
        )?;
        let e = read_stacked_blocks(
            &dir.join(format!("residual_{name}_e.mtx")),
            manifest.counts.e_blocks,
        )?;
        let f = read_stacked_blocks(
            &dir.join(format!("residual_{name}_f.mtx")),
            manifest.counts.f_pairs,
        )?;
        sides.push((
            manifest.counts.n_a,
            manifest.counts.n_b,
            manifest.has_bc,
            d,
            e,
            f,
        ));
    }
    let adjoint = sides.pop().unwrap();
    let direct = sides.pop().unwrap();
    let fact = ResidualFactorization::from_blocks(manifest.basis_dim, direct, adjoint);

    Ok(LoadedArtifacts {
        manifest,
        basis,
        proj,
        fact,
        provenance: provenance.tags,
    })
}

#[derive(Serialize, Deserialize)]
struct FamilyManifest {
    k_subdomains: usize,
    fission: FissionMode,
    dim: usize,
    has_bc: bool,
}

/// Matrix Market export of every component matrix of the affine family.
pub fn save_family(dir: &Path, family: &AffineOperatorFamily) -> Result<(), PersistError> {
    std::fs::create_dir_all(dir)?;
    let manifest = FamilyManifest {
        k_subdomains: family.n_subdomains(),
        fission: family.fission,
        dim: family.dim(),
        has_bc: family.m_bc().is_some(),
    };
    std::fs::write(
        dir.join("family.toml"),
        toml::to_string_pretty(&manifest).expect("family manifest serializes"),
    )?;
    for (i, m) in family.a_components().iter().enumerate() {
        write_sparse(&dir.join(format!("a_{i:03}.mtx")), m)?;
    }
    if let Some(bc) = family.m_bc() {
        write_sparse(&dir.join("m_bc.mtx"), bc)?;
    }
    for (i, m) in family.b_components().iter().enumerate() {
        write_sparse(&dir.join(format!("b_{i:03}.mtx")), m)?;
    }
    write_sparse(&dir.join("mass.mtx"), &family.mass_matrix)?;
    Ok(())
}

/// Loads an affine family exported by [`save_family`] (the `external`
/// problem kind). Components are rebuilt on a shared union sparsity pattern
/// so externally produced files need not align their patterns.
pub fn load_family(dir: &Path) -> Result<AffineOperatorFamily, PersistError> {
    let manifest: FamilyManifest =
        toml::from_str(&std::fs::read_to_string(dir.join("family.toml"))?)
            .map_err(|e| PersistError::Format(format!("family.toml: {e}")))?;
    let mut a_components = Vec::with_capacity(6 * manifest.k_subdomains + 1);
    for i in 0..6 * manifest.k_subdomains {
        a_components.push(read_sparse(&dir.join(format!("a_{i:03}.mtx")))?);
    }
    if manifest.has_bc {
        a_components.push(read_sparse(&dir.join("m_bc.mtx"))?);
    }
    let a_components = unionize(a_components, manifest.dim)?;
    let n_b = match manifest.fission {
        FissionMode::Assembled => 4 * manifest.k_subdomains,
        FissionMode::Identity => 1,
    };
    let mut b_components = Vec::with_capacity(n_b);
    for i in 0..n_b {
        b_components.push(read_sparse(&dir.join(format!("b_{i:03}.mtx")))?);
    }
    let b_components = unionize(b_components, manifest.dim)?;
    let mass = read_sparse(&dir.join("mass.mtx"))?;

    let mut a_components = a_components;
    let m_bc = if manifest.has_bc {
        a_components.pop()
    } else {
        None
    };
    AffineOperatorFamily::from_parts(
        manifest.k_subdomains,
        manifest.fission,
        a_components,
        m_bc,
        b_components,
        mass,
    )
    .map_err(|e| PersistError::Format(format!("{}: {e}", dir.display())))
}

fn unionize(
    comps: Vec<crate::linalg::SparseMatrix>,
    dim: usize,
) -> Result<Vec<crate::linalg::SparseMatrix>, PersistError> {
    let mut pattern: Vec<(usize, usize, f64)> = Vec::new();
    for m in &comps {
        for (i, j, _) in m.triplets() {
            pattern.push((i, j, 0.0));
        }
    }
    comps
        .into_iter()
        .map(|m| {
            let mut trips = pattern.clone();
            trips.extend(m.triplets());
            crate::linalg::SparseMatrix::from_triplets(dim, dim, &trips)
                .map_err(|e| PersistError::Format(format!("component rebuild: {e}")))
        })
        .collect()
}

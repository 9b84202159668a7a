//! Orthonormal reduced bases: modified Gram-Schmidt with re-orthogonalization
//! and POD compression of snapshot families, both in the configured Gram
//! inner product.

use faer::{Col, Mat};

use super::RomError;
use crate::hifi::GramNorm;

/// Post-projection norm below this fraction of the original norm drops the
/// snapshot (rank control).
const DROP_TOL: f64 = 1e-10;
/// Relative singular-value floor in POD.
const POD_RANK_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotSide {
    Direct,
    Adjoint,
}

/// Provenance of one basis vector's snapshot.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SnapshotTag {
    /// Index of the parameter in the originating set, when applicable.
    pub parameter_index: Option<usize>,
    pub side: SnapshotSide,
    /// True for POD modes (linear combinations of tagged snapshots).
    pub pod_mode: bool,
}

#[derive(Clone, Debug)]
pub struct ReducedBasis {
    /// Orthonormal columns with respect to the Gram matrix of the build.
    pub v: Mat<f64>,
    pub provenance: Vec<SnapshotTag>,
}

impl ReducedBasis {
    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn full_dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn column(&self, j: usize) -> Col<f64> {
        Col::from_fn(self.v.nrows(), |i| self.v[(i, j)])
    }

    /// Lift reduced coordinates: `u = V c` (optionally truncated to the
    /// leading `n` columns).
    pub fn lift(&self, c: &Col<f64>) -> Col<f64> {
        let n = c.nrows();
        let sub = self.v.get(.., 0..n);
        sub * c
    }

    /// `V^T X u`: coordinates of a vector already inside the span.
    pub fn coordinates(&self, u: &Col<f64>, gram: &GramNorm) -> Col<f64> {
        match gram.is_identity() {
            true => self.v.transpose() * u,
            false => {
                // X-orthonormal columns: c_j = <v_j, u>_X
                let n = self.dim();
                Col::from_fn(n, |j| {
                    let vj = self.column(j);
                    gram.inner(&vj, u)
                })
            }
        }
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Vectors whose
/// post-projection norm falls below `1e-10` of their original norm are
/// dropped.
pub fn orthonormalize(
    snapshots: &[(Col<f64>, SnapshotTag)],
    gram: &GramNorm,
) -> Result<ReducedBasis, RomError> {
    let n_full = snapshots
        .first()
        .map(|(c, _)| c.nrows())
        .ok_or(RomError::EmptyBasis)?;
    let mut kept: Vec<Col<f64>> = Vec::new();
    let mut tags: Vec<SnapshotTag> = Vec::new();

    for (snap, tag) in snapshots {
        let original = gram.primal_norm(snap);
        if original == 0.0 {
            continue;
        }
        let mut w = snap.cloned();
        for _pass in 0..2 {
            for q in &kept {
                let proj = gram.inner(q, &w);
                w = &w - &(proj * q);
            }
        }
        let norm = gram.primal_norm(&w);
        if norm < DROP_TOL * original {
            continue;
        }
        for i in 0..n_full {
            w[i] /= norm;
        }
        kept.push(w);
        tags.push(tag.clone());
    }

    if kept.is_empty() {
        return Err(RomError::EmptyBasis);
    }
    let v = Mat::from_fn(n_full, kept.len(), |i, j| kept[j][i]);
    Ok(ReducedBasis {
        v,
        provenance: tags,
    })
}

/// POD compression: leading left singular directions of the X-weighted
/// snapshot matrix, energy-ordered, computed by the method of snapshots.
pub fn pod_compress(
    snapshots: &[(Col<f64>, SnapshotTag)],
    gram: &GramNorm,
    target_dim: usize,
) -> Result<ReducedBasis, RomError> {
    let m = snapshots.len();
    if m == 0 || target_dim == 0 || target_dim > m {
        return Err(RomError::RankDeficient {
            rank: m,
            requested: target_dim,
        });
    }
    let n_full = snapshots[0].0.nrows();

    // Correlation matrix C_ij = <s_i, s_j>_X.
    let corr = Mat::from_fn(m, m, |i, j| gram.inner(&snapshots[i].0, &snapshots[j].0));
    let eig = corr
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| RomError::Linalg(crate::linalg::LinalgError::SolverFailure(format!("{e:?}"))))?;

    // Energy-descending order.
    let mut order: Vec<usize> = (0..m).collect();
    let s = eig.S();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());

    let sigma_max = s[order[0]].max(0.0).sqrt();
    if sigma_max == 0.0 {
        return Err(RomError::RankDeficient {
            rank: 0,
            requested: target_dim,
        });
    }

    let mut modes: Vec<Col<f64>> = Vec::with_capacity(target_dim);
    for &idx in order.iter().take(target_dim) {
        let sigma = s[idx].max(0.0).sqrt();
        if sigma < POD_RANK_TOL * sigma_max {
            return Err(RomError::RankDeficient {
                rank: modes.len(),
                requested: target_dim,
            });
        }
        let mut mode = Col::zeros(n_full);
        for (j, (snap, _)) in snapshots.iter().enumerate() {
            let w = eig.U()[(j, idx)] / sigma;
            mode = &mode + &(w * snap);
        }
        modes.push(mode);
    }

    let tagged: Vec<(Col<f64>, SnapshotTag)> = modes
        .into_iter()
        .map(|m| {
            (
                m,
                SnapshotTag {
                    parameter_index: None,
                    side: SnapshotSide::Direct,
                    pod_mode: true,
                },
            )
        })
        .collect();
    // A final Gram-Schmidt pass cleans up the O(sigma^-1) rounding of the
    // method of snapshots.
    orthonormalize(&tagged, gram)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag() -> SnapshotTag {
        SnapshotTag {
            parameter_index: None,
            side: SnapshotSide::Direct,
            pod_mode: false,
        }
    }

    fn e(n: usize, i: usize) -> Col<f64> {
        Col::from_fn(n, |j| if j == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn duplicate_snapshot_dropped() {
        let gram = GramNorm::identity();
        let snaps = vec![(e(4, 0), tag()), (e(4, 0), tag()), (e(4, 1), tag())];
        let basis = orthonormalize(&snaps, &gram).unwrap();
        assert_eq!(basis.dim(), 2);
    }

    #[test]
    fn random_set_orthonormal() {
        use rand::RngExt;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let snaps: Vec<(Col<f64>, SnapshotTag)> = (0..8)
            .map(|_| (Col::from_fn(100, |_| rng.random::<f64>() - 0.5), tag()))
            .collect();
        let gram = GramNorm::identity();
        let basis = orthonormalize(&snaps, &gram).unwrap();
        assert_eq!(basis.dim(), 8);
        let g = basis.v.transpose() * &basis.v;
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_basis_error() {
        let gram = GramNorm::identity();
        let zero = Col::<f64>::zeros(3);
        assert!(matches!(
            orthonormalize(&[(zero, tag())], &gram),
            Err(RomError::EmptyBasis)
        ));
    }

    #[test]
    fn pod_parallel_snapshots_rank_one() {
        let gram = GramNorm::identity();
        let s1 = e(5, 2);
        let s2 = 3.0 * &s1;
        let snaps = vec![(s1, tag()), (s2, tag())];
        assert!(matches!(
            pod_compress(&snaps, &gram, 2),
            Err(RomError::RankDeficient { rank: 1, .. })
        ));
        let basis = pod_compress(&snaps, &gram, 1).unwrap();
        assert_eq!(basis.dim(), 1);
        assert!((basis.v[(2, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_gram_orthonormality() {
        use crate::hifi::{
            assemble_affine_family, build_mesh, BoundaryKind, FissionMode, GramChoice,
            SubdomainGrid,
        };
        use rand::RngExt;
        use rand::SeedableRng;
        let mesh = build_mesh(2.0, 4, SubdomainGrid { per_side: 1 }, BoundaryKind::Dirichlet)
            .unwrap();
        let family = assemble_affine_family(&mesh, FissionMode::Assembled).unwrap();
        let gram = family.gram(GramChoice::Mass).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
        let snaps: Vec<(Col<f64>, SnapshotTag)> = (0..5)
            .map(|_| (Col::from_fn(family.dim(), |_| rng.random::<f64>() - 0.5), tag()))
            .collect();
        let basis = orthonormalize(&snaps, &gram).unwrap();
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let expect = if i == j { 1.0 } else { 0.0 };
                let ip = gram.inner(&basis.column(i), &basis.column(j));
                assert!((ip - expect).abs() < 1e-10, "V^T X V defect at ({i},{j})");
            }
        }
    }

    #[test]
    fn pod_of_five_direct_five_adjoint_gives_dimension_ten() {
        use rand::RngExt;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        let gram = GramNorm::identity();
        let mut snaps: Vec<(Col<f64>, SnapshotTag)> = Vec::new();
        for i in 0..10 {
            let side = if i < 5 {
                SnapshotSide::Direct
            } else {
                SnapshotSide::Adjoint
            };
            snaps.push((
                Col::from_fn(40, |_| rng.random::<f64>() - 0.5),
                SnapshotTag {
                    parameter_index: Some(i % 5),
                    side,
                    pod_mode: false,
                },
            ));
        }
        let basis = pod_compress(&snaps, &gram, 10).unwrap();
        assert_eq!(basis.dim(), 10);
        assert!(basis.provenance.iter().all(|t| t.pod_mode));
    }

    #[test]
    fn pod_of_orthonormal_set_spans_same_space() {
        let gram = GramNorm::identity();
        let snaps: Vec<(Col<f64>, SnapshotTag)> =
            (0..4).map(|i| (e(6, i), tag())).collect();
        let basis = pod_compress(&snaps, &gram, 4).unwrap();
        // projector difference
        let p_pod = &basis.v * &basis.v.transpose();
        let mut p_ref = Mat::<f64>::zeros(6, 6);
        for i in 0..4 {
            p_ref[(i, i)] = 1.0;
        }
        assert!(crate::linalg::spectral_norm(&(&p_pod - &p_ref)) < 1e-10);
    }
}

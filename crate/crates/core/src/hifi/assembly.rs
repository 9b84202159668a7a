//! Q1 finite-element assembly of the two-group diffusion forms into affine
//! component matrices.
//!
//! DOF ordering is group-major: all group-1 nodes first, then all group-2
//! nodes. The residual factorizations depend on this ordering.
//!
//! Per subdomain `k` the six A-components are, in the order of `f(mu_k)`:
//! group-1 stiffness, group-1 mass, mass coupling (1,2)-block, group-2
//! stiffness, mass coupling (2,1)-block, group-2 mass. The four B-components
//! are the mass blocks (1,1), (1,2), (2,1), (2,2) in the order of `g(mu_k)`.

use faer::{Col, Mat};

use super::mesh::{BoundaryKind, Mesh2D};
use super::{ModelError, ParameterPoint};
use crate::linalg::{LinalgError, SparseCholesky, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FissionMode {
    /// `B_mu` assembled from the fission mass blocks (default).
    Assembled,
    /// `B_mu = I` regardless of the fission pattern.
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GramChoice {
    Identity,
    Mass,
}

/// Gram matrix `X` of the working inner product, with a cached factorization
/// for dual (`X^{-1}`-weighted) norms.
pub struct GramNorm {
    pub choice: GramChoice,
    mass: Option<SparseMatrix>,
    chol: Option<SparseCholesky>,
}

impl GramNorm {
    pub fn identity() -> Self {
        Self {
            choice: GramChoice::Identity,
            mass: None,
            chol: None,
        }
    }

    pub fn mass(mass: SparseMatrix) -> Result<Self, LinalgError> {
        let chol = mass.cholesky()?;
        Ok(Self {
            choice: GramChoice::Mass,
            mass: Some(mass),
            chol: Some(chol),
        })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.choice, GramChoice::Identity)
    }

    /// `<a, b>_X`.
    pub fn inner(&self, a: &Col<f64>, b: &Col<f64>) -> f64 {
        match &self.mass {
            None => a.transpose() * b,
            Some(x) => a.transpose() * &x.matvec(b),
        }
    }

    pub fn primal_norm(&self, v: &Col<f64>) -> f64 {
        let sq: f64 = self.inner(v, v);
        sq.max(0.0).sqrt()
    }

    /// Dual norm `sqrt(v^T X^{-1} v)`.
    pub fn dual_norm(&self, v: &Col<f64>) -> f64 {
        match &self.chol {
            None => v.norm_l2(),
            Some(ch) => {
                let xi = ch.solve(v);
                let sq: f64 = v.transpose() * &xi;
                sq.max(0.0).sqrt()
            }
        }
    }

    /// `X^{-1} M` columnwise.
    pub fn apply_inverse_mat(&self, m: &Mat<f64>) -> Mat<f64> {
        match &self.chol {
            None => m.cloned(),
            Some(ch) => ch.solve_mat(m),
        }
    }
}

/// Parameter-independent component matrices of the affine decomposition
/// `A_mu = sum_{k,p} f_p(mu_k) A_{k,p} + M_bc`,
/// `B_mu = sum_{k,q} g_q(mu_k) B_{k,q}`.
pub struct AffineOperatorFamily {
    dim: usize,
    k_subdomains: usize,
    /// Generating mesh; absent for families loaded from component files.
    pub mesh: Option<Mesh2D>,
    pub fission: FissionMode,
    /// `K * 6` matrices indexed `k * 6 + p`, all on one shared pattern.
    a_components: Vec<SparseMatrix>,
    /// Boundary term; zero pattern-only matrix under Dirichlet.
    m_bc: Option<SparseMatrix>,
    /// `K * 4` matrices indexed `k * 4 + q`, or a single identity in
    /// [`FissionMode::Identity`].
    b_components: Vec<SparseMatrix>,
    /// Two-group mass matrix, selectable as the Gram matrix `X`.
    pub mass_matrix: SparseMatrix,
}

/// Coefficient vectors of one parameter value, flattened over `(k, p)` and
/// `(k, q)`; the boundary term always carries coefficient one.
#[derive(Clone, Debug)]
pub struct AffineCoefficients {
    pub f_hat: Vec<f64>,
    pub g_hat: Vec<f64>,
}

impl AffineOperatorFamily {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_subdomains(&self) -> usize {
        self.k_subdomains
    }

    /// Assembles a family from raw component matrices. `a_components` holds
    /// `6 * K` matrices in `(k, p)` order, `b_components` `4 * K` in `(k, q)`
    /// order (or a single matrix in identity-fission mode).
    pub fn from_parts(
        k_subdomains: usize,
        fission: FissionMode,
        a_components: Vec<SparseMatrix>,
        m_bc: Option<SparseMatrix>,
        b_components: Vec<SparseMatrix>,
        mass_matrix: SparseMatrix,
    ) -> Result<Self, ModelError> {
        let dim = a_components
            .first()
            .map(SparseMatrix::nrows)
            .ok_or_else(|| ModelError::CoercivityViolation("family needs A components".into()))?;
        if a_components.len() != 6 * k_subdomains {
            return Err(ModelError::CoercivityViolation(format!(
                "expected {} A components, got {}",
                6 * k_subdomains,
                a_components.len()
            )));
        }
        let expected_b = match fission {
            FissionMode::Assembled => 4 * k_subdomains,
            FissionMode::Identity => 1,
        };
        if b_components.len() != expected_b {
            return Err(ModelError::CoercivityViolation(format!(
                "expected {} B components, got {}",
                expected_b,
                b_components.len()
            )));
        }
        for m in a_components.iter().chain(&b_components).chain(m_bc.iter()) {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(ModelError::CoercivityViolation(
                    "component dimensions disagree".into(),
                ));
            }
        }
        Ok(Self {
            dim,
            k_subdomains,
            mesh: None,
            fission,
            a_components,
            m_bc,
            b_components,
            mass_matrix,
        })
    }

    pub fn a_components(&self) -> &[SparseMatrix] {
        &self.a_components
    }

    pub fn b_components(&self) -> &[SparseMatrix] {
        &self.b_components
    }

    pub fn m_bc(&self) -> Option<&SparseMatrix> {
        self.m_bc.as_ref()
    }

    pub fn gram(&self, choice: GramChoice) -> Result<GramNorm, LinalgError> {
        match choice {
            GramChoice::Identity => Ok(GramNorm::identity()),
            GramChoice::Mass => GramNorm::mass(self.mass_matrix.clone()),
        }
    }

    /// Evaluates `f(mu_k)` and `g(mu_k)` for every subdomain.
    pub fn coefficients(&self, mu: &ParameterPoint) -> Result<AffineCoefficients, ModelError> {
        flatten_coefficients(mu, self.n_subdomains(), self.fission)
    }
}

/// Flattens a parameter into the `(k, p)` / `(k, q)` coefficient vectors of
/// the affine sums; usable without the component matrices (online path).
pub fn flatten_coefficients(
    mu: &ParameterPoint,
    k_subdomains: usize,
    fission: FissionMode,
) -> Result<AffineCoefficients, ModelError> {
    if mu.n_subdomains() != k_subdomains {
        return Err(ModelError::CoercivityViolation(format!(
            "parameter has {} subdomains, family expects {}",
            mu.n_subdomains(),
            k_subdomains
        )));
    }
    let f_hat: Vec<f64> = mu.subdomains.iter().flat_map(|sd| sd.f).collect();
    let g_hat = match fission {
        FissionMode::Assembled => mu.subdomains.iter().flat_map(|sd| sd.g).collect(),
        FissionMode::Identity => vec![1.0],
    };
    Ok(AffineCoefficients { f_hat, g_hat })
}

/// `A_mu = sum f_p(mu_k) A_{k,p} + M_bc`, `B_mu = sum g_q(mu_k) B_{k,q}`.
pub fn assemble_parametric(
    family: &AffineOperatorFamily,
    mu: &ParameterPoint,
) -> Result<(SparseMatrix, SparseMatrix), ModelError> {
    mu.validate()?;
    let coeffs = family.coefficients(mu)?;
    let mut a_terms: Vec<(f64, &SparseMatrix)> = coeffs
        .f_hat
        .iter()
        .copied()
        .zip(family.a_components.iter())
        .collect();
    if let Some(bc) = &family.m_bc {
        a_terms.push((1.0, bc));
    }
    let a = SparseMatrix::linear_combination(&a_terms)?;
    let b_terms: Vec<(f64, &SparseMatrix)> = coeffs
        .g_hat
        .iter()
        .copied()
        .zip(family.b_components.iter())
        .collect();
    let b = SparseMatrix::linear_combination(&b_terms)?;
    Ok((a, b))
}

/// Reference Q1 element matrices on an `h x h` cell, integrated with 2x2
/// Gauss quadrature (exact for constant coefficients).
pub(crate) struct ElementMatrices {
    pub stiffness: [[f64; 4]; 4],
    pub mass: [[f64; 4]; 4],
    /// 1D edge mass on an edge of length `h`.
    pub edge_mass: [[f64; 2]; 2],
}

pub(crate) fn element_matrices(h: f64) -> ElementMatrices {
    let g = 1.0 / 3.0f64.sqrt();
    let gauss = [(-g, -g), (g, -g), (g, g), (-g, g)];
    // CCW shape functions on [-1, 1]^2.
    let shape = |xi: f64, eta: f64| {
        [
            0.25 * (1.0 - xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 + eta),
            0.25 * (1.0 - xi) * (1.0 + eta),
        ]
    };
    let grad = |xi: f64, eta: f64| {
        [
            [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
            [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
            [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
            [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
        ]
    };

    let det_j = h * h / 4.0;
    let inv_j = 2.0 / h;
    let mut stiffness = [[0.0; 4]; 4];
    let mut mass = [[0.0; 4]; 4];
    for &(xi, eta) in &gauss {
        let n = shape(xi, eta);
        let gr = grad(xi, eta);
        for i in 0..4 {
            for j in 0..4 {
                let gdot = (gr[i][0] * gr[j][0] + gr[i][1] * gr[j][1]) * inv_j * inv_j;
                stiffness[i][j] += gdot * det_j;
                mass[i][j] += n[i] * n[j] * det_j;
            }
        }
    }

    let mut edge_mass = [[0.0; 2]; 2];
    for &xi in &[-g, g] {
        let n = [0.5 * (1.0 - xi), 0.5 * (1.0 + xi)];
        for i in 0..2 {
            for j in 0..2 {
                edge_mass[i][j] += n[i] * n[j] * (h / 2.0);
            }
        }
    }

    ElementMatrices {
        stiffness,
        mass,
        edge_mass,
    }
}

#[derive(Clone, Copy)]
enum Block {
    G11,
    G12,
    G21,
    G22,
}

impl Block {
    fn offsets(self, dofs_per_group: usize) -> (usize, usize) {
        match self {
            Block::G11 => (0, 0),
            Block::G12 => (0, dofs_per_group),
            Block::G21 => (dofs_per_group, 0),
            Block::G22 => (dofs_per_group, dofs_per_group),
        }
    }
}

/// Assembles every component matrix of the family for the given mesh.
pub fn assemble_affine_family(
    mesh: &Mesh2D,
    fission: FissionMode,
) -> Result<AffineOperatorFamily, ModelError> {
    let elems = element_matrices(mesh.h());
    let n_dof = mesh.dofs_per_group();
    let dim = mesh.system_dim();
    let k_count = mesh.n_subdomains();

    // Shared sparsity pattern (explicit zeros) so parametric assembly is a
    // value-level linear combination.
    let mut pattern: Vec<(usize, usize, f64)> = Vec::new();
    let blocks = [Block::G11, Block::G12, Block::G21, Block::G22];
    for cy in 0..mesh.cells_per_side {
        for cx in 0..mesh.cells_per_side {
            let nodes = mesh.cell_nodes(cx, cy);
            for &bl in &blocks {
                let (ro, co) = bl.offsets(n_dof);
                for i in 0..4 {
                    for j in 0..4 {
                        if let (Some(di), Some(dj)) =
                            (mesh.dof_of_node(nodes[i]), mesh.dof_of_node(nodes[j]))
                        {
                            pattern.push((ro + di, co + dj, 0.0));
                        }
                    }
                }
            }
        }
    }

    let scatter_cells =
        |block: Block, local: &[[f64; 4]; 4], subdomain: usize| -> Vec<(usize, usize, f64)> {
            let (ro, co) = block.offsets(n_dof);
            let mut trips = pattern.clone();
            for cy in 0..mesh.cells_per_side {
                for cx in 0..mesh.cells_per_side {
                    if mesh.cell_subdomain(cx, cy) != subdomain {
                        continue;
                    }
                    let nodes = mesh.cell_nodes(cx, cy);
                    for i in 0..4 {
                        for j in 0..4 {
                            if let (Some(di), Some(dj)) =
                                (mesh.dof_of_node(nodes[i]), mesh.dof_of_node(nodes[j]))
                            {
                                trips.push((ro + di, co + dj, local[i][j]));
                            }
                        }
                    }
                }
            }
            trips
        };

    let mut a_components = Vec::with_capacity(k_count * 6);
    for k in 0..k_count {
        let per_p: [(Block, &[[f64; 4]; 4]); 6] = [
            (Block::G11, &elems.stiffness),
            (Block::G11, &elems.mass),
            (Block::G12, &elems.mass),
            (Block::G22, &elems.stiffness),
            (Block::G21, &elems.mass),
            (Block::G22, &elems.mass),
        ];
        for (block, local) in per_p {
            let trips = scatter_cells(block, local, k);
            a_components.push(SparseMatrix::from_triplets(dim, dim, &trips)?);
        }
    }

    let m_bc = match mesh.bc {
        BoundaryKind::Dirichlet => None,
        BoundaryKind::Robin => {
            let mut trips = pattern.clone();
            for (n0, n1) in mesh.boundary_edges() {
                let d0 = mesh.dof_of_node(n0).expect("robin keeps boundary nodes");
                let d1 = mesh.dof_of_node(n1).expect("robin keeps boundary nodes");
                let local = [(d0, d0, elems.edge_mass[0][0]), (d0, d1, elems.edge_mass[0][1]),
                             (d1, d0, elems.edge_mass[1][0]), (d1, d1, elems.edge_mass[1][1])];
                for &(i, j, v) in &local {
                    // void condition contributes (1/2) * edge mass per group
                    trips.push((i, j, 0.5 * v));
                    trips.push((n_dof + i, n_dof + j, 0.5 * v));
                }
            }
            Some(SparseMatrix::from_triplets(dim, dim, &trips)?)
        }
    };

    let b_components = match fission {
        FissionMode::Identity => vec![SparseMatrix::identity(dim)],
        FissionMode::Assembled => {
            let mut comps = Vec::with_capacity(k_count * 4);
            // Pattern restricted to mass positions keeps B leaner than A.
            for k in 0..k_count {
                for &bl in &blocks {
                    let trips = scatter_with_pattern(mesh, bl, &elems.mass, k, n_dof);
                    comps.push(SparseMatrix::from_triplets(dim, dim, &trips)?);
                }
            }
            comps
        }
    };

    // Two-group mass matrix over the whole domain (Gram option + tests).
    let mut mass_trips: Vec<(usize, usize, f64)> = Vec::new();
    for cy in 0..mesh.cells_per_side {
        for cx in 0..mesh.cells_per_side {
            let nodes = mesh.cell_nodes(cx, cy);
            for i in 0..4 {
                for j in 0..4 {
                    if let (Some(di), Some(dj)) =
                        (mesh.dof_of_node(nodes[i]), mesh.dof_of_node(nodes[j]))
                    {
                        mass_trips.push((di, dj, elems.mass[i][j]));
                        mass_trips.push((n_dof + di, n_dof + dj, elems.mass[i][j]));
                    }
                }
            }
        }
    }
    let mass_matrix = SparseMatrix::from_triplets(dim, dim, &mass_trips)?;

    Ok(AffineOperatorFamily {
        dim,
        k_subdomains: k_count,
        mesh: Some(mesh.clone()),
        fission,
        a_components,
        m_bc,
        b_components,
        mass_matrix,
    })
}

fn scatter_with_pattern(
    mesh: &Mesh2D,
    block: Block,
    local: &[[f64; 4]; 4],
    subdomain: usize,
    n_dof: usize,
) -> Vec<(usize, usize, f64)> {
    // B-side shares one mass-block union pattern across all four blocks.
    let blocks = [Block::G11, Block::G12, Block::G21, Block::G22];
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    for cy in 0..mesh.cells_per_side {
        for cx in 0..mesh.cells_per_side {
            let nodes = mesh.cell_nodes(cx, cy);
            for &bl in &blocks {
                let (ro, co) = bl.offsets(n_dof);
                for i in 0..4 {
                    for j in 0..4 {
                        if let (Some(di), Some(dj)) =
                            (mesh.dof_of_node(nodes[i]), mesh.dof_of_node(nodes[j]))
                        {
                            trips.push((ro + di, co + dj, 0.0));
                        }
                    }
                }
            }
        }
    }
    let (ro, co) = block.offsets(n_dof);
    for cy in 0..mesh.cells_per_side {
        for cx in 0..mesh.cells_per_side {
            if mesh.cell_subdomain(cx, cy) != subdomain {
                continue;
            }
            let nodes = mesh.cell_nodes(cx, cy);
            for i in 0..4 {
                for j in 0..4 {
                    if let (Some(di), Some(dj)) =
                        (mesh.dof_of_node(nodes[i]), mesh.dof_of_node(nodes[j]))
                    {
                        trips.push((ro + di, co + dj, local[i][j]));
                    }
                }
            }
        }
    }
    trips
}

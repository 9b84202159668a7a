//! Uniform structured mesh on the square `[0, L]^2` with an aligned grid of
//! square subdomains. Every cell lies entirely inside one subdomain, which is
//! what keeps the per-cell coefficients constant.

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// Homogeneous Dirichlet; boundary nodes are excluded from the DOF set.
    Dirichlet,
    /// Void (Robin) condition `D grad(phi).n + phi/2 = 0`; all nodes are DOFs.
    Robin,
}

/// `per_side x per_side` grid of equal square subdomains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SubdomainGrid {
    pub per_side: usize,
}

impl SubdomainGrid {
    pub fn count(&self) -> usize {
        self.per_side * self.per_side
    }
}

#[derive(Clone, Debug)]
pub struct Mesh2D {
    pub side_length: f64,
    pub cells_per_side: usize,
    pub partition: SubdomainGrid,
    pub bc: BoundaryKind,
    /// Map node index -> DOF index within one group (`usize::MAX` marks an
    /// excluded Dirichlet boundary node).
    dof_of_node: Vec<usize>,
    dofs_per_group: usize,
    /// Subdomain owning each node; interface nodes resolve to the lowest
    /// adjacent cell's subdomain.
    node_subdomain: Vec<usize>,
}

pub const EXCLUDED: usize = usize::MAX;

impl Mesh2D {
    pub fn h(&self) -> f64 {
        self.side_length / self.cells_per_side as f64
    }

    pub fn nodes_per_side(&self) -> usize {
        self.cells_per_side + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_side() * self.nodes_per_side()
    }

    pub fn n_cells(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn n_subdomains(&self) -> usize {
        self.partition.count()
    }

    /// Degrees of freedom per energy group.
    pub fn dofs_per_group(&self) -> usize {
        self.dofs_per_group
    }

    /// Total system dimension (two groups).
    pub fn system_dim(&self) -> usize {
        2 * self.dofs_per_group
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_per_side() + ix
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let nps = self.nodes_per_side();
        let ix = node % nps;
        let iy = node / nps;
        (ix as f64 * self.h(), iy as f64 * self.h())
    }

    /// DOF of a node within one group, or `None` for excluded boundary nodes.
    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        match self.dof_of_node[node] {
            EXCLUDED => None,
            d => Some(d),
        }
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let nps = self.nodes_per_side();
        let ix = node % nps;
        let iy = node / nps;
        ix == 0 || iy == 0 || ix == nps - 1 || iy == nps - 1
    }

    pub fn node_subdomain(&self, node: usize) -> usize {
        self.node_subdomain[node]
    }

    /// Subdomain index of a cell `(cx, cy)`.
    pub fn cell_subdomain(&self, cx: usize, cy: usize) -> usize {
        let cells_per_sub = self.cells_per_side / self.partition.per_side;
        let sx = cx / cells_per_sub;
        let sy = cy / cells_per_sub;
        sy * self.partition.per_side + sx
    }

    /// The four nodes of cell `(cx, cy)` in counter-clockwise order starting
    /// from the lower-left corner.
    pub fn cell_nodes(&self, cx: usize, cy: usize) -> [usize; 4] {
        [
            self.node_index(cx, cy),
            self.node_index(cx + 1, cy),
            self.node_index(cx + 1, cy + 1),
            self.node_index(cx, cy + 1),
        ]
    }

    /// Boundary edges as node pairs, each of length `h`.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let n = self.cells_per_side;
        let mut edges = Vec::with_capacity(4 * n);
        for i in 0..n {
            edges.push((self.node_index(i, 0), self.node_index(i + 1, 0)));
            edges.push((self.node_index(i, n), self.node_index(i + 1, n)));
            edges.push((self.node_index(0, i), self.node_index(0, i + 1)));
            edges.push((self.node_index(n, i), self.node_index(n, i + 1)));
        }
        edges
    }
}

pub fn build_mesh(
    side_length: f64,
    cells_per_side: usize,
    partition: SubdomainGrid,
    bc: BoundaryKind,
) -> Result<Mesh2D, ModelError> {
    if side_length <= 0.0 || cells_per_side == 0 || partition.per_side == 0 {
        return Err(ModelError::MisalignedPartition(
            "side length, cell count and partition must be positive".into(),
        ));
    }
    if cells_per_side % partition.per_side != 0 {
        return Err(ModelError::MisalignedPartition(format!(
            "{} cells per side cannot be split into {} equal subdomains",
            cells_per_side, partition.per_side
        )));
    }
    let nps = cells_per_side + 1;
    let n_nodes = nps * nps;

    let mut mesh = Mesh2D {
        side_length,
        cells_per_side,
        partition,
        bc,
        dof_of_node: vec![EXCLUDED; n_nodes],
        dofs_per_group: 0,
        node_subdomain: vec![0; n_nodes],
    };

    let mut next = 0usize;
    for node in 0..n_nodes {
        let keep = match bc {
            BoundaryKind::Dirichlet => !mesh.is_boundary_node(node),
            BoundaryKind::Robin => true,
        };
        if keep {
            mesh.dof_of_node[node] = next;
            next += 1;
        }
    }
    mesh.dofs_per_group = next;

    let cells_per_sub = cells_per_side / partition.per_side;
    for node in 0..n_nodes {
        let ix = node % nps;
        let iy = node / nps;
        // Owner cell: clamp to the last cell along each axis.
        let cx = ix.min(cells_per_side - 1);
        let cy = iy.min(cells_per_side - 1);
        let sx = cx / cells_per_sub;
        let sy = cy / cells_per_sub;
        mesh.node_subdomain[node] = sy * partition.per_side + sx;
    }

    Ok(mesh)
}

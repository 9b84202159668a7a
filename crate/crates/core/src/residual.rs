//! Offline precomputation of reduced residual factors and exact online
//! evaluation of the residual norms `||R_N(mu)||` and `||R*_N(mu)||` without
//! touching full-dimension objects.
//!
//! With `Y_a = A_a V` (the boundary matrix is the trailing A-side component
//! with unit coefficient) and `Z_b = X^{-1} Y_b`, the squared norm expands as
//!
//! `||(B_mu - k A_mu) V c||^2_{X^{-1}} = w^T Q(c) w`,
//!
//! where `w = [-k * (f_hat, 1); g_hat]` and `Q` collects the small Gram blocks
//! `D_{ab} = Y_a^T Z_b`, `E_{ab} = Y_a^T Z^B_b`, `F_{ab} = Y^B_a^T Z^B_b`.
//! That expansion, evaluated term by term, is what this module implements;
//! the adjoint side uses the same machinery on transposed components.

use faer::{Col, Mat};
use thiserror::Error;

use crate::hifi::{AffineCoefficients, AffineOperatorFamily, GramNorm, ModelError};
use crate::linalg::{LinalgError, SparseMatrix};
use crate::rom::ReducedBasis;

/// Values of `c^T G c` in `[-1e-12, 0)` clamp to zero; anything below raises
/// [`ResidualError::NegativeQuadraticForm`].
const NEGATIVE_CLAMP: f64 = -1e-12;

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error("Gram matrix factorization failed: {0}")]
    GramFactorizationFailed(String),
    #[error("squared residual norm {value:e} is negative beyond roundoff; factors are corrupt")]
    NegativeQuadraticForm { value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualSide {
    Direct,
    Adjoint,
}

/// Gram blocks of one residual side.
pub struct SideFactors {
    n_a: usize,
    n_b: usize,
    has_bc: bool,
    /// Upper-triangular pairs `a <= b` of `Y_a^T Z_b`.
    d: Vec<Mat<f64>>,
    /// Full rectangle `a x b` of `Y_a^T Z^B_b`.
    e: Vec<Mat<f64>>,
    /// Upper-triangular pairs of the B-side Gram.
    f: Vec<Mat<f64>>,
    /// Extension caches: `Y_a`, `Y^B_b` and their `X^{-1}` images (identity
    /// Gram shares them). Absent when loaded from artifacts.
    ya: Option<Vec<Mat<f64>>>,
    za: Option<Vec<Mat<f64>>>,
    yb: Option<Vec<Mat<f64>>>,
    zb: Option<Vec<Mat<f64>>>,
}

fn tri_index(a: usize, b: usize) -> usize {
    // a <= b, upper triangle packed row-wise... index within row a.
    debug_assert!(a <= b);
    b * (b + 1) / 2 + a
}

impl SideFactors {
    pub fn n_a_components(&self) -> usize {
        self.n_a
    }

    pub fn n_b_components(&self) -> usize {
        self.n_b
    }

    pub fn has_bc(&self) -> bool {
        self.has_bc
    }

    pub fn d_blocks(&self) -> &[Mat<f64>] {
        &self.d
    }

    pub fn e_blocks(&self) -> &[Mat<f64>] {
        &self.e
    }

    pub fn f_blocks(&self) -> &[Mat<f64>] {
        &self.f
    }

    /// `D_{ab}` for arbitrary order; the lower triangle is the transpose of
    /// the stored upper triangle.
    pub fn d_block(&self, a: usize, b: usize) -> Mat<f64> {
        if a <= b {
            self.d[tri_index(a, b)].cloned()
        } else {
            self.d[tri_index(b, a)].transpose().cloned()
        }
    }

    pub fn f_block(&self, a: usize, b: usize) -> Mat<f64> {
        if a <= b {
            self.f[tri_index(a, b)].cloned()
        } else {
            self.f[tri_index(b, a)].transpose().cloned()
        }
    }

    pub fn e_block(&self, a: usize, b: usize) -> &Mat<f64> {
        &self.e[a * self.n_b + b]
    }

    fn evaluate(&self, wa: &[f64], wb: &[f64], c: &Col<f64>, n: usize) -> f64 {
        let mut total = 0.0;
        for b in 0..self.n_a {
            for a in 0..=b {
                let weight = if a == b { 1.0 } else { 2.0 };
                let w = wa[a] * wa[b] * weight;
                if w != 0.0 {
                    total += w * quad_form(&self.d[tri_index(a, b)], c, n);
                }
            }
        }
        for a in 0..self.n_a {
            for b in 0..self.n_b {
                let w = 2.0 * wa[a] * wb[b];
                if w != 0.0 {
                    total += w * quad_form(&self.e[a * self.n_b + b], c, n);
                }
            }
        }
        for b in 0..self.n_b {
            for a in 0..=b {
                let weight = if a == b { 1.0 } else { 2.0 };
                let w = wb[a] * wb[b] * weight;
                if w != 0.0 {
                    total += w * quad_form(&self.f[tri_index(a, b)], c, n);
                }
            }
        }
        total
    }
}

fn quad_form(block: &Mat<f64>, c: &Col<f64>, n: usize) -> f64 {
    let sub = block.get(0..n, 0..n);
    let t = sub * c;
    c.transpose() * &t
}

/// Batched quadratic forms: `q[j] = c_j^T block c_j` over the columns of `cs`.
fn quad_form_batch(block: &Mat<f64>, cs: &Mat<f64>, n: usize, out: &mut [f64]) {
    let sub = block.get(0..n, 0..n);
    let t = sub * cs;
    for (j, q) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            acc += cs[(i, j)] * t[(i, j)];
        }
        *q = acc;
    }
}

pub struct ResidualFactorization {
    n: usize,
    direct: SideFactors,
    adjoint: SideFactors,
    /// Transposed component matrices kept for extension.
    comps_t: Option<(Vec<SparseMatrix>, Vec<SparseMatrix>)>,
}

impl std::fmt::Debug for ResidualFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResidualFactorization")
            .field("basis_dim", &self.n)
            .finish()
    }
}

impl ResidualFactorization {
    pub fn basis_dim(&self) -> usize {
        self.n
    }

    pub fn side(&self, side: ResidualSide) -> &SideFactors {
        match side {
            ResidualSide::Direct => &self.direct,
            ResidualSide::Adjoint => &self.adjoint,
        }
    }

    /// Computes every Gram block for the given basis.
    pub fn precompute(
        family: &AffineOperatorFamily,
        basis: &ReducedBasis,
        gram: &GramNorm,
    ) -> Result<Self, ResidualError> {
        let (a_t, b_t): (Vec<SparseMatrix>, Vec<SparseMatrix>) = (
            family
                .a_components()
                .iter()
                .chain(family.m_bc())
                .map(|m| m.transposed())
                .collect(),
            family.b_components().iter().map(|m| m.transposed()).collect(),
        );
        let a_direct: Vec<&SparseMatrix> = family
            .a_components()
            .iter()
            .chain(family.m_bc())
            .collect();
        let b_direct: Vec<&SparseMatrix> = family.b_components().iter().collect();
        let a_adj: Vec<&SparseMatrix> = a_t.iter().collect();
        let b_adj: Vec<&SparseMatrix> = b_t.iter().collect();

        let direct = side_factors(&a_direct, &b_direct, family.m_bc().is_some(), basis, gram)?;
        let adjoint = side_factors(&a_adj, &b_adj, family.m_bc().is_some(), basis, gram)?;
        Ok(Self {
            n: basis.dim(),
            direct,
            adjoint,
            comps_t: Some((a_t, b_t)),
        })
    }

    /// Extends the factors after the basis grew by appended columns; old
    /// blocks stay as leading principal submatrices.
    pub fn extend(
        &mut self,
        family: &AffineOperatorFamily,
        basis: &ReducedBasis,
        gram: &GramNorm,
    ) -> Result<(), ResidualError> {
        let new_n = basis.dim();
        if new_n == self.n {
            return Ok(());
        }
        if new_n < self.n {
            return Err(ResidualError::Dimension(
                "basis shrank; factors can only be extended".into(),
            ));
        }
        let (a_t, b_t) = self
            .comps_t
            .as_ref()
            .ok_or_else(|| ResidualError::Dimension("factor set loaded without extension caches".into()))?;
        let a_direct: Vec<&SparseMatrix> = family
            .a_components()
            .iter()
            .chain(family.m_bc())
            .collect();
        let b_direct: Vec<&SparseMatrix> = family.b_components().iter().collect();
        let a_adj: Vec<&SparseMatrix> = a_t.iter().collect();
        let b_adj: Vec<&SparseMatrix> = b_t.iter().collect();
        extend_side(&mut self.direct, &a_direct, &b_direct, basis, gram, self.n)?;
        extend_side(&mut self.adjoint, &a_adj, &b_adj, basis, gram, self.n)?;
        self.n = new_n;
        Ok(())
    }

    /// Rebuilds a factor set from persisted blocks (no extension caches).
    pub fn from_blocks(
        n: usize,
        direct: (usize, usize, bool, Vec<Mat<f64>>, Vec<Mat<f64>>, Vec<Mat<f64>>),
        adjoint: (usize, usize, bool, Vec<Mat<f64>>, Vec<Mat<f64>>, Vec<Mat<f64>>),
    ) -> Self {
        let mk = |(n_a, n_b, has_bc, d, e, f): (usize, usize, bool, Vec<Mat<f64>>, Vec<Mat<f64>>, Vec<Mat<f64>>)| SideFactors {
            n_a,
            n_b,
            has_bc,
            d,
            e,
            f,
            ya: None,
            za: None,
            yb: None,
            zb: None,
        };
        Self {
            n,
            direct: mk(direct),
            adjoint: mk(adjoint),
            comps_t: None,
        }
    }

    fn weights(&self, coeffs: &AffineCoefficients, k_n: f64) -> (Vec<f64>, Vec<f64>) {
        let mut wa: Vec<f64> = coeffs.f_hat.iter().map(|f| -k_n * f).collect();
        if self.direct.has_bc {
            wa.push(-k_n);
        }
        (wa, coeffs.g_hat.clone())
    }

    /// Exact online residual norm `||(B_mu - k_N A_mu) V c||_{X^{-1}}`
    /// evaluated at the leading `n = c.nrows()` basis vectors.
    pub fn online_norm(
        &self,
        coeffs: &AffineCoefficients,
        c: &Col<f64>,
        k_n: f64,
        side: ResidualSide,
    ) -> Result<f64, ResidualError> {
        let n = c.nrows();
        if n > self.n {
            return Err(ResidualError::Dimension(format!(
                "coordinate dimension {n} exceeds factor dimension {}",
                self.n
            )));
        }
        let (wa, wb) = self.weights(coeffs, k_n);
        let factors = self.side(side);
        if wa.len() != factors.n_a || wb.len() != factors.n_b {
            return Err(ResidualError::Dimension(format!(
                "coefficient counts ({}, {}) do not match factors ({}, {})",
                wa.len(),
                wb.len(),
                factors.n_a,
                factors.n_b
            )));
        }
        let sq = factors.evaluate(&wa, &wb, c, n);
        if sq < NEGATIVE_CLAMP {
            return Err(ResidualError::NegativeQuadraticForm { value: sq });
        }
        Ok(sq.max(0.0).sqrt())
    }

    /// Batched norms over many parameters at a common truncation dimension:
    /// `cs` holds one coordinate column per parameter. Entries of `skip`
    /// yield `NaN` without touching the factors.
    pub fn online_norms_batch(
        &self,
        items: &[(&AffineCoefficients, f64)],
        cs: &Mat<f64>,
        side: ResidualSide,
        skip: &[bool],
    ) -> Result<Vec<f64>, ResidualError> {
        let n = cs.nrows();
        let p = cs.ncols();
        if items.len() != p || skip.len() != p {
            return Err(ResidualError::Dimension(
                "batch length mismatch between coefficients and coordinates".into(),
            ));
        }
        if n > self.n {
            return Err(ResidualError::Dimension(format!(
                "coordinate dimension {n} exceeds factor dimension {}",
                self.n
            )));
        }
        let factors = self.side(side);
        let n_a = factors.n_a;
        let n_b = factors.n_b;

        let weights: Vec<(Vec<f64>, Vec<f64>)> = items
            .iter()
            .map(|(coeffs, k_n)| self.weights(coeffs, *k_n))
            .collect();

        let mut totals = vec![0.0f64; p];
        let mut q = vec![0.0f64; p];

        for b in 0..n_a {
            for a in 0..=b {
                quad_form_batch(&factors.d[tri_index(a, b)], cs, n, &mut q);
                let pair_weight = if a == b { 1.0 } else { 2.0 };
                for j in 0..p {
                    let (wa, _) = &weights[j];
                    totals[j] += pair_weight * wa[a] * wa[b] * q[j];
                }
            }
        }
        for a in 0..n_a {
            for b in 0..n_b {
                quad_form_batch(&factors.e[a * n_b + b], cs, n, &mut q);
                for j in 0..p {
                    let (wa, wb) = &weights[j];
                    totals[j] += 2.0 * wa[a] * wb[b] * q[j];
                }
            }
        }
        for b in 0..n_b {
            for a in 0..=b {
                quad_form_batch(&factors.f[tri_index(a, b)], cs, n, &mut q);
                let pair_weight = if a == b { 1.0 } else { 2.0 };
                for j in 0..p {
                    let (_, wb) = &weights[j];
                    totals[j] += pair_weight * wb[a] * wb[b] * q[j];
                }
            }
        }

        let mut out = Vec::with_capacity(p);
        for j in 0..p {
            if skip[j] {
                out.push(f64::NAN);
                continue;
            }
            let sq = totals[j];
            if sq < NEGATIVE_CLAMP {
                return Err(ResidualError::NegativeQuadraticForm { value: sq });
            }
            out.push(sq.max(0.0).sqrt());
        }
        Ok(out)
    }
}

fn apply_gram_inverse(gram: &GramNorm, m: &Mat<f64>) -> Mat<f64> {
    gram.apply_inverse_mat(m)
}

fn side_factors(
    a_comps: &[&SparseMatrix],
    b_comps: &[&SparseMatrix],
    has_bc: bool,
    basis: &ReducedBasis,
    gram: &GramNorm,
) -> Result<SideFactors, ResidualError> {
    let v = &basis.v;
    let ya: Vec<Mat<f64>> = a_comps.iter().map(|m| m.matmul(v)).collect();
    let yb: Vec<Mat<f64>> = b_comps.iter().map(|m| m.matmul(v)).collect();
    let (za, zb) = if gram.is_identity() {
        (None, None)
    } else {
        (
            Some(ya.iter().map(|y| apply_gram_inverse(gram, y)).collect::<Vec<_>>()),
            Some(yb.iter().map(|y| apply_gram_inverse(gram, y)).collect::<Vec<_>>()),
        )
    };

    let n_a = ya.len();
    let n_b = yb.len();
    let mut d = Vec::with_capacity(n_a * (n_a + 1) / 2);
    let mut f = Vec::with_capacity(n_b * (n_b + 1) / 2);
    let mut e = Vec::with_capacity(n_a * n_b);
    {
        let za_ref: &[Mat<f64>] = za.as_deref().unwrap_or(&ya);
        let zb_ref: &[Mat<f64>] = zb.as_deref().unwrap_or(&yb);
        for b in 0..n_a {
            for a in 0..=b {
                d.push(ya[a].transpose() * &za_ref[b]);
            }
        }
        for a in 0..n_a {
            for b in 0..n_b {
                e.push(ya[a].transpose() * &zb_ref[b]);
            }
        }
        for b in 0..n_b {
            for a in 0..=b {
                f.push(yb[a].transpose() * &zb_ref[b]);
            }
        }
    }

    Ok(SideFactors {
        n_a,
        n_b,
        has_bc,
        d,
        e,
        f,
        ya: Some(ya),
        za,
        yb: Some(yb),
        zb,
    })
}

fn extend_side(
    side: &mut SideFactors,
    a_comps: &[&SparseMatrix],
    b_comps: &[&SparseMatrix],
    basis: &ReducedBasis,
    gram: &GramNorm,
    old_n: usize,
) -> Result<(), ResidualError> {
    let new_n = basis.dim();
    let d_new = new_n - old_n;
    let v_new = basis.v.get(.., old_n..new_n).cloned();

    let ya = side
        .ya
        .as_mut()
        .ok_or_else(|| ResidualError::Dimension("missing extension cache".into()))?;
    for (y, m) in ya.iter_mut().zip(a_comps) {
        *y = hstack(y, &m.matmul(&v_new));
    }
    let yb = side
        .yb
        .as_mut()
        .ok_or_else(|| ResidualError::Dimension("missing extension cache".into()))?;
    for (y, m) in yb.iter_mut().zip(b_comps) {
        *y = hstack(y, &m.matmul(&v_new));
    }
    if !gram.is_identity() {
        let za = side.za.as_mut().expect("mass Gram stores z caches");
        for (z, m) in za.iter_mut().zip(a_comps) {
            *z = hstack(z, &apply_gram_inverse(gram, &m.matmul(&v_new)));
        }
        let zb = side.zb.as_mut().expect("mass Gram stores z caches");
        for (z, m) in zb.iter_mut().zip(b_comps) {
            *z = hstack(z, &apply_gram_inverse(gram, &m.matmul(&v_new)));
        }
    }

    let ya = side.ya.as_ref().unwrap();
    let yb = side.yb.as_ref().unwrap();
    let za_ref: &[Mat<f64>] = side.za.as_deref().unwrap_or(ya);
    let zb_ref: &[Mat<f64>] = side.zb.as_deref().unwrap_or(yb);

    let extend_block = |block: &Mat<f64>, y: &Mat<f64>, z: &Mat<f64>| -> Mat<f64> {
        let mut out = Mat::zeros(new_n, new_n);
        for i in 0..old_n {
            for j in 0..old_n {
                out[(i, j)] = block[(i, j)];
            }
        }
        let right = y.get(.., 0..old_n).transpose() * z.get(.., old_n..new_n);
        let bottom = y.get(.., old_n..new_n).transpose() * z;
        for i in 0..old_n {
            for j in 0..d_new {
                out[(i, old_n + j)] = right[(i, j)];
            }
        }
        for i in 0..d_new {
            for j in 0..new_n {
                out[(old_n + i, j)] = bottom[(i, j)];
            }
        }
        out
    };

    let mut idx = 0usize;
    for b in 0..side.n_a {
        for a in 0..=b {
            side.d[idx] = extend_block(&side.d[idx], &ya[a], &za_ref[b]);
            idx += 1;
        }
    }
    for a in 0..side.n_a {
        for b in 0..side.n_b {
            let k = a * side.n_b + b;
            side.e[k] = extend_block(&side.e[k], &ya[a], &zb_ref[b]);
        }
    }
    let mut idx = 0usize;
    for b in 0..side.n_b {
        for a in 0..=b {
            side.f[idx] = extend_block(&side.f[idx], &yb[a], &zb_ref[b]);
            idx += 1;
        }
    }
    Ok(())
}

fn hstack(left: &Mat<f64>, right: &Mat<f64>) -> Mat<f64> {
    let (n, c1) = (left.nrows(), left.ncols());
    let c2 = right.ncols();
    Mat::from_fn(n, c1 + c2, |i, j| {
        if j < c1 {
            left[(i, j)]
        } else {
            right[(i, j - c1)]
        }
    })
}

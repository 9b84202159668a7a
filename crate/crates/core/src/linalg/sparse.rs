//! Compressed sparse matrices and the (counted) sparse LU used by every
//! high-fidelity solve.

use std::sync::atomic::{AtomicU64, Ordering};

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Mat};

use super::LinalgError;

/// Process-wide count of sparse LU/Cholesky factorizations. The online path
/// must leave this untouched; tests assert on deltas.
static FACTORIZATIONS: AtomicU64 = AtomicU64::new(0);

pub fn factorization_count() -> u64 {
    FACTORIZATIONS.load(Ordering::Relaxed)
}

fn bump_factorizations() {
    FACTORIZATIONS.fetch_add(1, Ordering::Relaxed);
}

/// Real sparse matrix in compressed-column storage. Duplicate `(row, col)`
/// triplets are summed during assembly, so the finalized matrix holds one
/// entry per position.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        for &(r, c, _) in entries {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::Dimension(format!(
                    "triplet ({r}, {c}) out of range for {nrows}x{ncols}"
                )));
            }
        }
        let trips: Vec<Triplet<usize, usize, f64>> = entries
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let inner = SparseColMat::try_new_from_triplets(nrows, ncols, &trips)
            .map_err(|e| LinalgError::Dimension(format!("sparse assembly failed: {e:?}")))?;
        Ok(Self { inner })
    }

    pub fn identity(n: usize) -> Self {
        let trips: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &trips).expect("identity pattern is valid")
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.inner.compute_nnz()
    }

    pub fn inner(&self) -> &SparseColMat<usize, f64> {
        &self.inner
    }

    /// Entries as `(row, col, value)` triplets in column-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let sym = self.inner.symbolic();
        let vals = self.inner.val();
        let mut out = Vec::with_capacity(vals.len());
        let mut k = 0usize;
        for j in 0..self.ncols() {
            for &i in sym.row_idx_of_col_raw(j) {
                out.push((i, j, vals[k]));
                k += 1;
            }
        }
        out
    }

    pub fn matvec(&self, x: &Col<f64>) -> Col<f64> {
        &self.inner * x
    }

    pub fn matvec_transpose(&self, x: &Col<f64>) -> Col<f64> {
        self.inner.transpose() * x
    }

    /// `Y = A * X` for a dense block of right-hand sides.
    pub fn matmul(&self, x: &Mat<f64>) -> Mat<f64> {
        &self.inner * x
    }

    pub fn matmul_transpose(&self, x: &Mat<f64>) -> Mat<f64> {
        self.inner.transpose() * x
    }

    pub fn transposed(&self) -> Self {
        Self {
            inner: self
                .inner
                .transpose()
                .to_col_major()
                .expect("transpose allocation"),
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut out = Mat::zeros(self.nrows(), self.ncols());
        for (i, j, v) in self.triplets() {
            out[(i, j)] += v;
        }
        out
    }

    /// True when both matrices share an identical sparsity pattern, which is
    /// the precondition for value-level linear combinations.
    pub fn same_pattern(&self, other: &Self) -> bool {
        if self.nrows() != other.nrows() || self.ncols() != other.ncols() {
            return false;
        }
        let (a, b) = (self.inner.symbolic(), other.inner.symbolic());
        if a.col_ptr() != b.col_ptr() {
            return false;
        }
        a.row_idx() == b.row_idx()
    }

    /// Forms `sum coef_i * M_i` over matrices sharing one sparsity pattern.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<Self, LinalgError> {
        let first = terms
            .first()
            .ok_or_else(|| LinalgError::Dimension("empty linear combination".into()))?
            .1;
        let mut vals = vec![0.0f64; first.inner.val().len()];
        for &(coef, m) in terms {
            if !m.same_pattern(first) {
                return Err(LinalgError::Dimension(
                    "linear combination over mismatched sparsity patterns".into(),
                ));
            }
            for (dst, src) in vals.iter_mut().zip(m.inner.val()) {
                *dst += coef * src;
            }
        }
        Ok(Self {
            inner: SparseColMat::new(first.inner.symbolic().to_owned().unwrap(), vals),
        })
    }

    /// Sparse LU with partial pivoting; the factorization is counted so that
    /// online-purity checks can assert no high-fidelity solve happened.
    pub fn lu(&self) -> Result<SparseLu, LinalgError> {
        if self.nrows() != self.ncols() {
            return Err(LinalgError::Dimension(format!(
                "LU requires a square matrix, got {}x{}",
                self.nrows(),
                self.ncols()
            )));
        }
        bump_factorizations();
        let lu = self
            .inner
            .sp_lu()
            .map_err(|e| LinalgError::FactorizationFailed(format!("{e:?}")))?;
        Ok(SparseLu { lu })
    }

    /// Sparse Cholesky for SPD Gram matrices (counted like LU).
    pub fn cholesky(&self) -> Result<SparseCholesky, LinalgError> {
        bump_factorizations();
        let llt = self
            .inner
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| LinalgError::FactorizationFailed(format!("{e:?}")))?;
        Ok(SparseCholesky { llt })
    }
}

pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn solve(&self, rhs: &Col<f64>) -> Col<f64> {
        self.lu.solve(rhs)
    }

    pub fn solve_transpose(&self, rhs: &Col<f64>) -> Col<f64> {
        self.lu.solve_transpose(rhs)
    }

    pub fn solve_mat(&self, rhs: &Mat<f64>) -> Mat<f64> {
        self.lu.solve(rhs)
    }
}

pub struct SparseCholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn solve(&self, rhs: &Col<f64>) -> Col<f64> {
        self.llt.solve(rhs)
    }

    pub fn solve_mat(&self, rhs: &Mat<f64>) -> Mat<f64> {
        self.llt.solve(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SparseMatrix {
        SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 5.0), (2, 2, 1.0), (0, 1, 1.0)])
            .unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.5), (1, 1, 1.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense()[(0, 0)], 3.5);
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        let err = SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]);
        assert!(matches!(err, Err(LinalgError::Dimension(_))));
    }

    #[test]
    fn lu_solves_and_counts() {
        let m = small();
        let before = factorization_count();
        let lu = m.lu().unwrap();
        assert_eq!(factorization_count(), before + 1);
        let b = Col::from_fn(3, |i| i as f64 + 1.0);
        let x = lu.solve(&b);
        let r = &m.matvec(&x) - &b;
        assert!(r.norm_l2() < 1e-12);
        let xt = lu.solve_transpose(&b);
        let rt = &m.matvec_transpose(&xt) - &b;
        assert!(rt.norm_l2() < 1e-12);
    }

    #[test]
    fn singular_matrix_fails_to_factorize() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        assert!(m.lu().is_err());
    }

    #[test]
    fn linear_combination_on_shared_pattern() {
        let pattern = [(0usize, 0usize), (1, 1), (0, 1)];
        let a = SparseMatrix::from_triplets(
            2,
            2,
            &pattern.iter().map(|&(r, c)| (r, c, 1.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let b = SparseMatrix::from_triplets(
            2,
            2,
            &pattern.iter().map(|&(r, c)| (r, c, 2.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let combo = SparseMatrix::linear_combination(&[(2.0, &a), (-1.0, &b)]).unwrap();
        assert_eq!(combo.to_dense()[(0, 1)], 0.0);
        assert_eq!(combo.to_dense()[(0, 0)], 0.0);
        let mismatched = SparseMatrix::identity(2);
        assert!(SparseMatrix::linear_combination(&[(1.0, &a), (1.0, &mismatched)]).is_err());
    }
}

//! Self-contained sparse linear algebra: CSR storage, preconditioned
//! conjugate gradients, a banded Cholesky factorization for desk-scale
//! systems, and a deflated shift-invert eigensolver for the smallest
//! generalized eigenpairs.

mod cg;
mod cholesky;
mod eigen;

pub use cg::{cg_solve, CgReport, Preconditioner};
pub use cholesky::{cholesky_solve, BandCholesky};
pub use eigen::{smallest_generalized_eigs, EigResult};

use crate::par;
use crate::{Error, Result};

/// Sparse matrix in compressed-row form. Column indices are strictly
/// ascending within each row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Dense constructor used by small tests and the dense fallbacks.
    pub fn from_dense(rows: &[Vec<f64>]) -> CsrMatrix {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in rows {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// `y = A x`; rows are computed independently (parallel when enabled).
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        par::fill_indexed(y, |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .map(|(&j, &v)| v * x[j])
                .sum::<f64>()
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A x` for square `A`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(&self.mul_vec(x), x)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.binary_search(&i).map(|k| vals[k]).unwrap_or(0.0)
            })
            .collect()
    }

    /// Maximum absolute deviation from symmetry.
    pub fn max_asymmetry(&self) -> f64 {
        let mut max = 0.0_f64;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (jcols, jvals) = self.row(j);
                let vt = jcols.binary_search(&i).map(|k| jvals[k]).unwrap_or(0.0);
                max = max.max((v - vt).abs());
            }
        }
        max
    }

    /// `alpha * self + beta * other`; the two matrices must share their
    /// sparsity pattern (as produced by the same [`CsrBuilder`] pattern).
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Result<CsrMatrix> {
        if self.n_rows != other.n_rows
            || self.n_cols != other.n_cols
            || self.row_offsets != other.row_offsets
            || self.col_indices != other.col_indices
        {
            return Err(Error::ShapeMismatch(
                "add_scaled requires identical sparsity patterns".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values,
        })
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols];
        for &j in &self.col_indices {
            counts[j] += 1;
        }
        let mut row_offsets = vec![0usize; self.n_cols + 1];
        for j in 0..self.n_cols {
            row_offsets[j + 1] = row_offsets[j] + counts[j];
        }
        let mut pos = row_offsets.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_indices[pos[j]] = i;
                values[pos[j]] = v;
                pos[j] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Extracts the submatrix with the given (ascending) row and column
    /// index sets; `col_of` must map global to new column index.
    pub fn restrict(&self, rows: &[usize], col_of: &[Option<usize>], n_cols: usize) -> CsrMatrix {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for &i in rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if let Some(jj) = col_of[j] {
                    col_indices.push(jj);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i][j] = v;
            }
        }
        out
    }
}

/// Assembles 2x2 symmetric block systems `[[A, B], [B^T, C]]` into one CSR.
pub fn assemble_symmetric_blocks(a: &CsrMatrix, b: &CsrMatrix, c: &CsrMatrix) -> Result<CsrMatrix> {
    if a.n_rows != a.n_cols || c.n_rows != c.n_cols || b.n_rows != a.n_rows || b.n_cols != c.n_rows
    {
        return Err(Error::ShapeMismatch("block dimensions do not match".into()));
    }
    let n0 = a.n_rows;
    let n = n0 + c.n_rows;
    let bt = b.transpose();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);
    for i in 0..n0 {
        let (cols, vals) = a.row(i);
        col_indices.extend_from_slice(cols);
        values.extend_from_slice(vals);
        let (cols, vals) = b.row(i);
        col_indices.extend(cols.iter().map(|&j| j + n0));
        values.extend_from_slice(vals);
        row_offsets.push(col_indices.len());
    }
    for i in 0..c.n_rows {
        let (cols, vals) = bt.row(i);
        col_indices.extend_from_slice(cols);
        values.extend_from_slice(vals);
        let (cols, vals) = c.row(i);
        col_indices.extend(cols.iter().map(|&j| j + n0));
        values.extend_from_slice(vals);
        row_offsets.push(col_indices.len());
    }
    Ok(CsrMatrix {
        n_rows: n,
        n_cols: n,
        row_offsets,
        col_indices,
        values,
    })
}

/// Two-pass assembly helper: the sparsity pattern is fixed up front from the
/// per-element footprints, and `add` scatters into it.
pub struct CsrBuilder {
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrBuilder {
    /// Builds the pattern from element DOF lists: every pair of DOFs
    /// appearing in one element couples.
    pub fn from_elements<I>(n_rows: usize, n_cols: usize, elements: I) -> CsrBuilder
    where
        I: Iterator<Item = Vec<usize>> + Clone,
    {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
        for dofs in elements {
            for &i in &dofs {
                adjacency[i].extend_from_slice(&dofs);
            }
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
            col_indices.extend_from_slice(adj);
            row_offsets.push(col_indices.len());
        }
        let values = vec![0.0; col_indices.len()];
        CsrBuilder {
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Builds the pattern from explicit per-row column lists (rectangular
    /// coupling blocks).
    pub fn from_rows(n_rows: usize, n_cols: usize, mut rows: Vec<Vec<usize>>) -> CsrBuilder {
        assert_eq!(rows.len(), n_rows);
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for adj in &mut rows {
            adj.sort_unstable();
            adj.dedup();
            col_indices.extend_from_slice(adj);
            row_offsets.push(col_indices.len());
        }
        let values = vec![0.0; col_indices.len()];
        CsrBuilder {
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        let cols = &self.col_indices[span.clone()];
        let k = cols
            .binary_search(&j)
            .expect("entry outside the precomputed sparsity pattern");
        self.values[span.start + k] += v;
    }

    pub fn finish(self) -> CsrMatrix {
        CsrMatrix {
            n_rows: self.row_offsets.len() - 1,
            n_cols: self.n_cols,
            row_offsets: self.row_offsets,
            col_indices: self.col_indices,
            values: self.values,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).max(0.0).sqrt()
}

/// SPD solver chosen by problem size: banded Cholesky while the band fits,
/// conjugate gradients beyond.
pub enum SpdSolver {
    Band(BandCholesky),
    Cg { a: CsrMatrix, tol: f64 },
}

/// Band storage cap (entries) before falling back to CG.
const BAND_ENTRY_CAP: usize = 40_000_000;

impl SpdSolver {
    pub fn new(a: &CsrMatrix) -> Result<SpdSolver> {
        let bw = cholesky::bandwidth(a);
        if a.n_rows() * (bw + 1) <= BAND_ENTRY_CAP {
            Ok(SpdSolver::Band(BandCholesky::factor(a)?))
        } else {
            Ok(SpdSolver::Cg {
                a: a.clone(),
                tol: 1e-12,
            })
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Band(chol) => Ok(chol.solve(b)),
            SpdSolver::Cg { a, tol } => {
                let (x, _) = cg_solve(a, b, *tol, 20 * a.n_rows() + 100, Preconditioner::Jacobi)?;
                Ok(x)
            }
        }
    }
}

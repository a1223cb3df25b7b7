//! Compressed sparse row matrices and the handful of products the GCN needs.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major compressed sparse matrix. Column indices within a row are
/// strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    /// Builds from unordered `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, T)>,
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= n_rows || *c >= n_cols) {
            return Err(Error::Shape(format!(
                "entry ({r}, {c}) outside {n_rows}x{n_cols}"
            )));
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(dense: ArrayView2<'_, T>) -> Self {
        let (n_rows, n_cols) = dense.dim();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in dense.rows() {
            for (c, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    /// Same sparsity pattern, new values (one per stored entry).
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Shape(format!(
                "{} values for {} stored entries",
                values.len(),
                self.values.len()
            )));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    pub fn map_rows(&self, mut f: impl FnMut(usize, &mut [T])) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            f(r, &mut out.values[span]);
        }
        out
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[[r, c]] += v;
            }
        }
        out
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &ArrayView2<'_, T>) -> Result<Array2<T>> {
        if rhs.nrows() != self.n_cols {
            return Err(Error::Shape(format!(
                "({}x{}) · ({}x{})",
                self.n_rows,
                self.n_cols,
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let mut out = Array2::zeros((self.n_rows, rhs.ncols()));
        for (r, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for (c, v) in self.row(r) {
                out_row.scaled_add(v, &rhs.row(c));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &ArrayView2<'_, T>) -> Result<Array2<T>> {
        if rhs.nrows() != self.n_rows {
            return Err(Error::Shape(format!(
                "({}x{})ᵀ · ({}x{})",
                self.n_rows,
                self.n_cols,
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let mut out = Array2::zeros((self.n_cols, rhs.ncols()));
        for r in 0..self.n_rows {
            let rhs_row = rhs.row(r);
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &rhs_row);
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }
}

use crate::error::{Error, Result};
use crate::linalg::dense::{axpy_slice, DenseMatrix};

/// Coordinate-format sparse matrix with entries sorted by `(row, col)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Sorts the triplets into canonical order and validates them. Explicit
    /// zeros are dropped; duplicates, out-of-range indices and non-finite
    /// values are rejected.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!("degenerate shape {rows}x{cols}")));
        }
        entries.retain(|e| e.2 != 0.0);
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::dim(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("sparse entry ({i}, {j})")));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::Format(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect()).expect("identity is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            d[(i, j)] = v;
        }
        d
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for &(_, j, v) in &self.entries {
            sums[j] += v;
        }
        sums
    }

    /// Applies a row relabelling: entry `(i, j)` moves to `(map[i], j)`.
    pub fn permute_rows(&self, map: &[usize]) -> Result<Self> {
        if map.len() != self.rows {
            return Err(Error::dim("row permutation length"));
        }
        Self::from_triplets(
            self.rows,
            self.cols,
            self.entries
                .iter()
                .map(|&(i, j, v)| (map[i], j, v))
                .collect(),
        )
    }
}

/// `x · g` for dense `x` and sparse `g`.
pub fn sparse_apply_right(x: &DenseMatrix, g: &SparseMatrix) -> Result<DenseMatrix> {
    if x.cols() != g.rows {
        return Err(Error::dim(format!(
            "{}x{} times sparse {}x{}",
            x.rows(),
            x.cols(),
            g.rows,
            g.cols
        )));
    }
    let mut out = DenseMatrix::zeros(x.rows(), g.cols);
    for &(i, j, v) in &g.entries {
        axpy_slice(v, x.col(i), out.col_mut(j));
    }
    Ok(out)
}

/// `x · gᵀ` for dense `x` and sparse `g`.
pub fn sparse_apply_right_t(x: &DenseMatrix, g: &SparseMatrix) -> Result<DenseMatrix> {
    if x.cols() != g.cols {
        return Err(Error::dim(format!(
            "{}x{} times (sparse {}x{})ᵀ",
            x.rows(),
            x.cols(),
            g.rows,
            g.cols
        )));
    }
    let mut out = DenseMatrix::zeros(x.rows(), g.rows);
    for &(i, j, v) in &g.entries {
        axpy_slice(v, x.col(j), out.col_mut(i));
    }
    Ok(out)
}

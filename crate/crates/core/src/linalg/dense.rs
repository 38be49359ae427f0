use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Real matrix stored column-major, so each column (a pixel spectrum in the
/// spectral-spatial layout) is a contiguous slice.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!("degenerate shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {})",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::dim("ragged rows"));
        }
        let mut data = vec![0.0; nrows * ncols];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[j * nrows + i] = v;
            }
        }
        Self::from_col_major(nrows, ncols, data)
    }

    /// # Panics
    ///
    /// Panics on a zero dimension.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "degenerate shape {rows}x{cols}");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[j * rows + i] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)]).collect())
            .collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.data[i * self.cols + j] = self.data[j * self.rows + i];
            }
        }
        t
    }

    /// Copies columns `range` into a new matrix.
    pub fn col_block(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.cols && range.start < range.end);
        Self {
            rows: self.rows,
            cols: range.len(),
            data: self.data[range.start * self.rows..range.end * self.rows].to_vec(),
        }
    }

    pub fn col_block_slice(&self, range: Range<usize>) -> &[f64] {
        &self.data[range.start * self.rows..range.end * self.rows]
    }

    pub fn col_block_slice_mut(&mut self, range: Range<usize>) -> &mut [f64] {
        &mut self.data[range.start * self.rows..range.end * self.rows]
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::dim(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        gemm_into(self, rhs.as_slice(), rhs.cols, out.as_mut_slice());
        Ok(out)
    }

    /// `selfᵀ · rhs`.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::dim(format!(
                "({}x{})ᵀ times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.cols, rhs.cols);
        for j in 0..rhs.cols {
            let b = rhs.col(j);
            for i in 0..self.cols {
                out.data[j * self.cols + i] = dot(self.col(i), b);
            }
        }
        Ok(out)
    }

    /// `self · selfᵀ`, exactly symmetric.
    pub fn gram(&self) -> DenseMatrix {
        gram_of_cols(self.rows, &self.data)
    }

    /// `selfᵀ · self`, exactly symmetric.
    pub fn gram_t(&self) -> DenseMatrix {
        let n = self.cols;
        let mut out = Self::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = dot(self.col(i), self.col(j));
                out.data[j * n + i] = v;
                out.data[i * n + j] = v;
            }
        }
        out
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(rhs)?;
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        Ok(out)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(rhs)?;
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        Ok(out)
    }

    /// `self += alpha · rhs`.
    ///
    /// # Panics
    ///
    /// Panics on shape mismatch.
    pub fn axpy(&mut self, alpha: f64, rhs: &DenseMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute deviation `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for j in 0..self.cols {
            for i in 0..j {
                dev = dev.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        dev
    }

    /// Replaces the matrix with `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (self.data[j * n + i] + self.data[i * n + j]);
                self.data[j * n + i] = v;
                self.data[i * n + j] = v;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        DenseMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    pub(crate) fn check_same_shape(&self, rhs: &DenseMatrix) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::dim(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} ", self.rows, self.cols)?;
        if self.rows * self.cols <= 64 {
            f.debug_list().entries(self.to_rows()).finish()
        } else {
            write!(f, "[..]")
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy_slice(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out += a · B` where `B` is column-major with `a.cols()` rows and `ncols`
/// columns.
pub(crate) fn gemm_into(a: &DenseMatrix, b: &[f64], ncols: usize, out: &mut [f64]) {
    let (m, k) = a.shape();
    debug_assert_eq!(b.len(), k * ncols);
    debug_assert_eq!(out.len(), m * ncols);
    for j in 0..ncols {
        let bj = &b[j * k..(j + 1) * k];
        let oj = &mut out[j * m..(j + 1) * m];
        for (p, &bpj) in bj.iter().enumerate() {
            if bpj != 0.0 {
                axpy_slice(bpj, a.col(p), oj);
            }
        }
    }
}

/// Gram matrix `X Xᵀ` of a column-major block with `rows` rows.
pub(crate) fn gram_of_cols(rows: usize, data: &[f64]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(rows, rows);
    for col in data.chunks_exact(rows) {
        for j in 0..rows {
            let cj = col[j];
            if cj == 0.0 {
                continue;
            }
            let oj = &mut out.data[j * rows..j * rows + j + 1];
            for (o, &ci) in oj.iter_mut().zip(&col[..=j]) {
                *o += ci * cj;
            }
        }
    }
    for j in 0..rows {
        for i in 0..j {
            out.data[i * rows + j] = out.data[j * rows + i];
        }
    }
    out
}

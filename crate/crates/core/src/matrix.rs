//! Dense row-major matrices.
//!
//! [`Matrix`] holds any finite real values (gradients, residuals);
//! [`NonnegMatrix`] wraps a matrix whose entries are all finite and `>= 0`
//! and is what the solvers accept and return.

use std::fmt::Write as _;
use std::ops::Deref;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Products with at least this many multiply-adds are split across rows on
/// the rayon pool. Row splitting keeps the per-entry summation order fixed.
const PAR_THRESHOLD: usize = 1 << 18;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Signed matrix. Same type as [`Matrix`]; the alias names intent.
pub type RealMatrix = Matrix;

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dim(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dim(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Matrix whose single column is `v`.
    pub fn column_vector(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_nonneg(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dim(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, inner) = (other.cols, self.cols);
        let mut out = Matrix::zeros(self.rows, n);
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a = self.row(i);
            for (k, &aik) in a.iter().enumerate() {
                let b = other.row(k);
                for (o, &bkj) in out_row.iter_mut().zip(b) {
                    *o += aik * bkj;
                }
            }
        };
        if self.rows * n * inner >= PAR_THRESHOLD && n > 0 {
            out.data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else if n > 0 {
            out.data.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Dim(format!(
                "t_matmul {}x{} (transposed) by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let n = other.cols;
        let mut out = Matrix::zeros(self.cols, n);
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for k in 0..self.rows {
                let aki = self.get(k, i);
                for (o, &bkj) in out_row.iter_mut().zip(other.row(k)) {
                    *o += aki * bkj;
                }
            }
        };
        if self.rows * n * self.cols >= PAR_THRESHOLD && n > 0 {
            out.data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else if n > 0 {
            out.data.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `self * otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Dim(format!(
                "matmul_t {}x{} by {}x{} (transposed)",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let n = other.rows;
        let mut out = Matrix::zeros(self.rows, n);
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a = self.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        };
        if self.rows * n * self.cols >= PAR_THRESHOLD && n > 0 {
            out.data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else if n > 0 {
            out.data.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::Dim(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Sum of squared entries.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_col(&self, r: usize) -> Result<()> {
        if r >= self.cols {
            Err(Error::Index {
                index: r,
                len: self.cols,
            })
        } else {
            Ok(())
        }
    }

    pub fn column(&self, r: usize) -> Result<Vec<f64>> {
        self.check_col(r)?;
        Ok((0..self.rows).map(|i| self.get(i, r)).collect())
    }

    pub fn set_column(&mut self, r: usize, v: &[f64]) -> Result<()> {
        self.check_col(r)?;
        if v.len() != self.rows {
            return Err(Error::Dim(format!(
                "column of length {} for {} rows",
                v.len(),
                self.rows
            )));
        }
        for (i, &x) in v.iter().enumerate() {
            self.set(i, r, x);
        }
        Ok(())
    }

    /// Copy of the matrix with column `r` removed; remaining columns keep
    /// their order. Dropping the only column leaves a `rows x 0` matrix.
    pub fn drop_column(&self, r: usize) -> Result<Matrix> {
        self.check_col(r)?;
        let cols = self.cols - 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend_from_slice(&row[..r]);
            data.extend_from_slice(&row[r + 1..]);
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Inverse of [`Matrix::drop_column`]: inserts `v` so it becomes column `r`.
    pub fn insert_column(&self, r: usize, v: &[f64]) -> Result<Matrix> {
        if r > self.cols {
            return Err(Error::Index {
                index: r,
                len: self.cols + 1,
            });
        }
        if v.len() != self.rows {
            return Err(Error::Dim(format!(
                "column of length {} for {} rows",
                v.len(),
                self.rows
            )));
        }
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend_from_slice(&row[..r]);
            data.push(v[i]);
            data.extend_from_slice(&row[r..]);
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sq.iter_mut().zip(self.row(i)) {
                *s += v * v;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Scales column `j` by `factors[j]`.
    pub fn scale_columns(&mut self, factors: &[f64]) {
        assert_eq!(factors.len(), self.cols);
        for i in 0..self.rows {
            for (v, f) in self.row_mut(i).iter_mut().zip(factors) {
                *v *= f;
            }
        }
    }

    /// Scales row `i` by `factors[i]`.
    pub fn scale_rows(&mut self, factors: &[f64]) {
        assert_eq!(factors.len(), self.rows);
        for (i, f) in factors.iter().enumerate() {
            for v in self.row_mut(i) {
                *v *= f;
            }
        }
    }

    /// Copy with every nonzero column scaled to unit Euclidean norm.
    pub fn normalize_columns(&self) -> Matrix {
        let inv: Vec<f64> = self
            .column_norms()
            .into_iter()
            .map(|n| if n > 0.0 { 1.0 / n } else { 1.0 })
            .collect();
        let mut m = self.clone();
        m.scale_columns(&inv);
        m
    }

    /// Sum of the off-diagonal entries of `selfᵀ self`, i.e.
    /// `Σ_r Σ_{j≠r} h_rᵀ h_j`.
    pub fn offdiag_gram_sum(&self) -> f64 {
        // ‖H 1‖² counts every pair including r = j; subtract the diagonal.
        let mut total = 0.0;
        for i in 0..self.rows {
            let row = self.row(i);
            let s: f64 = row.iter().sum();
            let d: f64 = row.iter().map(|v| v * v).sum();
            total += s * s - d;
        }
        total
    }

    /// Renders the matrix in the plain text interchange format: a
    /// `rows cols` header line followed by one space-separated line per row.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.data.len() * 24 + 16);
        let _ = writeln!(s, "{} {}", self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    s.push(' ');
                }
                // Shortest representation that parses back to the same bits.
                let _ = write!(s, "{v:e}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the text interchange format. Errors carry a plain message; the
    /// file-level loader attaches the path.
    pub fn parse_text(text: &str) -> std::result::Result<Matrix, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty input")?;
        let mut dims = header.split_whitespace();
        let parse_dim = |t: Option<&str>| -> std::result::Result<usize, String> {
            t.ok_or_else(|| "header must be `rows cols`".to_string())?
                .parse::<usize>()
                .map_err(|e| format!("bad header: {e}"))
        };
        let rows = parse_dim(dims.next())?;
        let cols = parse_dim(dims.next())?;
        if dims.next().is_some() {
            return Err("header must be `rows cols`".into());
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| format!("expected {rows} rows, found {i}"))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| format!("row {i}: cannot parse `{tok}`"))?;
                if !v.is_finite() {
                    return Err(format!("row {i}: non-finite value `{tok}`"));
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(format!(
                    "row {i} has {} values, expected {cols}",
                    data.len() - before
                ));
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(format!("trailing content after {rows} rows"));
        }
        Ok(Matrix { rows, cols, data })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Matrix whose entries are all finite and nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct NonnegMatrix(Matrix);

impl NonnegMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        if let Some(pos) = m.data.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative entry {} at ({}, {})",
                m.data[pos],
                pos / m.cols.max(1),
                pos % m.cols.max(1)
            )));
        }
        Ok(NonnegMatrix(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        NonnegMatrix(Matrix::zeros(rows, cols))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        NonnegMatrix::new(Matrix::from_rows(rows)?)
    }

    /// Wraps without checking. Callers guarantee nonnegativity.
    pub(crate) fn from_matrix_unchecked(m: Matrix) -> Self {
        debug_assert!(m.is_nonneg() && m.is_finite());
        NonnegMatrix(m)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Mutable access for in-place solver updates. Callers must keep every
    /// entry finite and nonnegative.
    pub(crate) fn inner_mut(&mut self) -> &mut Matrix {
        &mut self.0
    }
}

impl Deref for NonnegMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl From<NonnegMatrix> for Matrix {
    fn from(m: NonnegMatrix) -> Matrix {
        m.0
    }
}

impl TryFrom<Matrix> for NonnegMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        NonnegMatrix::new(m)
    }
}

/// Elementwise `max(m, 0)`.
pub fn project_nonneg(m: &Matrix) -> Result<NonnegMatrix> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("cannot project non-finite matrix".into()));
    }
    Ok(NonnegMatrix(m.map(|v| v.max(0.0))))
}

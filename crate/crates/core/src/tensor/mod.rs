//! Dense row-major `f64` matrices and a define-by-run gradient tape.
//!
//! [`Tensor`] is a plain value type; differentiation happens on a [`Tape`],
//! which records every operation of one forward pass and replays it in
//! reverse to accumulate gradients.

mod pool;
mod tape;

pub use tape::{Gradients, PoolMode, Tape, Var};
pub(crate) use tape::log_sum_exp;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense `rows × cols` matrix of 64-bit floats stored row-major.
#[derive(PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for Tensor {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        Tensor::from_vec(raw.rows, raw.cols, raw.data)
    }
}

impl Clone for Tensor {
    fn clone(&self) -> Self {
        let mut data = pool::take(self.data.len());
        data.extend_from_slice(&self.data);
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

impl Drop for Tensor {
    fn drop(&mut self) {
        pool::give(std::mem::take(&mut self.data));
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Tensor {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        let mut data = pool::take(rows * cols);
        data.resize(rows * cols, value);
        Tensor { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Domain(format!(
                "tensor data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Tensor { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    ///
    /// Panics on ragged input; meant for literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows in Tensor::from_rows");
            data.extend_from_slice(r);
        }
        Tensor {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Tensor {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = pool::take(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor { rows, cols, data }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&Tensor]) -> Result<Self> {
        let cols = parts.first().map_or(0, |t| t.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(Error::shape("vstack", (rows, cols), p.shape()));
            }
            data.extend_from_slice(&p.data);
            rows += p.rows;
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(mut self) -> Vec<f64> {
        std::mem::take(&mut self.data)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Copies rows `start..start + count` into a new matrix.
    pub fn slice_rows(&self, start: usize, count: usize) -> Tensor {
        Tensor {
            rows: count,
            cols: self.cols,
            data: self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        }
    }

    pub fn transpose(&self) -> Tensor {
        Tensor::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::shape("matmul", self.shape(), other.shape()));
        }
        let mut out = Tensor::zeros(self.rows, other.cols);
        gemm(self.view(), other.view(), &mut out.data, false);
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows != other.rows {
            return Err(Error::shape("t_matmul", self.shape(), other.shape()));
        }
        let mut out = Tensor::zeros(self.cols, other.cols);
        gemm(self.view().t(), other.view(), &mut out.data, false);
        Ok(out)
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.cols {
            return Err(Error::shape("matmul_t", self.shape(), other.shape()));
        }
        let mut out = Tensor::zeros(self.rows, other.rows);
        gemm(self.view(), other.view().t(), &mut out.data, false);
        Ok(out)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    fn zip_with(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::shape(op, self.shape(), other.shape()));
        }
        let mut data = pool::take(self.data.len());
        data.extend(self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)));
        Ok(Tensor {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let mut data = pool::take(self.data.len());
        data.extend(self.data.iter().map(|&v| f(v)));
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `1 × cols` row of column totals.
    pub fn column_sums(&self) -> Tensor {
        let mut out = Tensor::zeros(1, self.cols);
        for r in 0..self.rows {
            for (acc, v) in out.data.iter_mut().zip(self.row(r)) {
                *acc += v;
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute elementwise difference; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.max_abs_diff(&self.transpose()) <= tol
    }

    pub(crate) fn view(&self) -> MatView<'_> {
        MatView {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            rs: self.cols as isize,
            cs: 1,
        }
    }
}

/// Strided read-only view used to feed the GEMM kernel.
#[derive(Clone, Copy)]
pub(crate) struct MatView<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> MatView<'a> {
    pub(crate) fn rows_of(t: &'a Tensor, start: usize, count: usize) -> Self {
        MatView {
            data: &t.data[start * t.cols..(start + count) * t.cols],
            rows: count,
            cols: t.cols,
            rs: t.cols as isize,
            cs: 1,
        }
    }

    pub(crate) fn t(self) -> Self {
        MatView {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }
}

/// `out (+)= a · b` for a row-major contiguous `out`.
pub(crate) fn gemm(a: MatView<'_>, b: MatView<'_>, out: &mut [f64], accumulate: bool) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!(out.len(), a.rows * b.cols, "gemm output length");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    if k == 0 {
        if !accumulate {
            out.fill(0.0);
        }
        return;
    }
    // SAFETY: the views were built from slices covering every strided index
    // in `0..rows × 0..cols`, and `out` holds exactly `m * n` elements.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

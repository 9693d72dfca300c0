//! Row-major dense matrices and the handful of kernels the network needs.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // `max(1)` keeps `chunks_exact` happy for zero-column matrices.
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Appends one column holding `values[r]` in row `r`.
    pub fn with_column(&self, values: &[f64]) -> Matrix {
        assert_eq!(values.len(), self.rows);
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for (r, &v) in values.iter().enumerate() {
            data.extend_from_slice(self.row(r));
            data.push(v);
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }
}

/// Operand view for [`gemm`]: a row-major buffer, optionally transposed.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    transposed: bool,
}

impl<'a> View<'a> {
    pub(crate) fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    pub(crate) fn t(self) -> Self {
        Self {
            transposed: !self.transposed,
            ..self
        }
    }

    fn shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `out = a * b + beta * out` where `out` is row-major `m x n`.
pub(crate) fn gemm(a: View<'_>, b: View<'_>, beta: f64, out: &mut [f64]) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(out.len(), m * n, "output has wrong size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the asserts above pin every operand to the exact extent that
    // the strides address, and `out` does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                out.row_mut(i)[j] = (0..a.cols()).map(|k| a.row(i)[k] * b.row(k)[j]).sum();
            }
        }
        out
    }

    #[test]
    fn gemm_matches_naive_product_with_transposes() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let b = Matrix::from_rows(&[[1.0, -1.0], [0.5, 2.0], [3.0, 0.0]]);
        let mut out = vec![0.0; 4];
        gemm(View::new(a.as_slice(), 2, 3), View::new(b.as_slice(), 3, 2), 0.0, &mut out);
        assert_eq!(out, naive(&a, &b).as_slice());

        // (b^T)^T * (a^T)^T == b * a  (3x2 * 2x3)
        let mut out = vec![1.0; 9];
        gemm(
            View::new(b.as_slice(), 3, 2),
            View::new(a.as_slice(), 2, 3),
            1.0,
            &mut out,
        );
        let expected: Vec<f64> = naive(&b, &a).as_slice().iter().map(|v| v + 1.0).collect();
        assert_eq!(out, expected);

        // a^T * a
        let mut out = vec![0.0; 9];
        gemm(View::new(a.as_slice(), 2, 3).t(), View::new(a.as_slice(), 2, 3), 0.0, &mut out);
        let at = Matrix::from_rows(&[[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]]);
        assert_eq!(out, naive(&at, &a).as_slice());
    }

    #[test]
    fn with_column_appends() {
        let a = Matrix::from_rows(&[[1.0], [2.0]]);
        let b = a.with_column(&[0.1, 0.2]);
        assert_eq!(b.as_slice(), &[1.0, 0.1, 2.0, 0.2]);
    }
}

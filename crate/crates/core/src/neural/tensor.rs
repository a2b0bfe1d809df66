//! Dense row-major f32 matrices and the few kernels the models need.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Matrix {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Matrix {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn add_assign(&mut self, o: &Matrix) {
        debug_assert_eq!(self.shape(), o.shape());
        axpy(1.0, &o.data, &mut self.data);
    }

    pub fn scale(&mut self, s: f32) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn fill(&mut self, v: f32) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }

    /// Columns `start..start+len` as a new matrix.
    pub fn cols_slice(&self, start: usize, len: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, len);
        for i in 0..self.rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(i)[start..start + len]);
        }
        out
    }

    /// Adds `src` into columns `start..` of `self`.
    pub fn add_cols(&mut self, start: usize, src: &Matrix) {
        for i in 0..self.rows {
            let dst = &mut self.row_mut(i)[start..start + src.cols];
            axpy(1.0, src.row(i), dst);
        }
    }

    pub fn set_cols(&mut self, start: usize, src: &Matrix) {
        for i in 0..self.rows {
            self.row_mut(i)[start..start + src.cols].copy_from_slice(src.row(i));
        }
    }
}

/// `y += a x`
#[inline]
pub fn axpy(a: f32, x: &[f32], y: &mut [f32]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight independent accumulators so it vectorizes.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for i in chunks * 8..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `c += a b` with `a: m x k`, `b: k x n`.
pub fn matmul_acc(a: &Matrix, b: &Matrix, c: &mut Matrix) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!((c.rows, c.cols), (a.rows, b.cols));
    for i in 0..a.rows {
        let ai = a.row(i);
        let ci = &mut c.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in ai.iter().enumerate() {
            if aik != 0.0 {
                axpy(aik, b.row(k), ci);
            }
        }
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.cols);
    matmul_acc(a, b, &mut c);
    c
}

/// `c += a b^T` with `a: m x k`, `b: n x k`.
pub fn matmul_bt_acc(a: &Matrix, b: &Matrix, c: &mut Matrix) {
    debug_assert_eq!(a.cols, b.cols);
    debug_assert_eq!((c.rows, c.cols), (a.rows, b.rows));
    for i in 0..a.rows {
        let ai = a.row(i);
        for j in 0..b.rows {
            c.data[i * b.rows + j] += dot(ai, b.row(j));
        }
    }
}

pub fn matmul_bt(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.rows);
    matmul_bt_acc(a, b, &mut c);
    c
}

/// `c += a^T b` with `a: k x m`, `b: k x n`.
pub fn matmul_at_acc(a: &Matrix, b: &Matrix, c: &mut Matrix) {
    debug_assert_eq!(a.rows, b.rows);
    debug_assert_eq!((c.rows, c.cols), (a.cols, b.cols));
    for k in 0..a.rows {
        let ak = a.row(k);
        let bk = b.row(k);
        for (i, &aki) in ak.iter().enumerate() {
            if aki != 0.0 {
                axpy(aki, bk, &mut c.data[i * b.cols..(i + 1) * b.cols]);
            }
        }
    }
}

pub fn matmul_at(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.cols, b.cols);
    matmul_at_acc(a, b, &mut c);
    c
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

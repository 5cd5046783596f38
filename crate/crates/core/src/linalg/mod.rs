//! Dense matrix/vector arithmetic and seeded pseudo-randomness.
//!
//! Everything here is deterministic: the same inputs (and the same [`Rng`]
//! seed) produce bit-identical results on every platform. Matrices are
//! row-major `f32`; there is no BLAS dependency because every matrix in this
//! workload is at most a few hundred rows wide.

mod rng;

pub use rng::Rng;

use thiserror::Error;

/// Shape mismatch between operands.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("matmul dimension mismatch: lhs is {lhs_rows}x{lhs_cols}, rhs is {rhs_rows}x{rhs_cols}")]
    MatMul {
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("matvec dimension mismatch: matrix is {rows}x{cols}, vector has length {len}")]
    MatVec { rows: usize, cols: usize, len: usize },
    #[error("data length {len} does not match {rows}x{cols}")]
    DataLen { rows: usize, cols: usize, len: usize },
}

/// Row-major dense `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from row-major data; the length must be `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, ShapeError> {
        if data.len() != rows * cols {
            return Err(ShapeError::DataLen {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested rows (test/fixture convenience).
    pub fn from_rows(rows: &[&[f32]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// True if every entry is finite (no NaN/Inf).
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `y = self * x` for a column vector `x`.
    pub fn matvec(&self, x: &Vector) -> Result<Vector, ShapeError> {
        if x.len() != self.cols {
            return Err(ShapeError::MatVec {
                rows: self.rows,
                cols: self.cols,
                len: x.len(),
            });
        }
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            out.push(dot(self.row(r), x.data()));
        }
        Ok(Vector::from_vec(out))
    }

    /// `y = self^T * x`, without materializing the transpose.
    pub fn matvec_transposed(&self, x: &Vector) -> Result<Vector, ShapeError> {
        if x.len() != self.rows {
            return Err(ShapeError::MatVec {
                rows: self.cols,
                cols: self.rows,
                len: x.len(),
            });
        }
        let mut out = vec![0.0f32; self.cols];
        for r in 0..self.rows {
            let xr = x.data()[r];
            if xr == 0.0 {
                continue;
            }
            let row = self.row(r);
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * xr;
            }
        }
        Ok(Vector::from_vec(out))
    }

    /// Frobenius norm squared.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Standard matrix product; inner dimensions must agree.
///
/// An empty inner dimension follows the empty-sum convention: every output
/// entry is 0.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, ShapeError> {
    if a.cols != b.rows {
        return Err(ShapeError::MatMul {
            lhs_rows: a.rows,
            lhs_cols: a.cols,
            rhs_rows: b.rows,
            rhs_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            let brow = b.row(k);
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Dense `f32` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f32>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Self { data: vec![0.0; len] }
    }

    pub fn from_vec(data: Vec<f32>) -> Self {
        Self { data }
    }

    pub fn from_slice(data: &[f32]) -> Self {
        Self { data: data.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise sum into `self`.
    pub fn add_assign(&mut self, other: &Vector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Elementwise `max(0, x)`.
pub fn relu(v: &Vector) -> Vector {
    Vector::from_vec(v.data.iter().map(|&x| x.max(0.0)).collect())
}

/// Numerically stable softmax: subtracts the max before exponentiating, so
/// the output always sums to 1 within float tolerance and never overflows.
pub fn softmax(scores: &Vector) -> Vector {
    assert!(!scores.is_empty(), "softmax of an empty vector");
    let max = scores.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = scores.data.iter().map(|&s| (s - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    Vector::from_vec(exps.iter().map(|&e| e / sum).collect())
}

/// Index of the largest entry; ties break toward the lowest index.
pub fn argmax(v: &Vector) -> usize {
    let mut best = 0;
    let mut best_val = f32::NEG_INFINITY;
    for (i, &x) in v.data.iter().enumerate() {
        if x > best_val {
            best_val = x;
            best = i;
        }
    }
    best
}

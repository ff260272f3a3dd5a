//! Dense symmetric linear algebra for exact GP inference.
//!
//! Everything here works on small, dense, row-major matrices. Inverses are
//! never formed explicitly by the inference path; systems are solved through
//! a Cholesky factor and two triangular solves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Multipliers of `mean(diag(A))` tried in order when factorizing.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not positive definite (largest jitter tried: {max_jitter_tried:e})")]
    NotPositiveDefinite { max_jitter_tried: f64 },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix must have at least one row")]
    Empty,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(LinalgError::DimensionMismatch {
                    expected: m,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: n, cols: m, data })
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// A square matrix whose entries are finite and symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(Matrix);

impl SymmetricMatrix {
    /// Validates exact symmetry and finiteness.
    pub fn new(m: Matrix) -> Result<Self, LinalgError> {
        if m.rows != m.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: m.rows,
                actual: m.cols,
            });
        }
        if m.rows == 0 {
            return Err(LinalgError::Empty);
        }
        for i in 0..m.rows {
            for j in 0..=i {
                if !m[(i, j)].is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
                if m[(i, j)] != m[(j, i)] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    /// Builds from the lower triangle, mirroring into the upper one.
    pub fn from_lower(mut m: Matrix) -> Result<Self, LinalgError> {
        if m.rows != m.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: m.rows,
                actual: m.cols,
            });
        }
        for i in 0..m.rows {
            for j in 0..i {
                m[(j, i)] = m[(i, j)];
            }
        }
        Self::new(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn order(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn mean_diag(&self) -> f64 {
        let n = self.order();
        (0..n).map(|i| self.0[(i, i)]).sum::<f64>() / n as f64
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A + jitter_used·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: Matrix,
    jitter_used: f64,
}

impl CholeskyFactor {
    pub fn order(&self) -> usize {
        self.lower.rows
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Wraps an existing lower-triangular matrix with a positive diagonal.
    pub fn from_lower(lower: Matrix) -> Result<Self, LinalgError> {
        if lower.rows != lower.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: lower.rows,
                actual: lower.cols,
            });
        }
        for i in 0..lower.rows {
            if lower[(i, i)].is_nan() || lower[(i, i)] <= 0.0 {
                return Err(LinalgError::NotPositiveDefinite {
                    max_jitter_tried: 0.0,
                });
            }
        }
        Ok(Self {
            lower,
            jitter_used: 0.0,
        })
    }

    /// `L·Lᵀ`, mostly useful for checking reconstructions.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.order();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| self.lower[(i, k)] * self.lower[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

fn try_factor(a: &SymmetricMatrix, jitter: f64) -> Option<Matrix> {
    let n = a.order();
    let src = a.matrix();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = src[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= 0.0 || d.is_infinite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = src[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Factorizes `A`, escalating a diagonal jitter along [`JITTER_LADDER`]
/// (scaled by the mean diagonal) until it succeeds or exceeds `max_jitter`.
pub fn cholesky(a: &SymmetricMatrix, max_jitter: f64) -> Result<CholeskyFactor, LinalgError> {
    let scale = a.mean_diag().abs();
    let mut tried = 0.0_f64;
    for step in JITTER_LADDER {
        let jitter = step * scale;
        if jitter > max_jitter {
            break;
        }
        tried = jitter;
        if let Some(lower) = try_factor(a, jitter) {
            return Ok(CholeskyFactor {
                lower,
                jitter_used: jitter,
            });
        }
    }
    Err(LinalgError::NotPositiveDefinite {
        max_jitter_tried: tried,
    })
}

fn check_len(factor: &CholeskyFactor, len: usize) -> Result<(), LinalgError> {
    if factor.order() != len {
        return Err(LinalgError::DimensionMismatch {
            expected: factor.order(),
            actual: len,
        });
    }
    Ok(())
}

/// Forward substitution: solves `L·x = b`.
pub fn solve_lower(factor: &CholeskyFactor, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    check_len(factor, b.len())?;
    let l = &factor.lower;
    let mut x = b.to_vec();
    for i in 0..x.len() {
        let row = l.row(i);
        let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - s) / row[i];
    }
    Ok(x)
}

/// Back substitution: solves `Lᵀ·x = b`.
pub fn solve_upper(factor: &CholeskyFactor, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    check_len(factor, b.len())?;
    let l = &factor.lower;
    let n = b.len();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Solves `(L·Lᵀ)·x = b` with two triangular solves.
pub fn solve_system(factor: &CholeskyFactor, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let z = solve_lower(factor, b)?;
    solve_upper(factor, &z)
}

/// `log|L·Lᵀ| = 2·Σ log Lᵢᵢ`.
pub fn log_det(factor: &CholeskyFactor) -> f64 {
    2.0 * (0..factor.order())
        .map(|i| factor.lower[(i, i)].ln())
        .sum::<f64>()
}

/// `(L·Lᵀ)⁻¹` assembled column by column from triangular solves.
///
/// Only the likelihood gradient needs this (the trace term); prediction and
/// the likelihood itself go through [`solve_system`].
pub fn spd_inverse(factor: &CholeskyFactor) -> Matrix {
    let n = factor.order();
    // Invert L once, then (L·Lᵀ)⁻¹ = L⁻ᵀ·L⁻¹.
    let l = &factor.lower;
    let mut linv = Matrix::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = s / l[(i, i)];
        }
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (i..n).map(|k| linv[(k, i)] * linv[(k, j)]).sum();
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

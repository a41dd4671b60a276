//! Small dense linear algebra: just what the fixed-topology and spectral
//! analyses need.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, v)| a * v).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
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
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
/// The inputs are copied; `M` must be square.
pub fn solve(m: &Mat, b: &[f64]) -> Result<Vec<f64>, Error> {
    assert_eq!(m.rows, m.cols);
    assert_eq!(b.len(), m.rows);
    let n = m.rows;
    let mut a = m.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[(r, col)].abs()))
            .max_by(|l, r| l.1.total_cmp(&r.1))
            .unwrap();
        if pivot < 1e-300 {
            return Err(Error::Singular { col, pivot });
        }
        if pivot_row != col {
            for j in 0..n {
                a.data.swap(pivot_row * n + j, col * n + j);
            }
            x.swap(pivot_row, col);
        }
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                let v = a[(col, j)];
                a[(r, j)] -= f * v;
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= a[(col, col)];
        for r in 0..col {
            x[r] -= a[(r, col)] * x[col];
        }
    }
    Ok(x)
}

pub const SPECTRAL_TOL: f64 = 1e-12;
pub const SPECTRAL_MAX_ITER: usize = 1_000_000;

/// Spectral radius of a nonnegative matrix by power iteration with an
/// all-ones start vector and Rayleigh-quotient convergence.
///
/// The blocks this is applied to are irreducible with positive diagonal, so
/// the dominant eigenvalue is real, simple in modulus, and reachable from
/// the positive cone.
pub fn spectral_radius(m: &Mat) -> Result<f64, Error> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    if n == 1 {
        return Ok(m[(0, 0)]);
    }
    let mut v = vec![1.0; n];
    let mut prev = f64::INFINITY;
    for _ in 0..SPECTRAL_MAX_ITER {
        let w = m.apply(&v);
        let num: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        let lambda = num / den;
        let norm = w.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w.iter().map(|&x| x / norm).collect();
        if (lambda - prev).abs() < SPECTRAL_TOL {
            return Ok(lambda);
        }
        prev = lambda;
    }
    Err(Error::NonConvergence { what: "power iteration", max_iter: SPECTRAL_MAX_ITER })
}

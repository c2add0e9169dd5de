//! Dense square matrices for small problem dimensions.
//!
//! Everything here assumes n stays small (control problems with a handful of
//! states), so matrices are stored row-major in a flat `Vec<f64>` and the
//! eigensolver is a cyclic Jacobi iteration. No sparse path exists.

use crate::error::{Error, Result};

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

/// Eigendecomposition of a symmetric matrix: `values` ascending, `vectors`
/// holding the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    /// Builds a matrix from row vectors. All rows must have length
    /// `rows.len()` and every entry must be finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParameter {
                what: "matrix must have at least one row".into(),
            });
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    name: "matrix row",
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major view of all entries.
    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute difference between the matrix and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// (M + M') / 2.
    pub fn symmetrized(&self) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let avg = 0.5 * (self.get(i, j) + self.get(j, i));
                m.set(i, j, avg);
                m.set(j, i, avg);
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// x' M x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// self + c * other.
    pub fn add_scaled(&self, c: f64, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "add_scaled dimension mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + c * b)
            .collect();
        Matrix { n: self.n, data }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// M' x. Used to move into an eigenbasis when the columns of `self`
    /// are orthonormal.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec_transpose dimension mismatch");
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j) * x[i]).sum())
            .collect()
    }

    /// Eigendecomposition by cyclic Jacobi rotations. Deterministic: no
    /// seeds, fixed sweep order, eigenvalues sorted ascending.
    pub fn eigen_sym(&self) -> Result<SymEigen> {
        let n = self.n;
        if n == 1 {
            return Ok(SymEigen {
                values: vec![self.data[0]],
                vectors: Matrix::identity(1),
            });
        }
        let mut a = self.symmetrized();
        let mut v = Matrix::identity(n);
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let tol = 1e-15 * scale;

        let mut converged = false;
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a.get(p, q).abs());
                }
            }
            if off <= tol {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    for i in 0..n {
                        if i != p && i != q {
                            let aip = a.get(i, p);
                            let aiq = a.get(i, q);
                            a.set(i, p, c * aip - s * aiq);
                            a.set(p, i, c * aip - s * aiq);
                            a.set(i, q, s * aip + c * aiq);
                            a.set(q, i, s * aip + c * aiq);
                        }
                    }
                    a.set(p, p, app - t * apq);
                    a.set(q, q, aqq + t * apq);
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);

                    for i in 0..n {
                        let vip = v.get(i, p);
                        let viq = v.get(i, q);
                        v.set(i, p, c * vip - s * viq);
                        v.set(i, q, s * vip + c * viq);
                    }
                }
            }
        }
        if !converged {
            return Err(Error::EigenNonConvergence);
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
        let values = order.iter().map(|&i| a.get(i, i)).collect();
        let mut vectors = Matrix::zeros(n);
        for (new_j, &old_j) in order.iter().enumerate() {
            for i in 0..n {
                vectors.set(i, new_j, v.get(i, old_j));
            }
        }
        Ok(SymEigen { values, vectors })
    }

    /// M^(-1/2) for a symmetric positive definite matrix.
    pub fn inverse_sqrt(&self) -> Result<Matrix> {
        let eig = self.eigen_sym()?;
        if eig.values[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                name: "matrix",
                eigenvalue: eig.values[0],
            });
        }
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += eig.vectors.get(i, l) * eig.vectors.get(j, l) / eig.values[l].sqrt();
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

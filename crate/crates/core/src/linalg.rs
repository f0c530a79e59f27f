//! Small dense symmetric matrices and a cyclic Jacobi eigensolver.

use crate::error::{Error, Result};

/// Sweep count used for the per-node eigenvalue computations (n <= 4).
pub const NODE_SWEEPS: usize = 12;

/// Dense n x n matrix stored row-major. Symmetry is a contract checked by
/// [`SymMatrix::asymmetry`], not enforced by the storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::param("matrix rows must all have length n"));
        }
        Ok(SymMatrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Sets both (i, j) and (j, i).
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.set(i, j, v);
        self.set(j, i, v);
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// sigma_2 of the eigenvalues, `((tr H)^2 - |H|_F^2) / 2`, without an
    /// eigen-decomposition.
    pub fn sigma2(&self) -> f64 {
        let t = self.trace();
        0.5 * (t * t - self.data.iter().map(|x| x * x).sum::<f64>())
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * v[i] * v[j];
            }
        }
        s
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Eigenvalues sorted descending, by cyclic Jacobi with `NODE_SWEEPS`
    /// sweeps when n <= 4 and until convergence otherwise.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let sweeps = if self.n <= 4 { NODE_SWEEPS } else { 64 };
        let mut ev = jacobi_eigenvalues(self, sweeps);
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("n >= 1")
    }
}

/// Cyclic Jacobi rotations on a copy of `a`. Rotations are skipped once an
/// off-diagonal entry is negligible relative to its diagonal pair, so extra
/// sweeps are harmless.
pub fn jacobi_eigenvalues(a: &SymMatrix, sweeps: usize) -> Vec<f64> {
    let n = a.n;
    let mut m = a.data.clone();
    let idx = |i: usize, j: usize| i * n + j;
    for _ in 0..sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[idx(p, q)] * m[idx(p, q)];
            }
        }
        if off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                if apq.abs() <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    m[idx(p, q)] = 0.0;
                    m[idx(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[idx(k, p)];
                    let akq = m[idx(k, q)];
                    m[idx(k, p)] = c * akp - s * akq;
                    m[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[idx(p, k)];
                    let aqk = m[idx(q, k)];
                    m[idx(p, k)] = c * apk - s * aqk;
                    m[idx(q, k)] = s * apk + c * aqk;
                }
                m[idx(p, q)] = 0.0;
                m[idx(q, p)] = 0.0;
            }
        }
    }
    (0..n).map(|i| m[idx(i, i)]).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Solves the dense system `a x = b` (`a` row-major, k x k) by Gaussian
/// elimination with partial pivoting. `None` if a pivot vanishes.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    assert_eq!(a.len(), k * k);
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i * k + col].abs().total_cmp(&a[j * k + col].abs()))?;
        if a[piv * k + col] == 0.0 || !a[piv * k + col].is_finite() {
            return None;
        }
        if piv != col {
            for j in 0..k {
                a.swap(piv * k + j, col * k + j);
            }
            b.swap(piv, col);
        }
        for i in (col + 1)..k {
            let factor = a[i * k + col] / a[col * k + col];
            if factor == 0.0 {
                continue;
            }
            for j in col..k {
                a[i * k + j] -= factor * a[col * k + j];
            }
            b[i] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = ((i + 1)..k).map(|j| a[i * k + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * k + i];
    }
    Some(x)
}

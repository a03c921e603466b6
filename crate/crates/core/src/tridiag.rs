//! Symmetric tridiagonal operators and their factorizations.
//!
//! Piecewise-linear elements on a 1D mesh produce tridiagonal stiffness and
//! mass matrices; everything downstream (inverse iteration, Newton, implicit
//! time steps) only needs products with them and banded solves.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and first
/// off-diagonal (`off[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        SymTridiag {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn from_diagonal(diag: Vec<f64>) -> Self {
        let n = diag.len();
        SymTridiag {
            diag,
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn is_diagonal(&self) -> bool {
        self.off.iter().all(|&o| o == 0.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        // row sum times x_i plus couplings of differences
        for i in 0..n {
            let mut s = self.diag[i];
            let mut acc = 0.0;
            if i > 0 {
                s += self.off[i - 1];
                acc += self.off[i - 1] * (x[i - 1] - x[i]);
            }
            if i + 1 < n {
                s += self.off[i];
                acc += self.off[i] * (x[i + 1] - x[i]);
            }
            y[i] = s * x[i] + acc;
        }
    }

    /// `|A| |x|`, the entrywise roundoff scale of `A x`.
    pub fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i].abs() * x[i].abs();
                if i > 0 {
                    acc += self.off[i - 1].abs() * x[i - 1].abs();
                }
                if i + 1 < n {
                    acc += self.off[i].abs() * x[i + 1].abs();
                }
                acc
            })
            .collect()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.diag[i] * x[i] * y[i];
        }
        for i in 0..n.saturating_sub(1) {
            acc += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
        }
        acc
    }

    /// `x^T A x` as `sum s_i x_i^2 - sum off_i (x_i - x_{i+1})^2` with row
    /// sums `s_i`; free of cancellation for stiffness-like matrices.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut s = self.diag[i];
            if i > 0 {
                s += self.off[i - 1];
            }
            if i + 1 < n {
                s += self.off[i];
                let d = x[i] - x[i + 1];
                acc -= self.off[i] * d * d;
            }
            acc += s * x[i] * x[i];
        }
        acc
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + alpha * b)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (a, b) in self.diag.iter_mut().zip(d) {
            *a += b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|a| alpha * a).collect(),
            off: self.off.iter().map(|a| alpha * a).collect(),
        }
    }

    /// `LDL^T` factorization; fails unless the matrix is positive definite.
    pub fn ldl(&self) -> Result<Ldl> {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut di = self.diag[i];
            if i > 0 {
                di -= l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !(di > 0.0) || !di.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    index: i,
                    pivot: di,
                });
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = self.off[i] / di;
            }
        }
        Ok(Ldl { d, l })
    }

    /// Positive definiteness by Sylvester's criterion on the `LDL^T` pivots.
    pub fn is_positive_definite(&self) -> bool {
        self.ldl().is_ok()
    }

    /// Solves `A x = b` for a possibly indefinite matrix by Gaussian
    /// elimination with partial pivoting.
    pub fn solve_general(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        // sub[i] = A[i+1][i], main[i] = A[i][i], sup[i] = A[i][i+1], sup2 fill-in.
        let mut sub = self.off.clone();
        let mut main = self.diag.clone();
        let mut sup = self.off.clone();
        let mut sup2 = vec![0.0; n.saturating_sub(2)];
        let mut x = b.to_vec();
        let scale = main
            .iter()
            .chain(&sub)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..n.saturating_sub(1) {
            if main[i].abs() >= sub[i].abs() {
                if main[i] == 0.0 {
                    return Err(Error::Singular(i));
                }
                let f = sub[i] / main[i];
                main[i + 1] -= f * sup[i];
                x[i + 1] -= f * x[i];
                sub[i] = 0.0;
            } else {
                let f = main[i] / sub[i];
                main[i] = sub[i];
                let tmp = main[i + 1];
                main[i + 1] = sup[i] - f * tmp;
                if i + 2 < n {
                    sup2[i] = sup[i + 1];
                    sup[i + 1] = -f * sup2[i];
                }
                sup[i] = tmp;
                x.swap(i, i + 1);
                x[i + 1] -= f * x[i];
                sub[i] = 0.0;
            }
        }
        if main[n - 1].abs() <= 1e-300 * scale {
            return Err(Error::Singular(n - 1));
        }
        x[n - 1] /= main[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - sup[n - 2] * x[n - 1]) / main[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - sup[i] * x[i + 1] - sup2[i] * x[i + 2]) / main[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite solution of tridiagonal system".into()));
        }
        Ok(x)
    }
}

/// `A = L D L^T` with unit lower bidiagonal `L`.
#[derive(Debug, Clone)]
pub struct Ldl {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl Ldl {
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

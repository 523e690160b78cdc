//! Thomas algorithm for tridiagonal systems.
//!
//! The policy-evaluation systems of a birth-death queue are tridiagonal and
//! diagonally dominant, so elimination without pivoting is stable.

use crate::error::{Error, Result};

/// Tridiagonal matrix with `lower[i]` at `(i, i-1)`, `diag[i]` at `(i, i)`
/// and `upper[i]` at `(i, i+1)`. `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.solve_many(&[rhs])?;
        Ok(out.pop().expect("one right-hand side"))
    }

    /// Solves `A x = b` for each right-hand side, sharing the factorization.
    pub fn solve_many(&self, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let n = self.len();
        let mut c_prime = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        for i in 0..n {
            let pivot = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.lower[i] * c_prime[i - 1]
            };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSystem(i));
            }
            pivots[i] = pivot;
            c_prime[i] = if i + 1 < n { self.upper[i] / pivot } else { 0.0 };
        }
        Ok(rhs
            .iter()
            .map(|b| {
                assert_eq!(b.len(), n, "right-hand side length");
                let mut d = vec![0.0; n];
                for i in 0..n {
                    let carry = if i == 0 { 0.0 } else { self.lower[i] * d[i - 1] };
                    d[i] = (b[i] - carry) / pivots[i];
                }
                for i in (0..n.saturating_sub(1)).rev() {
                    d[i] -= c_prime[i] * d[i + 1];
                }
                d
            })
            .collect())
    }
}

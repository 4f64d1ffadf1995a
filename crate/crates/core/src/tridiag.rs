//! Symmetric tridiagonal matrices and the handful of factorizations the
//! solvers need.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

/// Signs of the pivots of an `LDLᵀ` factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub n_minus: usize,
    pub n_zero: usize,
    pub n_plus: usize,
}

impl SymTridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    /// Adds `v` at `(i, j)` and its mirror; `|i - j| ≤ 1`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        match i.abs_diff(j) {
            0 => self.diag[i] += v,
            1 => self.off[i.min(j)] += v,
            _ => panic!("entry ({i}, {j}) outside the tridiagonal band"),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        Self {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + alpha * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a + alpha * b).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Principal submatrix on the index range `lo..hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> Self {
        Self {
            diag: self.diag[lo..hi].to_vec(),
            off: if hi > lo { self.off[lo..hi - 1].to_vec() } else { Vec::new() },
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.off)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i < self.off.len() {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Pivot signs of `LDLᵀ` (Sturm sequence). Pivots below
    /// `zero_tol * scale` in magnitude count as zero and are replaced by a
    /// signed guard so the recurrence can continue.
    pub fn inertia(&self, zero_tol: f64) -> Inertia {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let guard = zero_tol * scale;
        let mut counts = Inertia {
            n_minus: 0,
            n_zero: 0,
            n_plus: 0,
        };
        let mut d = 0.0;
        for i in 0..self.dim() {
            d = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.off[i - 1] * self.off[i - 1] / d
            };
            if d.abs() < guard {
                counts.n_zero += 1;
                d = if d < 0.0 { -guard } else { guard };
            } else if d < 0.0 {
                counts.n_minus += 1;
            } else {
                counts.n_plus += 1;
            }
        }
        counts
    }

    /// Fails unless every `LDLᵀ` pivot is positive.
    pub fn check_positive_definite(&self, what: &'static str) -> Result<()> {
        let mut d = 0.0;
        let scale = self.max_abs();
        for i in 0..self.dim() {
            d = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.off[i - 1] * self.off[i - 1] / d
            };
            if !(d > 1e-14 * scale) {
                return Err(Error::NotPositiveDefinite { what, row: i, pivot: d });
            }
        }
        Ok(())
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    /// Works for indefinite and nearly singular matrices; an exactly zero
    /// pivot is replaced by a tiny value (inverse iteration relies on this).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        if n == 0 {
            return Vec::new();
        }
        let tiny = f64::EPSILON * self.max_abs().max(f64::MIN_POSITIVE);
        // Rows of U: (main, first super, second super).
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut rhs = b.to_vec();

        // Current row under elimination, held as (col i, col i+1, col i+2).
        let mut cur = (self.diag[0], self.off.first().copied().unwrap_or(0.0), 0.0);
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if cur.0 == 0.0 { tiny } else { cur.0 };
                break;
            }
            let below = (
                self.off[i],
                self.diag[i + 1],
                self.off.get(i + 1).copied().unwrap_or(0.0),
            );
            let (pivot_row, other, swap) = if below.0.abs() > cur.0.abs() {
                (below, cur, true)
            } else {
                (cur, below, false)
            };
            if swap {
                rhs.swap(i, i + 1);
            }
            let p = if pivot_row.0 == 0.0 { tiny } else { pivot_row.0 };
            u0[i] = p;
            u1[i] = pivot_row.1;
            u2[i] = pivot_row.2;
            let l = other.0 / p;
            rhs[i + 1] -= l * rhs[i];
            cur = (other.1 - l * pivot_row.1, other.2 - l * pivot_row.2, 0.0);
        }

        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        x
    }
}

//! Direct solvers for the time-independent matrices of the implicit schemes.

use crate::error::{Error, Result};

/// LU factors of a tridiagonal matrix (Thomas algorithm, no pivoting).
///
/// Only meant for the diagonally dominant matrices of the 1D schemes.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    /// Multipliers `l_i = a_i / d_{i-1}` of the forward sweep.
    mult: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl Tridiagonal {
    /// `lower[i]` couples row `i+1` to column `i`, `upper[i]` row `i` to column `i+1`.
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        assert!(n >= 1 && lower.len() + 1 == n && upper.len() + 1 == n);
        let mut mult = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut pivot = diag[0];
        for i in 0..n {
            if i > 0 {
                mult[i] = lower[i - 1] / pivot;
                pivot = diag[i] - mult[i] * upper[i - 1];
            }
            if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
                return Err(Error::NumericalFailure {
                    message: format!("zero pivot at row {i} in tridiagonal factorization"),
                    condition: f64::INFINITY,
                });
            }
            inv_pivot[i] = 1.0 / pivot;
        }
        Ok(Tridiagonal {
            lower,
            diag,
            upper,
            mult,
            inv_pivot,
        })
    }

    /// Constant-coefficient symmetric matrix with `diag` on the diagonal and
    /// `off` on both off-diagonals.
    pub fn toeplitz(n: usize, diag: f64, off: f64) -> Result<Self> {
        Self::new(vec![off; n - 1], vec![diag; n], vec![off; n - 1])
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.mult[i] * rhs[i - 1];
        }
        rhs[n - 1] *= self.inv_pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) * self.inv_pivot[i];
        }
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * x[i + 1];
            }
            out[i] = v;
        }
    }
}

/// Cholesky factor of a symmetric positive-definite band matrix.
///
/// Row `i` stores `L[i][i-bw..=i]` in `bw + 1` consecutive slots.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    /// Factors the matrix whose lower band is given by `entry(i, j)` for
    /// `i - bw <= j <= i`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                band[i * w + (j + bw - i)] = entry(i, j);
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = band[i * w + (j + bw - i)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::NumericalFailure {
                            message: format!("band matrix is not positive definite at row {i}"),
                            condition: f64::INFINITY,
                        });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, band })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        debug_assert_eq!(rhs.len(), n);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.band[i * w..(i + 1) * w];
            let mut s = rhs[i];
            for k in lo..i {
                s -= row[k + bw - i] * rhs[k];
            }
            rhs[i] = s / row[bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = rhs[i];
            for k in i + 1..=hi {
                s -= self.band[k * w + (i + bw - k)] * rhs[k];
            }
            rhs[i] = s / self.band[i * w + bw];
        }
    }
}

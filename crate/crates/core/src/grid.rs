use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::SpatialDomain;

/// Uniform space-time grid on `[0,1]^dim x [0,T]`.
///
/// Spatial nodes are `x_i = i / nx` for `i = 0..=nx` (and likewise in `y`);
/// time levels are `t_j = j * T / nt` for `j = 0..=nt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: u8,
    pub nx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    pub nt: usize,
    #[serde(default = "default_final_time")]
    pub t_final: f64,
}

fn default_final_time() -> f64 {
    1.0
}

impl GridSpec {
    pub fn new_1d(nx: usize, nt: usize, t_final: f64) -> Result<Self> {
        let g = GridSpec {
            dim: 1,
            nx,
            ny: None,
            nt,
            t_final,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn new_2d(nx: usize, ny: usize, nt: usize, t_final: f64) -> Result<Self> {
        let g = GridSpec {
            dim: 2,
            nx,
            ny: Some(ny),
            nt,
            t_final,
        };
        g.validate()?;
        Ok(g)
    }

    /// Builds a grid from step sizes; each step must divide its interval
    /// into an integer number of cells.
    pub fn from_steps(dim: u8, hx: f64, ht: f64, t_final: f64) -> Result<Self> {
        let count = |h: f64, len: f64, what: &str| -> Result<usize> {
            if !(h > 0.0) {
                return invalid(format!("{what} must be positive"));
            }
            let n = (len / h).round();
            if n < 1.0 || ((n * h) - len).abs() > 1e-12 * len.max(1.0) {
                return invalid(format!("{what}={h} does not divide {len}"));
            }
            Ok(n as usize)
        };
        let nx = count(hx, 1.0, "hx")?;
        let nt = count(ht, t_final, "ht")?;
        match dim {
            1 => Self::new_1d(nx, nt, t_final),
            2 => Self::new_2d(nx, nx, nt, t_final),
            _ => invalid("dim must be 1 or 2"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return invalid(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if self.nx < 2 {
            return invalid("nx must be at least 2");
        }
        if self.dim == 2 {
            match self.ny {
                Some(ny) if ny >= 2 => {}
                _ => return invalid("ny must be given and at least 2 for dim = 2"),
            }
        }
        if self.nt < 1 {
            return invalid("nt must be at least 1");
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return invalid("t_final must be positive");
        }
        Ok(())
    }

    pub fn domain(&self) -> SpatialDomain {
        if self.dim == 2 {
            SpatialDomain::Square
        } else {
            SpatialDomain::Interval
        }
    }

    pub fn ny(&self) -> usize {
        self.ny.unwrap_or(1)
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / self.ny() as f64
    }

    pub fn ht(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.ht()
    }

    /// Observation times `t_1..t_nt`.
    pub fn observation_times(&self) -> Vec<f64> {
        (1..=self.nt).map(|j| self.time(j)).collect()
    }

    /// Number of nodes in one time level, boundary included.
    pub fn node_count(&self) -> usize {
        match self.dim {
            2 => (self.nx + 1) * (self.ny() + 1),
            _ => self.nx + 1,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn y(&self, k: usize) -> f64 {
        k as f64 * self.hy()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_steps_give_exact_counts() {
        let g = GridSpec::from_steps(1, 2f64.powi(-6), 2f64.powi(-7), 1.0).unwrap();
        assert_eq!((g.nx, g.nt), (64, 128));
        assert_eq!(g.nx as f64 * g.hx(), 1.0);
        assert_eq!(g.nt as f64 * g.ht(), 1.0);
    }

    #[test]
    fn non_dividing_step_is_rejected() {
        assert!(GridSpec::from_steps(1, 0.3, 0.01, 1.0).is_err());
        assert!(GridSpec::from_steps(3, 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn square_grid_needs_ny() {
        let g = GridSpec {
            dim: 2,
            nx: 8,
            ny: None,
            nt: 4,
            t_final: 1.0,
        };
        assert!(g.validate().is_err());
    }
}

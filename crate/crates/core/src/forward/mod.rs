//! Finite-difference forward solvers and boundary-flux extraction.
//!
//! * heat, 1D: backward Euler, `(I - ht D) u^{j+1} = u^j + f(t_j) g dW_j`;
//! * heat, 2D: the same with the 5-point Laplacian, band Cholesky per step;
//! * wave, 1D: three-level scheme with the `(1/4, 1/2, 1/4)` average of the
//!   discrete Laplacian over `u^{j+1}, u^j, u^{j-1}`.
//!
//! All schemes start from `u^0 = 0` with homogeneous Dirichlet data, so the
//! boundary nodes of every [`FieldState`] are exactly zero.

mod ensemble;
mod flux;
pub mod linalg;

pub use crate::spectral::Equation;
pub use ensemble::{synthesize_flux_ensemble, EnsembleSpec, FluxEnsemble, FluxSimulator, PathFlux};
pub use flux::{boundary_flux, FluxProbe};

use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::profile::{SpatialProfile, TemporalProfile};
use crate::rng::IncrementSeries;
use linalg::{BandCholesky, Tridiagonal};

/// The solution on every node (boundary included) at time level `time_index`.
/// 2D values are row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub time_index: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Scheme {
    Heat1d(Tridiagonal),
    Heat2d(BandCholesky),
    /// `B = I - (ht^2/4) D` and the scaled Laplacian stencil weight.
    Wave1d {
        lhs: Tridiagonal,
        s: f64,
    },
}

/// A forward solver with its factorized step matrix, reusable across paths.
#[derive(Debug, Clone)]
pub struct ForwardSolver {
    equation: Equation,
    grid: GridSpec,
    g: Vec<f64>,
    scheme: Scheme,
}

impl ForwardSolver {
    pub fn new(equation: Equation, grid: GridSpec, g: &SpatialProfile) -> Result<Self> {
        grid.validate()?;
        g.validate()?;
        if let Some(d) = g.dim() {
            if d != grid.dim {
                return invalid("spatial profile and grid have different dimensions");
            }
        }
        let ht = grid.ht();
        let scheme = match (equation, grid.dim) {
            (Equation::Heat, 1) => {
                let r = ht / (grid.hx() * grid.hx());
                Scheme::Heat1d(Tridiagonal::toeplitz(grid.nx - 1, 1.0 + 2.0 * r, -r)?)
            }
            (Equation::Heat, _) => {
                let (mx, my) = (grid.nx - 1, grid.ny() - 1);
                let rx = ht / (grid.hx() * grid.hx());
                let ry = ht / (grid.hy() * grid.hy());
                let entry = move |i: usize, j: usize| -> f64 {
                    if i == j {
                        1.0 + 2.0 * rx + 2.0 * ry
                    } else if i - j == 1 && i % mx != 0 {
                        -rx
                    } else if i - j == mx {
                        -ry
                    } else {
                        0.0
                    }
                };
                Scheme::Heat2d(BandCholesky::factor(mx * my, mx, entry)?)
            }
            (Equation::Wave, 1) => {
                let s = ht * ht / (4.0 * grid.hx() * grid.hx());
                Scheme::Wave1d {
                    lhs: Tridiagonal::toeplitz(grid.nx - 1, 1.0 + 2.0 * s, -s)?,
                    s,
                }
            }
            (Equation::Wave, _) => return invalid("the wave scheme is only available in 1D"),
        };
        Ok(ForwardSolver {
            equation,
            grid,
            g: g.sample(&grid),
            scheme,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn equation(&self) -> Equation {
        self.equation
    }

    /// Advances from `u^0 = 0` through `u^{N_t}`, handing every level
    /// (`j = 0..=N_t`, full node array) to `observer`.
    pub fn march<F>(&self, f: &TemporalProfile, dw: &IncrementSeries, mut observer: F) -> Result<()>
    where
        F: FnMut(usize, &[f64]),
    {
        let grid = &self.grid;
        if dw.len() != grid.nt {
            return invalid(format!(
                "increment series has {} steps but the grid has {}",
                dw.len(),
                grid.nt
            ));
        }
        if (dw.ht - grid.ht()).abs() > 1e-12 * grid.ht() {
            return invalid("increment series time step does not match the grid");
        }
        let ht = grid.ht();
        let mut u = vec![0.0; grid.node_count()];
        observer(0, &u);
        match &self.scheme {
            Scheme::Heat1d(lhs) => {
                let nx = grid.nx;
                for j in 0..grid.nt {
                    let amp = f.eval(grid.time(j)) * dw.values[j];
                    let interior = &mut u[1..nx];
                    for (v, gi) in interior.iter_mut().zip(&self.g[1..nx]) {
                        *v += amp * gi;
                    }
                    lhs.solve_in_place(interior);
                    observer(j + 1, &u);
                }
            }
            Scheme::Heat2d(lhs) => {
                let (nx, ny) = (grid.nx, grid.ny());
                let mx = nx - 1;
                let mut rhs = vec![0.0; mx * (ny - 1)];
                for j in 0..grid.nt {
                    let amp = f.eval(grid.time(j)) * dw.values[j];
                    for k in 1..ny {
                        for i in 1..nx {
                            let node = i + k * (nx + 1);
                            rhs[(i - 1) + (k - 1) * mx] = u[node] + amp * self.g[node];
                        }
                    }
                    lhs.solve_in_place(&mut rhs);
                    for k in 1..ny {
                        let row = k * (nx + 1);
                        u[row + 1..row + nx].copy_from_slice(&rhs[(k - 1) * mx..k * mx]);
                    }
                    observer(j + 1, &u);
                }
            }
            Scheme::Wave1d { lhs, s } => {
                let nx = grid.nx;
                let s = *s;
                // u^1 from (2/ht^2) u - (1/2) D u = f g dW / ht, i.e. B u^1 = (ht/2) f g dW.
                let mut prev = u.clone();
                let amp = 0.5 * ht * f.eval(grid.time(0)) * dw.values[0];
                {
                    let interior = &mut u[1..nx];
                    for (v, gi) in interior.iter_mut().zip(&self.g[1..nx]) {
                        *v = amp * gi;
                    }
                    lhs.solve_in_place(interior);
                }
                observer(1, &u);
                let mut next = vec![0.0; nx + 1];
                for j in 1..grid.nt {
                    // B u^{j+1} = 2u^j - u^{j-1} + 2s D2 u^j + s D2 u^{j-1} + ht f g dW,
                    // where D2 = hx^2 D is the unscaled second difference.
                    let amp = ht * f.eval(grid.time(j)) * dw.values[j];
                    for i in 1..nx {
                        let d2 = |w: &[f64]| w[i + 1] - 2.0 * w[i] + w[i - 1];
                        next[i] = 2.0 * u[i] - prev[i]
                            + 2.0 * s * d2(&u)
                            + s * d2(&prev)
                            + amp * self.g[i];
                    }
                    lhs.solve_in_place(&mut next[1..nx]);
                    std::mem::swap(&mut prev, &mut u);
                    std::mem::swap(&mut u, &mut next);
                    observer(j + 1, &u);
                }
            }
        }
        Ok(())
    }

    /// Every time level `u^0..u^{N_t}`.
    pub fn solve(&self, f: &TemporalProfile, dw: &IncrementSeries) -> Result<Vec<FieldState>> {
        let mut states = Vec::with_capacity(self.grid.nt + 1);
        self.march(f, dw, |j, u| {
            states.push(FieldState {
                time_index: j,
                values: u.to_vec(),
            })
        })?;
        Ok(states)
    }
}

fn check_dim(grid: &GridSpec, dim: u8) -> Result<()> {
    if grid.dim != dim {
        return invalid(format!("expected a {dim}D grid, got {}D", grid.dim));
    }
    Ok(())
}

pub fn solve_heat_1d(
    grid: &GridSpec,
    f: &TemporalProfile,
    g: &SpatialProfile,
    dw: &IncrementSeries,
) -> Result<Vec<FieldState>> {
    check_dim(grid, 1)?;
    ForwardSolver::new(Equation::Heat, *grid, g)?.solve(f, dw)
}

pub fn solve_heat_2d(
    grid: &GridSpec,
    f: &TemporalProfile,
    g: &SpatialProfile,
    dw: &IncrementSeries,
) -> Result<Vec<FieldState>> {
    check_dim(grid, 2)?;
    ForwardSolver::new(Equation::Heat, *grid, g)?.solve(f, dw)
}

pub fn solve_wave_1d(
    grid: &GridSpec,
    f: &TemporalProfile,
    g: &SpatialProfile,
    dw: &IncrementSeries,
) -> Result<Vec<FieldState>> {
    check_dim(grid, 1)?;
    ForwardSolver::new(Equation::Wave, *grid, g)?.solve(f, dw)
}

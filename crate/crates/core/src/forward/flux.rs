use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::spectral::{BoundaryPoint, Side};

use super::FieldState;

/// One-sided outward normal difference `(u_boundary - u_inner) / h` at a
/// boundary node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxProbe {
    /// The point after snapping onto the grid.
    pub point: BoundaryPoint,
    boundary: usize,
    inner: usize,
    inv_h: f64,
}

impl FluxProbe {
    pub fn new(z: &BoundaryPoint, grid: &GridSpec) -> Result<Self> {
        let (point, node) = z.snap(grid)?;
        let (boundary, inner, h) = match point {
            BoundaryPoint::Left => (0, 1, grid.hx()),
            BoundaryPoint::Right => (grid.nx, grid.nx - 1, grid.hx()),
            BoundaryPoint::Square { side, .. } => {
                let (nx, ny) = (grid.nx, grid.ny());
                let idx = |i: usize, k: usize| i + k * (nx + 1);
                match side {
                    Side::West => (idx(0, node), idx(1, node), grid.hx()),
                    Side::East => (idx(nx, node), idx(nx - 1, node), grid.hx()),
                    Side::South => (idx(node, 0), idx(node, 1), grid.hy()),
                    Side::North => (idx(node, ny), idx(node, ny - 1), grid.hy()),
                }
            }
        };
        Ok(FluxProbe {
            point,
            boundary,
            inner,
            inv_h: 1.0 / h,
        })
    }

    #[inline]
    pub fn value(&self, u: &[f64]) -> f64 {
        (u[self.boundary] - u[self.inner]) * self.inv_h
    }
}

/// Normal flux at `z` for levels `t_1..t_{N_t}`; `states` must hold
/// `u^0..u^{N_t}`.
pub fn boundary_flux(
    states: &[FieldState],
    z: &BoundaryPoint,
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    if states.len() != grid.nt + 1 {
        return invalid(format!(
            "expected {} time levels, got {}",
            grid.nt + 1,
            states.len()
        ));
    }
    let probe = FluxProbe::new(z, grid)?;
    states[1..]
        .iter()
        .map(|s| {
            if s.values.len() != grid.node_count() {
                return invalid("field state does not match the grid");
            }
            Ok(probe.value(&s.values))
        })
        .collect()
}

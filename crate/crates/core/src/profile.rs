//! Spatial and temporal source profiles.
//!
//! Both are small closed enums so that configurations can name them and so
//! that closed-form projections are available where they exist.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::spectral::{EigenMode, ModeIndex};

/// The spatial factor `g` of the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialProfile {
    /// `g = 0`.
    Zero,
    /// `g(x) = x (1 - x)` on the unit interval.
    Parabola,
    /// `g(x, y) = x y (1 - x) (1 - y)` on the unit square.
    Bubble,
    /// `scale * phi` for one Dirichlet eigenfunction.
    Mode {
        index: ModeIndex,
        #[serde(default = "unit")]
        scale: f64,
    },
    /// Samples on a uniform grid including boundary nodes, row-major with
    /// `x` fastest; linearly (bilinearly) interpolated between nodes.
    Tabulated {
        nx: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ny: Option<usize>,
        values: Vec<f64>,
    },
}

fn unit() -> f64 {
    1.0
}

impl SpatialProfile {
    /// Spatial dimension the profile is tied to; `None` for [`SpatialProfile::Zero`].
    pub fn dim(&self) -> Option<u8> {
        match self {
            SpatialProfile::Zero => None,
            SpatialProfile::Parabola => Some(1),
            SpatialProfile::Bubble => Some(2),
            SpatialProfile::Mode { index, .. } => Some(index.dim()),
            SpatialProfile::Tabulated { ny, .. } => Some(if ny.is_some() { 2 } else { 1 }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpatialProfile::Mode { index, scale } => {
                index.validate()?;
                if !scale.is_finite() {
                    return invalid("mode profile scale must be finite");
                }
            }
            SpatialProfile::Tabulated { nx, ny, values } => {
                let expected = (nx + 1) * ny.map_or(1, |n| n + 1);
                if *nx < 1 || ny.is_some_and(|n| n < 1) {
                    return invalid("tabulated profile needs at least one cell per axis");
                }
                if values.len() != expected {
                    return invalid(format!(
                        "tabulated profile expects {expected} samples, got {}",
                        values.len()
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            SpatialProfile::Zero => 0.0,
            SpatialProfile::Parabola => x * (1.0 - x),
            SpatialProfile::Bubble => x * y * (1.0 - x) * (1.0 - y),
            SpatialProfile::Mode { index, scale } => scale * index.eigenfunction(x, y),
            SpatialProfile::Tabulated { nx, ny, values } => match ny {
                None => interp_1d(values, *nx, x),
                Some(ny) => {
                    let row = |k: usize| &values[k * (nx + 1)..(k + 1) * (nx + 1)];
                    let (k, w) = cell(*ny, y);
                    let lo = interp_1d(row(k), *nx, x);
                    if w == 0.0 {
                        lo
                    } else {
                        (1.0 - w) * lo + w * interp_1d(row(k + 1), *nx, x)
                    }
                }
            },
        }
    }

    /// Projection onto `mode` in closed form, when one exists.
    pub fn closed_form_coefficient(&self, mode: &EigenMode) -> Option<f64> {
        match (self, mode.index) {
            (SpatialProfile::Zero, _) => Some(0.0),
            (SpatialProfile::Parabola, ModeIndex::Single(n)) => Some(parabola_coefficient(n)),
            (SpatialProfile::Bubble, ModeIndex::Pair(p, q)) => {
                Some(parabola_coefficient(p) * parabola_coefficient(q))
            }
            (SpatialProfile::Mode { index, scale }, idx) => {
                Some(if *index == idx { *scale } else { 0.0 })
            }
            _ => None,
        }
    }

    /// Samples on every node of `grid` (boundary included), row-major with
    /// `x` fastest.
    pub fn sample(&self, grid: &GridSpec) -> Vec<f64> {
        match grid.dim {
            2 => {
                let mut out = Vec::with_capacity(grid.node_count());
                for k in 0..=grid.ny() {
                    for i in 0..=grid.nx {
                        out.push(self.eval(grid.x(i), grid.y(k)));
                    }
                }
                out
            }
            _ => (0..=grid.nx).map(|i| self.eval(grid.x(i), 0.0)).collect(),
        }
    }

    /// Finest resolution the profile carries, used to size quadrature.
    pub(crate) fn resolution(&self) -> usize {
        match self {
            SpatialProfile::Tabulated { nx, ny, .. } => (*nx).max(ny.unwrap_or(0)),
            _ => 0,
        }
    }
}

/// `<x(1-x), sqrt(2) sin(n pi x)>`.
fn parabola_coefficient(n: u32) -> f64 {
    if n % 2 == 0 {
        0.0
    } else {
        let n = n as f64;
        4.0 * SQRT_2 / (n * PI).powi(3)
    }
}

fn cell(n: usize, s: f64) -> (usize, f64) {
    let pos = (s.clamp(0.0, 1.0) * n as f64).min(n as f64);
    let k = (pos.floor() as usize).min(n - 1);
    (k, pos - k as f64)
}

fn interp_1d(values: &[f64], n: usize, x: f64) -> f64 {
    let (i, w) = cell(n, x);
    (1.0 - w) * values[i] + w * values[i + 1]
}

/// The temporal factor `f` of the source, times a constant scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    #[serde(flatten)]
    pub shape: TemporalShape,
    #[serde(default = "unit")]
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemporalShape {
    /// `1`.
    Constant,
    /// `sin(2 pi frequency t)`.
    Sine { frequency: f64 },
    /// `0.6 - 0.3 cos(2 pi t) - 0.3 cos(4 pi t)`.
    TwoMode,
    /// `1.5 on (0.2, 0.6]`, `1 on (0.6, 0.8]`, zero elsewhere.
    Step,
    /// Values at `t_k = k * step`, held constant on `[t_k, t_{k+1})`.
    Tabulated { step: f64, values: Vec<f64> },
}

impl TemporalProfile {
    pub fn new(shape: TemporalShape) -> Self {
        TemporalProfile { shape, scale: 1.0 }
    }

    pub fn constant(value: f64) -> Self {
        TemporalProfile {
            shape: TemporalShape::Constant,
            scale: value,
        }
    }

    pub fn sine() -> Self {
        Self::new(TemporalShape::Sine { frequency: 1.0 })
    }

    pub fn two_mode() -> Self {
        Self::new(TemporalShape::TwoMode)
    }

    pub fn step() -> Self {
        Self::new(TemporalShape::Step)
    }

    pub fn scaled(&self, c: f64) -> Self {
        TemporalProfile {
            shape: self.shape.clone(),
            scale: self.scale * c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.scale.is_finite() {
            return invalid("temporal profile scale must be finite");
        }
        if let TemporalShape::Tabulated { step, values } = &self.shape {
            if !(*step > 0.0) || values.is_empty() {
                return invalid("tabulated temporal profile needs a positive step and samples");
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let base = match &self.shape {
            TemporalShape::Constant => 1.0,
            TemporalShape::Sine { frequency } => (2.0 * PI * frequency * t).sin(),
            TemporalShape::TwoMode => 0.6 - 0.3 * (2.0 * PI * t).cos() - 0.3 * (4.0 * PI * t).cos(),
            TemporalShape::Step => {
                if t > 0.2 && t <= 0.6 {
                    1.5
                } else if t > 0.6 && t <= 0.8 {
                    1.0
                } else {
                    0.0
                }
            }
            TemporalShape::Tabulated { step, values } => {
                let k = ((t / step) + 1e-9).floor().max(0.0) as usize;
                values[k.min(values.len() - 1)]
            }
        };
        self.scale * base
    }
}

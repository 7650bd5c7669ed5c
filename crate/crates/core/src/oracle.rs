//! Spectral simulator of the mild solution, used as an independent check on
//! the finite-difference pipeline, and the exact flux-variance convolution.
//!
//! Per mode the stochastic convolution is advanced exactly over each step
//! with `f` frozen at the left end point, matching the `f(t_j) dW_j` forcing
//! of the difference schemes.

use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::profile::{SpatialProfile, TemporalProfile};
use crate::quadrature::simpson;
use crate::rng::IncrementSeries;
use crate::spectral::{
    boundary_normal_derivative, eigen_modes, source_coefficient, BoundaryPoint, EigenMode,
    KernelSeries, ModeIndex, SpatialDomain,
};

pub const ORACLE_MODES_1D: usize = 64;
pub const ORACLE_MODES_PER_AXIS_2D: u32 = 16;

/// Modal coefficients at one time level. `velocities` is empty for the heat
/// equation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub time_index: usize,
    pub coefficients: Vec<f64>,
    pub velocities: Vec<f64>,
}

/// Default oracle mode set: 64 modes in 1D, the `16 x 16` block in 2D
/// (sorted by eigenvalue).
pub fn oracle_modes(domain: SpatialDomain) -> Vec<EigenMode> {
    match domain {
        SpatialDomain::Interval => eigen_modes(domain, ORACLE_MODES_1D).expect("nonzero count"),
        SpatialDomain::Square => {
            let n = ORACLE_MODES_PER_AXIS_2D;
            let mut modes: Vec<EigenMode> = (1..=n)
                .flat_map(|p| (1..=n).map(move |q| ModeIndex::Pair(p, q)))
                .map(|index| EigenMode::new(index).expect("positive indices"))
                .collect();
            modes.sort_by(|a, b| {
                a.eigenvalue
                    .total_cmp(&b.eigenvalue)
                    .then_with(|| key(a.index).cmp(&key(b.index)))
            });
            modes
        }
    }
}

fn key(i: ModeIndex) -> (u32, u32) {
    match i {
        ModeIndex::Single(n) => (n, 0),
        ModeIndex::Pair(p, q) => (p, q),
    }
}

fn source_coefficients(modes: &[EigenMode], g: &SpatialProfile) -> Result<Vec<f64>> {
    if modes.is_empty() {
        return invalid("mode set is empty");
    }
    modes.iter().map(|m| source_coefficient(g, m)).collect()
}

pub fn spectral_heat_path(
    modes: &[EigenMode],
    f: &TemporalProfile,
    g: &SpatialProfile,
    dw: &IncrementSeries,
) -> Result<Vec<SpectralState>> {
    let gn = source_coefficients(modes, g)?;
    let ht = dw.ht;
    let decay: Vec<f64> = modes.iter().map(|m| (-m.eigenvalue * ht).exp()).collect();
    let mut a = vec![0.0; modes.len()];
    let mut out = Vec::with_capacity(dw.len() + 1);
    out.push(SpectralState {
        time_index: 0,
        coefficients: a.clone(),
        velocities: Vec::new(),
    });
    for (k, dwk) in dw.values.iter().enumerate() {
        let amp = f.eval(k as f64 * ht) * dwk;
        for ((a, g), d) in a.iter_mut().zip(&gn).zip(&decay) {
            *a = d * (*a + g * amp);
        }
        out.push(SpectralState {
            time_index: k + 1,
            coefficients: a.clone(),
            velocities: Vec::new(),
        });
    }
    Ok(out)
}

pub fn spectral_wave_path(
    modes: &[EigenMode],
    f: &TemporalProfile,
    g: &SpatialProfile,
    dw: &IncrementSeries,
) -> Result<Vec<SpectralState>> {
    let gn = source_coefficients(modes, g)?;
    let ht = dw.ht;
    let rot: Vec<(f64, f64, f64)> = modes
        .iter()
        .map(|m| {
            let w = m.eigenvalue.sqrt();
            ((w * ht).cos(), (w * ht).sin(), w)
        })
        .collect();
    let n = modes.len();
    let (mut a, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut out = Vec::with_capacity(dw.len() + 1);
    out.push(SpectralState {
        time_index: 0,
        coefficients: a.clone(),
        velocities: v.clone(),
    });
    for (k, dwk) in dw.values.iter().enumerate() {
        let amp = f.eval(k as f64 * ht) * dwk;
        for i in 0..n {
            let (c, s, w) = rot[i];
            let vel = v[i] + gn[i] * amp;
            let pos = a[i];
            a[i] = pos * c + vel * s / w;
            v[i] = -pos * w * s + vel * c;
        }
        out.push(SpectralState {
            time_index: k + 1,
            coefficients: a.clone(),
            velocities: v.clone(),
        });
    }
    Ok(out)
}

/// Exact normal flux of the modal sum at `z` for levels `t_1..t_{N_t}`.
pub fn spectral_flux(
    states: &[SpectralState],
    modes: &[EigenMode],
    z: &BoundaryPoint,
) -> Result<Vec<f64>> {
    let dn = modes
        .iter()
        .map(|m| boundary_normal_derivative(m, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(states
        .iter()
        .skip(1)
        .map(|s| s.coefficients.iter().zip(&dn).map(|(a, d)| a * d).sum())
        .collect())
}

/// Evaluates the modal sum on every node of `grid`.
pub fn reconstruct_on_grid(
    state: &SpectralState,
    modes: &[EigenMode],
    grid: &GridSpec,
) -> Vec<f64> {
    let mut out = vec![0.0; grid.node_count()];
    let ny = if grid.dim == 2 { grid.ny() } else { 0 };
    for k in 0..=ny {
        for i in 0..=grid.nx {
            let (x, y) = (grid.x(i), if grid.dim == 2 { grid.y(k) } else { 0.0 });
            out[i + k * (grid.nx + 1)] = state
                .coefficients
                .iter()
                .zip(modes)
                .map(|(a, m)| a * m.eval(x, y))
                .sum();
        }
    }
    out
}

/// `Var[int_0^t flux(z)] = int_0^t f^2(tau) G_z^2(t - tau) dtau` by composite
/// Simpson with eight subintervals per grid step.
pub fn analytic_variance(
    kernel: &KernelSeries,
    f: &TemporalProfile,
    t: f64,
    grid: &GridSpec,
) -> Result<f64> {
    if !(0.0..=grid.t_final * (1.0 + 1e-12)).contains(&t) {
        return invalid(format!("t = {t} is outside [0, {}]", grid.t_final));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let steps = (t / grid.ht()).ceil().max(1.0) as usize;
    Ok(simpson(
        |tau| {
            let fv = f.eval(tau);
            let gv = kernel.eval(t - tau);
            fv * fv * gv * gv
        },
        0.0,
        t,
        8 * steps,
    ))
}

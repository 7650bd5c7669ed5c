use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::profile::{SpatialProfile, TemporalProfile};
use crate::rng::{brownian_increments, uniform_noise, SeedSpec, StreamTag};
use crate::spectral::{BoundaryPoint, Equation};

use super::{FluxProbe, ForwardSolver};

/// Everything needed to simulate a flux ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub equation: Equation,
    pub grid: GridSpec,
    pub f: TemporalProfile,
    pub g: SpatialProfile,
    pub points: Vec<BoundaryPoint>,
    pub paths: usize,
    pub noise_level: f64,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return invalid("path count must be at least 1");
        }
        if !(self.noise_level >= 0.0) || !self.noise_level.is_finite() {
            return invalid("noise level must be a nonnegative number");
        }
        if self.points.is_empty() {
            return invalid("at least one observation point is required");
        }
        self.f.validate()
    }
}

/// Flux series of one sample path, indexed `[point][j - 1]` for `j = 1..N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFlux {
    pub clean: Vec<Vec<f64>>,
    pub noisy: Vec<Vec<f64>>,
}

/// Per-path, per-point flux series.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxEnsemble {
    /// Observation points after snapping to the grid.
    pub observation_points: Vec<BoundaryPoint>,
    /// Observation points as requested.
    pub requested_points: Vec<BoundaryPoint>,
    pub noise_level: f64,
    pub ht: f64,
    pub nt: usize,
    pub paths: Vec<PathFlux>,
}

impl FluxEnsemble {
    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    /// Index of `z` among the observation points, matching either the
    /// requested or the snapped coordinates.
    pub fn point_index(&self, z: &BoundaryPoint) -> Option<usize> {
        self.observation_points
            .iter()
            .position(|p| p == z)
            .or_else(|| self.requested_points.iter().position(|p| p == z))
    }
}

/// Shared, immutable simulation state; one instance serves all workers.
#[derive(Debug, Clone)]
pub struct FluxSimulator {
    spec: EnsembleSpec,
    solver: ForwardSolver,
    probes: Vec<FluxProbe>,
}

impl FluxSimulator {
    pub fn new(spec: EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        let solver = ForwardSolver::new(spec.equation, spec.grid, &spec.g)?;
        let probes = spec
            .points
            .iter()
            .map(|z| FluxProbe::new(z, &spec.grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(FluxSimulator {
            spec,
            solver,
            probes,
        })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn snapped_points(&self) -> Vec<BoundaryPoint> {
        self.probes.iter().map(|p| p.point).collect()
    }

    /// Runs path `p` with the given source amplitude profile. Noise for point
    /// `i` at level `j` is draw `i * N_t + (j - 1)` of the path's
    /// measurement-noise stream.
    pub fn simulate_path_with(&self, f: &TemporalProfile, path: u64) -> Result<PathFlux> {
        let spec = &self.spec;
        let nt = spec.grid.nt;
        let dw = brownian_increments(
            SeedSpec::new(spec.master_seed, path, StreamTag::Brownian),
            nt,
            spec.grid.ht(),
        )?;
        let mut clean = vec![Vec::with_capacity(nt); self.probes.len()];
        self.solver.march(f, &dw, |j, u| {
            if j > 0 {
                for (series, probe) in clean.iter_mut().zip(&self.probes) {
                    series.push(probe.value(u));
                }
            }
        })?;
        let noisy = if spec.noise_level > 0.0 {
            let draws = uniform_noise(
                SeedSpec::new(spec.master_seed, path, StreamTag::MeasurementNoise),
                nt * self.probes.len(),
            );
            clean
                .iter()
                .zip(draws.chunks(nt))
                .map(|(s, u)| {
                    s.iter()
                        .zip(u)
                        .map(|(v, u)| v + spec.noise_level * u)
                        .collect()
                })
                .collect()
        } else {
            clean.clone()
        };
        Ok(PathFlux { clean, noisy })
    }

    pub fn simulate_path(&self, path: u64) -> Result<PathFlux> {
        self.simulate_path_with(&self.spec.f, path)
    }
}

/// Simulates all paths (in parallel on the current rayon pool) and collects
/// them in path order.
pub fn synthesize_flux_ensemble(spec: &EnsembleSpec) -> Result<FluxEnsemble> {
    let sim = FluxSimulator::new(spec.clone())?;
    let paths = (0..spec.paths as u64)
        .into_par_iter()
        .map(|p| sim.simulate_path(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(FluxEnsemble {
        observation_points: sim.snapped_points(),
        requested_points: spec.points.clone(),
        noise_level: spec.noise_level,
        ht: spec.grid.ht(),
        nt: spec.grid.nt,
        paths,
    })
}

//! Measured variance series
//! `V_j = (h_t / P) sum_p (sum_{i<=j} flux(t_i, omega_p))^2`.
//!
//! Paths are accumulated in fixed chunks of [`CHUNK`] consecutive indices;
//! chunk totals are folded in index order with compensated summation. The
//! result is therefore independent of how many workers produced the chunks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::forward::{FluxEnsemble, FluxSimulator};
use crate::profile::TemporalProfile;
use crate::spectral::BoundaryPoint;

pub const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSeries {
    /// Observation point after grid snapping.
    pub point: BoundaryPoint,
    pub values: Vec<f64>,
    pub paths: usize,
    pub noise_level: f64,
    pub ht: f64,
    pub centered: bool,
}

impl VarianceSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sqrt(2/P) V_j`, the Gaussian standard error of a second-moment estimate.
    pub fn standard_errors(&self) -> Vec<f64> {
        let s = (2.0 / self.paths as f64).sqrt();
        self.values.iter().map(|v| s * v).collect()
    }

    /// `h_t V_j`, the estimate of `Var[int_0^{t_j} flux]`.
    pub fn integrated_flux_variance(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * self.ht).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: &Compensated) {
        self.add(other.sum);
        self.carry += other.carry;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Running sums of partial flux sums and their squares, per point and level.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceAccumulator {
    nt: usize,
    paths: usize,
    squares: Vec<Vec<Compensated>>,
    sums: Vec<Vec<Compensated>>,
}

impl VarianceAccumulator {
    pub fn new(points: usize, nt: usize) -> Self {
        VarianceAccumulator {
            nt,
            paths: 0,
            squares: vec![vec![Compensated::default(); nt]; points],
            sums: vec![vec![Compensated::default(); nt]; points],
        }
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    /// Adds one path; `series[i]` is the flux at point `i` for `t_1..t_{N_t}`.
    pub fn push(&mut self, series: &[Vec<f64>]) -> Result<()> {
        if series.len() != self.squares.len() {
            return invalid("path has the wrong number of observation points");
        }
        for (i, s) in series.iter().enumerate() {
            if s.len() != self.nt {
                return invalid("flux series length does not match N_t");
            }
            let mut partial = 0.0;
            for (j, v) in s.iter().enumerate() {
                partial += v;
                self.squares[i][j].add(partial * partial);
                self.sums[i][j].add(partial);
            }
        }
        self.paths += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &VarianceAccumulator) {
        for (a, b) in self.squares.iter_mut().zip(&other.squares) {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        self.paths += other.paths;
    }

    /// Raw second moment `(h_t/P) sum S^2`, or with `centered` the sample
    /// variance `(h_t/(P-1)) sum (S - mean)^2`.
    pub fn finish(&self, point: usize, ht: f64, centered: bool) -> Result<Vec<f64>> {
        if self.paths == 0 {
            return invalid("no paths accumulated");
        }
        let p = self.paths as f64;
        if centered && self.paths < 2 {
            return invalid("centered variance needs at least two paths");
        }
        Ok(self.squares[point]
            .iter()
            .zip(&self.sums[point])
            .map(|(sq, s)| {
                if centered {
                    let mean = s.value() / p;
                    (ht / (p - 1.0)) * (sq.value() - p * mean * mean).max(0.0)
                } else {
                    ht * sq.value() / p
                }
            })
            .collect())
    }
}

fn fold_chunks(chunks: Vec<VarianceAccumulator>, points: usize, nt: usize) -> VarianceAccumulator {
    let mut total = VarianceAccumulator::new(points, nt);
    for c in &chunks {
        total.merge(c);
    }
    total
}

/// `V_j` at `z` from an in-memory ensemble (noisy series).
pub fn variance_series(ensemble: &FluxEnsemble, z: &BoundaryPoint) -> Result<VarianceSeries> {
    variance_series_with(ensemble, z, false)
}

pub fn variance_series_with(
    ensemble: &FluxEnsemble,
    z: &BoundaryPoint,
    centered: bool,
) -> Result<VarianceSeries> {
    let Some(idx) = ensemble.point_index(z) else {
        return invalid(format!("{z} is not an observation point of the ensemble"));
    };
    let chunks = ensemble
        .paths
        .chunks(CHUNK)
        .map(|chunk| {
            let mut acc = VarianceAccumulator::new(1, ensemble.nt);
            for path in chunk {
                acc.push(std::slice::from_ref(&path.noisy[idx]))?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let acc = fold_chunks(chunks, 1, ensemble.nt);
    Ok(VarianceSeries {
        point: ensemble.observation_points[idx],
        values: acc.finish(0, ensemble.ht, centered)?,
        paths: acc.paths(),
        noise_level: ensemble.noise_level,
        ht: ensemble.ht,
        centered,
    })
}

/// Simulates and accumulates all paths without holding the ensemble, one
/// series per observation point. Runs on the current rayon pool.
pub fn stream_variance_series(
    sim: &FluxSimulator,
    f: &TemporalProfile,
    centered: bool,
) -> Result<Vec<VarianceSeries>> {
    let spec = sim.spec();
    let (points, nt) = (spec.points.len(), spec.grid.nt);
    let n_chunks = spec.paths.div_ceil(CHUNK);
    let chunks = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = VarianceAccumulator::new(points, nt);
            for p in c * CHUNK..((c + 1) * CHUNK).min(spec.paths) {
                acc.push(&sim.simulate_path_with(f, p as u64)?.noisy)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let acc = fold_chunks(chunks, points, nt);
    sim.snapped_points()
        .into_iter()
        .enumerate()
        .map(|(i, point)| {
            Ok(VarianceSeries {
                point,
                values: acc.finish(i, spec.grid.ht(), centered)?,
                paths: acc.paths(),
                noise_level: spec.noise_level,
                ht: spec.grid.ht(),
                centered,
            })
        })
        .collect()
}

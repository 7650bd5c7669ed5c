//! Discrete Volterra system `V_z = G_z f` and its regularized block Kaczmarz
//! solution.
//!
//! Each `G_z` is lower triangular Toeplitz with first column
//! `(G_z^2(t_1), ..., G_z^2(t_{N_t}))`, acting on `f = (f_0^2, ..., f_{N_t-1}^2)`.
//! One block update is
//! `f <- f + (G^T G + alpha I)^{-1} G^T (V - G f)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::profile::TemporalProfile;
use crate::spectral::{BoundaryPoint, KernelTable};
use crate::synthesis::VarianceSeries;

/// Lower-triangular Toeplitz matrix stored by its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzLower {
    pub column: Vec<f64>,
}

impl ToeplitzLower {
    pub fn new(column: Vec<f64>) -> Self {
        ToeplitzLower { column }
    }

    pub fn dim(&self) -> usize {
        self.column.len()
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        if j >= k {
            self.column[j - k]
        } else {
            0.0
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..=j).map(|k| self.column[j - k] * x[k]).sum())
            .collect()
    }

    pub fn mul_transpose(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|k| (k..n).map(|j| self.column[j - k] * y[j]).sum())
            .collect()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|k| self.entry(j, k)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraBlock {
    pub point: BoundaryPoint,
    pub matrix: ToeplitzLower,
    pub data: Vec<f64>,
}

impl VolterraBlock {
    pub fn residual_norm(&self, f: &[f64]) -> f64 {
        norm(&sub(&self.matrix.mul(f), &self.data))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSystem {
    pub blocks: Vec<VolterraBlock>,
    pub ht: f64,
}

impl VolterraSystem {
    pub fn dim(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.matrix.dim())
    }

    /// `sum_z ||G_z f - V_z||`.
    pub fn combined_residual(&self, f: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.residual_norm(f)).sum()
    }

    /// A system restricted to the listed blocks, in that order.
    pub fn select(&self, blocks: &[usize]) -> Result<VolterraSystem> {
        let picked = blocks
            .iter()
            .map(|&i| {
                self.blocks
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("no block {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VolterraSystem {
            blocks: picked,
            ht: self.ht,
        })
    }
}

pub fn build_volterra_system(
    kernels: &[KernelTable],
    variances: &[VarianceSeries],
) -> Result<VolterraSystem> {
    if kernels.is_empty() {
        return invalid("at least one observation point is required");
    }
    if kernels.len() != variances.len() {
        return invalid(format!(
            "{} kernel tables but {} variance series",
            kernels.len(),
            variances.len()
        ));
    }
    let n = kernels[0].len();
    let ht = kernels[0].ht;
    let mut blocks = Vec::with_capacity(kernels.len());
    for (k, v) in kernels.iter().zip(variances) {
        if k.len() != n || v.len() != n {
            return invalid("kernel tables and variance series must share N_t");
        }
        if (k.ht - ht).abs() > 1e-12 * ht || (v.ht - ht).abs() > 1e-12 * ht {
            return invalid("kernel tables and variance series must share the time step");
        }
        if !same_point(&k.z, &v.point) {
            return invalid(format!(
                "kernel point {} does not match variance point {}",
                k.z, v.point
            ));
        }
        blocks.push(VolterraBlock {
            point: v.point,
            matrix: ToeplitzLower::new(k.values.iter().map(|g| g * g).collect()),
            data: v.values.clone(),
        });
    }
    Ok(VolterraSystem { blocks, ht })
}

fn same_point(a: &BoundaryPoint, b: &BoundaryPoint) -> bool {
    let (a, b) = (a.coords(), b.coords());
    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KaczmarzConfig {
    pub alpha: f64,
    /// Stopping tolerance on the combined residual.
    pub tolerance: f64,
    /// Maximum number of sweeps over all blocks.
    pub max_iter: usize,
    /// Cyclic block order; defaults to the order of the system's blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_order: Option<Vec<usize>>,
}

impl KaczmarzConfig {
    pub fn new(alpha: f64, tolerance: f64, max_iter: usize) -> Self {
        KaczmarzConfig {
            alpha,
            tolerance,
            max_iter,
            block_order: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return invalid("alpha must be positive");
        }
        if !(self.tolerance > 0.0) {
            return invalid("tolerance must be positive");
        }
        if self.max_iter == 0 {
            return invalid("max_iter must be at least 1");
        }
        Ok(())
    }
}

/// Required normwise backward error of each inner solve.
const INNER_SOLVE_TOLERANCE: f64 = 1e-12;

/// Cholesky factor of `G^T G + alpha I` for one block, reused across sweeps.
#[derive(Debug, Clone)]
pub struct BlockSolver {
    n: usize,
    normal: Vec<f64>,
    factor: Vec<f64>,
    normal_norm: f64,
}

impl BlockSolver {
    pub fn new(matrix: &ToeplitzLower, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return invalid("alpha must be positive");
        }
        let n = matrix.dim();
        let c = &matrix.column;
        // (G^T G)_{ab} = sum_{j >= max(a,b)} c[j-a] c[j-b]
        let mut normal = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..=a {
                let s: f64 = (a..n).map(|j| c[j - a] * c[j - b]).sum();
                normal[a * n + b] = s;
                normal[b * n + a] = s;
            }
            normal[a * n + a] += alpha;
        }
        let normal_norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut factor = normal.clone();
        for j in 0..n {
            let mut d = factor[j * n + j];
            for k in 0..j {
                d -= factor[j * n + k] * factor[j * n + k];
            }
            if !(d > 0.0) {
                return Err(Error::NumericalFailure {
                    message: format!("normal matrix lost positive definiteness at row {j}"),
                    condition: normal_norm / alpha,
                });
            }
            let d = d.sqrt();
            factor[j * n + j] = d;
            for i in j + 1..n {
                let mut s = factor[i * n + j];
                for k in 0..j {
                    s -= factor[i * n + k] * factor[j * n + k];
                }
                factor[i * n + j] = s / d;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                factor[i * n + j] = 0.0;
            }
        }
        Ok(BlockSolver {
            n,
            normal,
            factor,
            normal_norm,
        })
    }

    fn cholesky_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let l = &self.factor;
        let mut y = b.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
            y[i] = (y[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k * n + i] * y[k]).sum();
            y[i] = (y[i] - s) / l[i * n + i];
        }
        y
    }

    fn normal_mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.normal[i * n..(i + 1) * n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Rough 2-norm condition estimate from the Cholesky diagonal.
    pub fn condition_estimate(&self) -> f64 {
        let d: Vec<f64> = (0..self.n).map(|i| self.factor[i * self.n + i]).collect();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }

    /// Solves `(G^T G + alpha I) x = b` with up to three steps of iterative
    /// refinement, failing if the normwise backward error stays above 1e-12.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; self.n]);
        }
        let mut x = self.cholesky_solve(b);
        let mut err = f64::INFINITY;
        for _ in 0..4 {
            let r = sub(b, &self.normal_mul(&x));
            err = norm(&r) / (self.normal_norm * norm(&x) + bn);
            if err <= INNER_SOLVE_TOLERANCE {
                return Ok(x);
            }
            let dx = self.cholesky_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        }
        Err(Error::NumericalFailure {
            message: format!("inner solve stalled at backward error {err:e}"),
            condition: self.condition_estimate(),
        })
    }

    /// One regularized Kaczmarz update of `state` against `block`.
    pub fn update(&self, block: &VolterraBlock, state: &[f64]) -> Result<Vec<f64>> {
        let r = sub(&block.data, &block.matrix.mul(state));
        let delta = self.solve(&block.matrix.mul_transpose(&r))?;
        Ok(state.iter().zip(&delta).map(|(a, d)| a + d).collect())
    }
}

pub fn kaczmarz_step(state: &[f64], block: &VolterraBlock, alpha: f64) -> Result<Vec<f64>> {
    if state.len() != block.matrix.dim() || block.data.len() != block.matrix.dim() {
        return invalid("state, matrix and data dimensions disagree");
    }
    BlockSolver::new(&block.matrix, alpha)?.update(block, state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    /// `t_k = k h_t`, `k = 0..N_t-1`.
    pub times: Vec<f64>,
    /// `f_k^2`, approximating `f(t_k)^2`.
    pub f_squared: Vec<f64>,
    /// `sqrt(max(f_k^2, 0))`.
    pub strength: Vec<f64>,
    /// Number of block updates performed.
    pub iterations: usize,
    pub sweeps: usize,
    pub converged: bool,
    /// Combined residual of the initial guess and after every block update.
    pub residual_history: Vec<f64>,
    /// Combined residual of the returned iterate.
    pub final_residual: f64,
    pub clamped_count: usize,
}

impl Reconstruction {
    pub fn error_against(&self, truth: &TemporalProfile, window: (f64, f64)) -> Result<f64> {
        reconstruction_error(&self.strength, &self.times, truth, window)
    }
}

/// Cycles the regularized block update from `f = 0` until the combined
/// residual drops below the tolerance or `max_iter` sweeps have run; in the
/// latter case the iterate with the smallest combined residual is returned
/// with `converged = false`.
pub fn kaczmarz_invert(system: &VolterraSystem, config: &KaczmarzConfig) -> Result<Reconstruction> {
    config.validate()?;
    if system.blocks.is_empty() {
        return invalid("the system has no blocks");
    }
    let n = system.dim();
    if system
        .blocks
        .iter()
        .any(|b| b.matrix.dim() != n || b.data.len() != n)
    {
        return invalid("blocks have inconsistent dimensions");
    }
    let order: Vec<usize> = match &config.block_order {
        Some(o) => {
            if o.is_empty() || o.iter().any(|&i| i >= system.blocks.len()) {
                return invalid("block order refers to missing blocks");
            }
            o.clone()
        }
        None => (0..system.blocks.len()).collect(),
    };
    let mut solvers: Vec<Option<BlockSolver>> = vec![None; system.blocks.len()];
    for &i in &order {
        if solvers[i].is_none() {
            solvers[i] = Some(BlockSolver::new(&system.blocks[i].matrix, config.alpha)?);
        }
    }

    let mut f = vec![0.0; n];
    let mut residual = system.combined_residual(&f);
    let mut history = vec![residual];
    let mut best = (residual, f.clone());
    let mut converged = residual < config.tolerance;
    let (mut iterations, mut sweeps) = (0, 0);
    'outer: while !converged && sweeps < config.max_iter {
        sweeps += 1;
        for &i in &order {
            let solver = solvers[i].as_ref().expect("factored above");
            f = solver.update(&system.blocks[i], &f)?;
            iterations += 1;
            residual = system.combined_residual(&f);
            history.push(residual);
            if !residual.is_finite() {
                return Err(Error::NumericalFailure {
                    message: "Kaczmarz iterate diverged".into(),
                    condition: solver.condition_estimate(),
                });
            }
            if residual < best.0 {
                best = (residual, f.clone());
            }
            if residual < config.tolerance {
                converged = true;
                break 'outer;
            }
        }
    }
    let (final_residual, f_squared) = if converged { (residual, f) } else { best };
    let clamped_count = f_squared.iter().filter(|v| **v < 0.0).count();
    Ok(Reconstruction {
        times: (0..n).map(|k| k as f64 * system.ht).collect(),
        strength: f_squared.iter().map(|v| v.max(0.0).sqrt()).collect(),
        f_squared,
        iterations,
        sweeps,
        converged,
        residual_history: history,
        final_residual,
        clamped_count,
    })
}

/// Relative l2 error between `strength` and `|truth|` on grid times inside
/// the closed `window`.
pub fn reconstruction_error(
    strength: &[f64],
    times: &[f64],
    truth: &TemporalProfile,
    window: (f64, f64),
) -> Result<f64> {
    if strength.len() != times.len() {
        return invalid("strength and time vectors differ in length");
    }
    let (a, b) = window;
    if !(a >= 0.0 && a <= b) {
        return invalid(format!("bad window [{a}, {b}]"));
    }
    let tol = 1e-12;
    let (mut num, mut den, mut count) = (0.0, 0.0, 0);
    for (s, &t) in strength.iter().zip(times) {
        if t >= a - tol && t <= b + tol {
            let exact = truth.eval(t).abs();
            num += (s - exact).powi(2);
            den += exact * exact;
            count += 1;
        }
    }
    if count == 0 {
        return invalid(format!("no grid time lies in [{a}, {b}]"));
    }
    if den == 0.0 {
        return invalid("true strength vanishes on the window");
    }
    Ok((num / den).sqrt())
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Equation;

    fn table(values: Vec<f64>, z: BoundaryPoint, ht: f64) -> KernelTable {
        KernelTable {
            z,
            equation: Equation::Heat,
            ht,
            times: (1..=values.len()).map(|j| j as f64 * ht).collect(),
            values,
            truncation: 1,
        }
    }

    fn series(values: Vec<f64>, z: BoundaryPoint, ht: f64) -> VarianceSeries {
        VarianceSeries {
            point: z,
            values,
            paths: 1,
            noise_level: 0.0,
            ht,
            centered: false,
        }
    }

    #[test]
    fn assembled_matrix_is_squared_toeplitz() {
        let (a, b, c) = (0.5, 2.0, -3.0);
        let sys = build_volterra_system(
            &[table(vec![a, b, c], BoundaryPoint::Left, 0.1)],
            &[series(vec![0.0; 3], BoundaryPoint::Left, 0.1)],
        )
        .unwrap();
        let dense = sys.blocks[0].matrix.dense();
        assert_eq!(
            dense,
            vec![
                vec![a * a, 0.0, 0.0],
                vec![b * b, a * a, 0.0],
                vec![c * c, b * b, a * a]
            ]
        );
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let k = table(vec![1.0; 3], BoundaryPoint::Left, 0.1);
        assert!(build_volterra_system(
            &[k.clone()],
            &[series(vec![0.0; 4], BoundaryPoint::Left, 0.1)]
        )
        .is_err());
        assert!(build_volterra_system(
            &[k.clone()],
            &[series(vec![0.0; 3], BoundaryPoint::Left, 0.2)]
        )
        .is_err());
        assert!(build_volterra_system(
            &[k.clone()],
            &[series(vec![0.0; 3], BoundaryPoint::Right, 0.1)]
        )
        .is_err());
        assert!(build_volterra_system(&[k], &[]).is_err());
        assert!(build_volterra_system(&[], &[]).is_err());
    }

    #[test]
    fn scalar_update_formula() {
        let g0 = 0.7f64;
        let (v, alpha) = (1.3, 0.05);
        let block = VolterraBlock {
            point: BoundaryPoint::Left,
            matrix: ToeplitzLower::new(vec![g0 * g0]),
            data: vec![v],
        };
        let out = kaczmarz_step(&[0.0], &block, alpha).unwrap();
        let expected = g0 * g0 * v / (g0.powi(4) + alpha);
        assert!((out[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn exact_state_is_a_fixed_point() {
        let m = ToeplitzLower::new(vec![0.4, 0.9, 1.1, 0.2]);
        let f = vec![1.0, 0.5, -0.25, 2.0];
        let block = VolterraBlock {
            point: BoundaryPoint::Left,
            data: m.mul(&f),
            matrix: m,
        };
        assert_eq!(block.residual_norm(&f), 0.0);
        let out = kaczmarz_step(&f, &block, 1e-3).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn huge_tolerance_returns_zero() {
        let m = ToeplitzLower::new(vec![0.4, 0.9, 1.1]);
        let sys = VolterraSystem {
            blocks: vec![VolterraBlock {
                point: BoundaryPoint::Left,
                data: vec![1.0, 2.0, 3.0],
                matrix: m,
            }],
            ht: 0.1,
        };
        let r = kaczmarz_invert(&sys, &KaczmarzConfig::new(1e-2, 1e6, 10)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert!(r.f_squared.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_configs() {
        assert!(KaczmarzConfig::new(0.0, 1.0, 1).validate().is_err());
        assert!(KaczmarzConfig::new(1.0, 0.0, 1).validate().is_err());
        assert!(KaczmarzConfig::new(1.0, 1.0, 0).validate().is_err());
    }

    #[test]
    fn reconstruction_error_examples() {
        let truth = TemporalProfile::sine();
        let times: Vec<f64> = (0..128).map(|k| k as f64 / 128.0).collect();
        let exact: Vec<f64> = times.iter().map(|&t| truth.eval(t).abs()).collect();
        assert_eq!(
            reconstruction_error(&exact, &times, &truth, (0.0, 1.0)).unwrap(),
            0.0
        );
        let zero = vec![0.0; 128];
        assert!(
            (reconstruction_error(&zero, &times, &truth, (0.0, 1.0)).unwrap() - 1.0).abs() < 1e-15
        );
        let scaled: Vec<f64> = exact.iter().map(|v| v * 1.1).collect();
        assert!(
            (reconstruction_error(&scaled, &times, &truth, (0.0, 1.0)).unwrap() - 0.1).abs()
                < 1e-12
        );
        assert!(reconstruction_error(&exact, &times, &truth, (0.301, 0.304)).is_err());
        assert!(reconstruction_error(&exact, &times, &truth, (0.5, 0.2)).is_err());
    }

    #[test]
    fn negative_entries_are_clamped_and_counted() {
        // Data that can only be fit by a negative first entry.
        let m = ToeplitzLower::new(vec![1.0, 0.0]);
        let sys = VolterraSystem {
            blocks: vec![VolterraBlock {
                point: BoundaryPoint::Left,
                data: vec![-1.0, 1.0],
                matrix: m,
            }],
            ht: 0.5,
        };
        let r = kaczmarz_invert(&sys, &KaczmarzConfig::new(1e-6, 1e-9, 50)).unwrap();
        assert_eq!(r.clamped_count, 1);
        assert_eq!(r.strength[0], 0.0);
        assert!((r.strength[1] - 1.0).abs() < 1e-6);
    }
}

//! Configuration-driven pipeline: simulate, synthesize, tabulate kernels,
//! invert, and write plot-ready CSV plus a JSON summary.

mod config;
pub mod io;
mod verify;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    ExperimentConfig, InversionSection, KernelSection, ModelSection, ObservationSection,
    OutputSection, Preset, SamplingSection,
};
pub use verify::{
    fdm_spectral_discrepancy, refined, verify, Check, Suite, VerifyReport, ORACLE_PATHS,
};

use crate::error::{Error, Result};
use crate::forward::FluxSimulator;
use crate::inversion::{build_volterra_system, kaczmarz_invert, Reconstruction};
use crate::spectral::{kernel_table, BoundaryPoint, KernelTable};
use crate::synthesis::{stream_variance_series, VarianceSeries, CHUNK};
use io::{fmt_f64, VarianceMeta};

pub const VARIANCE_FILE: &str = "variance.csv";
pub const KERNEL_FILE: &str = "kernel.csv";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.csv";
pub const FLUX_FILE: &str = "flux.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Runs `op` on a dedicated rayon pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, op: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
        .install(op)
}

/// Observation points after grid snapping, in config order.
pub fn snapped_points(cfg: &ExperimentConfig) -> Result<Vec<BoundaryPoint>> {
    cfg.observation_points()?
        .iter()
        .map(|z| Ok(z.snap(&cfg.grid)?.0))
        .collect()
}

/// Monte Carlo variance series for every observation point.
pub fn synthesize(cfg: &ExperimentConfig) -> Result<Vec<VarianceSeries>> {
    let sim = FluxSimulator::new(cfg.ensemble_spec()?)?;
    stream_variance_series(&sim, &cfg.model.f, cfg.sampling.centered)
}

/// Kernel tables at the snapped observation points.
pub fn kernels(cfg: &ExperimentConfig) -> Result<Vec<KernelTable>> {
    snapped_points(cfg)?
        .par_iter()
        .map(|z| {
            kernel_table(
                z,
                &cfg.model.g,
                cfg.model.equation,
                &cfg.grid,
                cfg.kernel.tolerance,
            )
        })
        .collect()
}

pub fn invert(
    cfg: &ExperimentConfig,
    kernels: &[KernelTable],
    variances: &[VarianceSeries],
) -> Result<Reconstruction> {
    let system = build_volterra_system(kernels, variances)?;
    kaczmarz_invert(&system, &cfg.kaczmarz())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub requested: Vec<f64>,
    pub snapped: Vec<f64>,
    pub kernel_truncation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub window: [f64; 2],
    /// Relative l2 error of the recovered strength against `|f|`.
    pub relative_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format: String,
    pub name: String,
    /// Seconds since the Unix epoch when the summary was written.
    pub created_unix: u64,
    pub workers: usize,
    pub points: Vec<PointSummary>,
    pub iterations: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub clamped_count: usize,
    pub error: ErrorMetrics,
    pub config: ExperimentConfig,
}

impl RunSummary {
    fn new(
        cfg: &ExperimentConfig,
        workers: usize,
        kernels: &[KernelTable],
        rec: &Reconstruction,
    ) -> Result<Self> {
        let window = cfg.window();
        let points = cfg
            .observation_points()?
            .iter()
            .zip(kernels)
            .map(|(r, k)| PointSummary {
                requested: r.coords(),
                snapped: k.z.coords(),
                kernel_truncation: k.truncation,
            })
            .collect();
        Ok(RunSummary {
            format: "stochflux summary v1".into(),
            name: cfg.name.clone(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            workers,
            points,
            iterations: rec.iterations,
            sweeps: rec.sweeps,
            converged: rec.converged,
            final_residual: rec.final_residual,
            clamped_count: rec.clamped_count,
            error: ErrorMetrics {
                window: [window.0, window.1],
                relative_l2: rec.error_against(&cfg.model.f, window)?,
            },
            config: cfg.clone(),
        })
    }
}

/// Tracks written files so a failed run leaves no partial artifacts.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    keep: bool,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            keep: false,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.at_stage(name))
}

pub fn write_variance(
    cfg: &ExperimentConfig,
    series: &[VarianceSeries],
    workers: usize,
    path: &Path,
) -> Result<()> {
    io::write_variance_csv(
        path,
        series,
        &VarianceMeta {
            seed: cfg.sampling.seed,
            workers,
            requested: cfg.observation_points()?,
        },
    )
}

pub fn write_reconstruction(
    cfg: &ExperimentConfig,
    rec: &Reconstruction,
    path: &Path,
) -> Result<()> {
    let truth: Vec<f64> = rec
        .times
        .iter()
        .map(|&t| cfg.model.f.eval(t).abs())
        .collect();
    let meta = vec![
        ("alpha".to_string(), fmt_f64(cfg.inversion.alpha)),
        ("tolerance".into(), fmt_f64(cfg.inversion.tolerance)),
        ("iterations".into(), rec.iterations.to_string()),
        ("converged".into(), rec.converged.to_string()),
        ("clamped_count".into(), rec.clamped_count.to_string()),
    ];
    io::write_reconstruction_csv(
        path,
        &rec.times,
        &rec.f_squared,
        &rec.strength,
        Some(&truth),
        &meta,
    )
}

fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs the full pipeline on a pool of `workers` threads and writes
/// `variance.csv`, `kernel.csv`, `reconstruction.csv` and `summary.json`
/// into `out_dir`. On failure, files written by this call are removed.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    workers: usize,
    out_dir: &Path,
) -> Result<RunSummary> {
    stage("config", cfg.validate())?;
    let mut out = stage("output", Outputs::new(out_dir))?;
    with_workers(workers, || {
        let series = stage("synthesize", synthesize(cfg))?;
        stage(
            "synthesize",
            write_variance(cfg, &series, workers, &out.path(VARIANCE_FILE)),
        )?;
        let tables = stage("kernel", kernels(cfg))?;
        stage(
            "kernel",
            io::write_kernel_csv(&out.path(KERNEL_FILE), &tables),
        )?;
        let rec = stage("invert", invert(cfg, &tables, &series))?;
        stage(
            "invert",
            write_reconstruction(cfg, &rec, &out.path(RECONSTRUCTION_FILE)),
        )?;
        let summary = stage("summary", RunSummary::new(cfg, workers, &tables, &rec))?;
        stage("summary", write_summary(&summary, &out.path(SUMMARY_FILE)))?;
        Ok(summary)
    })
    .inspect(|_| out.keep = true)
}

/// Inverts stored variance and kernel files and writes the reconstruction
/// and summary next to them in `out_dir`.
pub fn invert_from_files(
    cfg: &ExperimentConfig,
    variance: &Path,
    kernel: &Path,
    out_dir: &Path,
) -> Result<RunSummary> {
    let series = stage("invert", io::read_variance_csv(variance))?;
    let tables = stage("invert", io::read_kernel_csv(kernel))?;
    let mut out = stage("output", Outputs::new(out_dir))?;
    let rec = stage("invert", invert(cfg, &tables, &series))?;
    stage(
        "invert",
        write_reconstruction(cfg, &rec, &out.path(RECONSTRUCTION_FILE)),
    )?;
    let summary = stage("summary", RunSummary::new(cfg, 1, &tables, &rec))?;
    stage("summary", write_summary(&summary, &out.path(SUMMARY_FILE)))?;
    out.keep = true;
    Ok(summary)
}

/// Writes the per-path flux series `(path, point_id, j, t_j, flux,
/// flux_noisy)` without holding the ensemble in memory. Runs on the current
/// rayon pool.
pub fn write_flux_dump(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let sim = FluxSimulator::new(cfg.ensemble_spec()?)?;
    let ht = cfg.grid.ht();
    let mut meta = vec![
        ("paths".to_string(), cfg.sampling.paths.to_string()),
        ("noise_level".into(), fmt_f64(cfg.sampling.noise_level)),
        ("seed".into(), cfg.sampling.seed.to_string()),
    ];
    for (i, z) in sim.snapped_points().iter().enumerate() {
        meta.push((format!("point {i} snapped"), format!("{z}")));
    }
    let mut w = io::csv_writer(path, io::FLUX_HEADER, &meta)?;
    w.write_record(["path", "point_id", "j", "t_j", "flux", "flux_noisy"])?;
    let batch = CHUNK * rayon::current_num_threads().max(1);
    let mut start = 0;
    while start < cfg.sampling.paths {
        let end = (start + batch).min(cfg.sampling.paths);
        let fluxes = (start..end)
            .into_par_iter()
            .map(|p| sim.simulate_path(p as u64))
            .collect::<Result<Vec<_>>>()?;
        for (p, flux) in (start..end).zip(fluxes) {
            for (i, (clean, noisy)) in flux.clean.iter().zip(&flux.noisy).enumerate() {
                for (j, (c, n)) in clean.iter().zip(noisy).enumerate() {
                    w.write_record([
                        p.to_string(),
                        i.to_string(),
                        (j + 1).to_string(),
                        fmt_f64((j + 1) as f64 * ht),
                        fmt_f64(*c),
                        fmt_f64(*n),
                    ])?;
                }
            }
        }
        start = end;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = Preset::Ex1.config();
        cfg.grid.nx = 16;
        cfg.grid.nt = 32;
        cfg.sampling.paths = 200;
        cfg.inversion.max_iter = 20;
        cfg
    }

    #[test]
    fn run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run_experiment(&tiny(), 2, dir.path()).unwrap();
        for f in [
            VARIANCE_FILE,
            KERNEL_FILE,
            RECONSTRUCTION_FILE,
            SUMMARY_FILE,
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(summary.points.len(), 2);
        assert!(summary.error.relative_l2.is_finite());
        let text = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        let back: RunSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(back.config, tiny());
    }

    #[test]
    fn failed_stage_names_itself_and_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny();
        cfg.inversion.block_order = Some(vec![0, 5]);
        let err = run_experiment(&cfg, 1, dir.path()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Stage {
                    stage: "invert",
                    ..
                }
            ),
            "{err}"
        );
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn invert_from_files_matches_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let a = run_experiment(&cfg, 1, dir.path()).unwrap();
        let other = tempfile::tempdir().unwrap();
        let b = invert_from_files(
            &cfg,
            &dir.path().join(VARIANCE_FILE),
            &dir.path().join(KERNEL_FILE),
            other.path(),
        )
        .unwrap();
        assert_eq!(a.error, b.error);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(
            std::fs::read(dir.path().join(RECONSTRUCTION_FILE)).unwrap(),
            std::fs::read(other.path().join(RECONSTRUCTION_FILE)).unwrap()
        );
    }

    #[test]
    fn flux_dump_has_one_row_per_sample() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny();
        cfg.sampling.paths = 3;
        cfg.sampling.noise_level = 0.1;
        let path = dir.path().join(FLUX_FILE);
        write_flux_dump(&cfg, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows = text.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows, 1 + 3 * 2 * 32);
    }
}

//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use stochflux::experiment::{
    self, fdm_spectral_discrepancy, refined, run_experiment, ExperimentConfig, Preset, ORACLE_PATHS,
};
use stochflux::inversion::{build_volterra_system, kaczmarz_invert, reconstruction_error};
use stochflux::oracle::analytic_variance;
use stochflux::rng::{brownian_increments, SeedSpec, StreamTag};
use stochflux::spectral::KernelSeries;
use stochflux::{BoundaryPoint, Equation, Result, SpatialProfile, TemporalProfile, VarianceSeries};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn kernel_steady_state() -> Result<Outcome> {
    let k = KernelSeries::new(
        &BoundaryPoint::Left,
        &SpatialProfile::Parabola,
        Equation::Heat,
        400,
    )?;
    let dev = (k.eval(5.0) - 1.0 / 12.0).abs();
    outcome(
        dev <= 1e-6 && k.truncation() >= 200,
        format!(
            "|G_0(5) - 1/12| = {dev:.3e} (tol 1e-6, {} modes)",
            k.truncation()
        ),
    )
}

fn ito_isometry() -> Result<Outcome> {
    let (nt, ht) = (128, 1.0 / 128.0);
    let f: Vec<f64> = (0..nt)
        .map(|k| TemporalProfile::sine().eval(k as f64 * ht))
        .collect();
    let expected = ht * f.iter().map(|v| v * v).sum::<f64>();
    let p = 100_000u64;
    let mut sums = Vec::with_capacity(p as usize);
    for i in 0..p {
        let dw = brownian_increments(SeedSpec::new(42, i, StreamTag::Brownian), nt, ht)?;
        sums.push(f.iter().zip(&dw.values).map(|(a, b)| a * b).sum::<f64>());
    }
    let n = p as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let var = sums.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let z = (var - expected).abs() / (expected * (2.0 / (n - 1.0)).sqrt());
    outcome(
        z <= 4.0,
        format!("sample variance {var:.6} vs {expected:.6}: {z:.2} standard errors (tol 4)"),
    )
}

fn ex1(paths: usize, noise: f64) -> ExperimentConfig {
    let mut cfg = Preset::Ex1.config();
    cfg.sampling.paths = paths;
    cfg.sampling.noise_level = noise;
    cfg
}

fn variance_identity(series: &[VarianceSeries], cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for v in series {
        let kernel = KernelSeries::new(&v.point, &cfg.model.g, cfg.model.equation, 4096)?;
        let integrated = v.integrated_flux_variance();
        for j in [64usize, 128] {
            let t = j as f64 * v.ht;
            let exact = analytic_variance(&kernel, &cfg.model.f, t, &cfg.grid)?;
            worst = worst.max((integrated[j - 1] - exact).abs() / exact);
        }
    }
    outcome(
        worst <= 0.10,
        format!("max relative deviation of h_t V_j at t in {{0.5, 1}}: {worst:.4} (tol 0.10)"),
    )
}

fn cross_validation() -> Result<Outcome> {
    let cfg = Preset::Ex1.config();
    let coarse = fdm_spectral_discrepancy(&cfg, &cfg.grid, ORACLE_PATHS)?;
    let fine = fdm_spectral_discrepancy(&cfg, &refined(&cfg.grid), ORACLE_PATHS)?;
    outcome(
        coarse <= 0.10 && fine < coarse,
        format!("discrepancy {coarse:.4e} (tol 0.10), halved steps {fine:.4e}"),
    )
}

fn error_of(cfg: &ExperimentConfig, series: &[VarianceSeries]) -> Result<f64> {
    let tables = experiment::kernels(cfg)?;
    experiment::invert(cfg, &tables, series)?.error_against(&cfg.model.f, cfg.window())
}

fn wave_case() -> Result<Outcome> {
    let cfg = Preset::Ex2.config();
    let tables = experiment::kernels(&cfg)?;
    let ht = cfg.grid.ht();
    let n = cfg.grid.nt;
    let f2: Vec<f64> = (0..n)
        .map(|k| cfg.model.f.eval(k as f64 * ht).powi(2))
        .collect();
    let mut system = build_volterra_system(
        &tables,
        &tables
            .iter()
            .map(|t| VarianceSeries {
                point: t.z,
                values: vec![0.0; n],
                paths: 1,
                noise_level: 0.0,
                ht,
                centered: false,
            })
            .collect::<Vec<_>>(),
    )?;
    for b in &mut system.blocks {
        b.data = b.matrix.mul(&f2);
    }
    let rec = kaczmarz_invert(&system, &cfg.kaczmarz())?;
    let (a, b) = cfg.window();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, t) in rec.times.iter().enumerate() {
        if *t >= a - 1e-12 && *t <= b + 1e-12 {
            num += (rec.f_squared[k] - f2[k]).powi(2);
            den += f2[k] * f2[k];
        }
    }
    let exact_err = (num / den).sqrt();
    let simulated = error_of(&cfg, &experiment::synthesize(&cfg)?)?;
    outcome(
        exact_err <= 0.05 && simulated <= 0.20,
        format!("exact-data f^2 error {exact_err:.4} (tol 0.05), P=10000 |f| error {simulated:.4} (tol 0.20)"),
    )
}

fn two_d_case() -> Result<Outcome> {
    let cfg = Preset::Ex3.config();
    let series = experiment::synthesize(&cfg)?;
    let tables = experiment::kernels(&cfg)?;
    let system = build_volterra_system(&tables, &series)?;
    let window = cfg.window();
    let score = |blocks: &[usize]| -> Result<f64> {
        let rec = kaczmarz_invert(&system.select(blocks)?, &cfg.kaczmarz())?;
        reconstruction_error(&rec.strength, &rec.times, &cfg.model.f, window)
    };
    let multi = score(&[0, 1, 2])?;
    let single = score(&[0])?;
    outcome(
        multi <= single,
        format!("three points {multi:.4} vs single point (0, 0.2) {single:.4}"),
    )
}

fn sign_identifiability() -> Result<Outcome> {
    let cfg = ex1(1000, 0.0);
    let mut neg = cfg.clone();
    neg.model.f = cfg.model.f.scaled(-1.0);
    let a = experiment::synthesize(&cfg)?;
    let b = experiment::synthesize(&neg)?;
    let same_v = a.iter().zip(&b).all(|(x, y)| {
        x.values
            .iter()
            .zip(&y.values)
            .all(|(p, q)| p.to_bits() == q.to_bits())
    });
    let tables = experiment::kernels(&cfg)?;
    let ra = experiment::invert(&cfg, &tables, &a)?;
    let rb = experiment::invert(&neg, &tables, &b)?;
    outcome(
        same_v && ra == rb,
        format!(
            "V_j bit-identical: {same_v}, reconstructions identical: {}",
            ra == rb
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let cfg = Preset::Ex1.config();
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for d in &dirs {
        run_experiment(&cfg, 4, d.path())?;
    }
    let mut identical = true;
    for f in [
        experiment::VARIANCE_FILE,
        experiment::KERNEL_FILE,
        experiment::RECONSTRUCTION_FILE,
    ] {
        identical &=
            std::fs::read(dirs[0].path().join(f))? == std::fs::read(dirs[1].path().join(f))?;
    }
    outcome(
        identical,
        format!("run --preset ex1 --seed 42 --workers 4 twice: CSVs identical = {identical}"),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, r: Result<Outcome>, start: Instant| {
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(o) => {
                let tag = if o.passed { "PASS" } else { "FAIL" };
                failures += usize::from(!o.passed);
                println!("[{tag}] {id:>2} {name}: {} ({secs:.1} s)", o.detail);
            }
            Err(e) => {
                failures += 1;
                println!("[FAIL] {id:>2} {name}: error: {e} ({secs:.1} s)");
            }
        }
    };

    let t = Instant::now();
    report(1, "kernel steady state", kernel_steady_state(), t);
    let t = Instant::now();
    report(2, "Ito isometry", ito_isometry(), t);

    let t = Instant::now();
    let base = ex1(5000, 0.0);
    let series_5000 = experiment::synthesize(&base);
    report(
        3,
        "variance identity",
        series_5000
            .as_ref()
            .map_err(clone_err)
            .and_then(|s| variance_identity(s, &base)),
        t,
    );
    let t = Instant::now();
    report(4, "FDM/spectral cross-validation", cross_validation(), t);

    let t = Instant::now();
    let fig1 = series_5000.as_ref().map_err(clone_err).and_then(|s5| {
        let e5 = error_of(&base, s5)?;
        let c1 = ex1(1000, 0.0);
        let e1 = error_of(&c1, &experiment::synthesize(&c1)?)?;
        outcome(
            e5 <= 0.15 && e5 < e1,
            format!("error at P=5000 {e5:.4} (tol 0.15), at P=1000 {e1:.4}"),
        )
    });
    report(5, "reconstruction improves with P", fig1, t);

    let t = Instant::now();
    let noisy = ex1(5000, 0.2);
    let fig2 = experiment::synthesize(&noisy).and_then(|s| {
        let e = error_of(&noisy, &s)?;
        outcome(
            e <= 0.30,
            format!("error at sigma=0.2, P=5000 {e:.4} (tol 0.30)"),
        )
    });
    report(6, "noise robustness", fig2, t);

    let t = Instant::now();
    report(7, "wave case", wave_case(), t);
    let t = Instant::now();
    report(8, "2D multi-point vs single point", two_d_case(), t);
    let t = Instant::now();
    report(9, "sign identifiability", sign_identifiability(), t);
    let t = Instant::now();
    report(10, "determinism", determinism(), t);

    println!("{} of 10 criteria failed", failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn clone_err(e: &stochflux::Error) -> stochflux::Error {
    stochflux::Error::InvalidArgument(e.to_string())
}

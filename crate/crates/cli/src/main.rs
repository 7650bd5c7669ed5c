use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stochflux::experiment::{
    self, io, with_workers, ExperimentConfig, Preset, Suite, FLUX_FILE, KERNEL_FILE, VARIANCE_FILE,
};

#[derive(Parser, Debug)]
#[command(
    name = "stochflux",
    version,
    about = "Flux simulation and source-strength recovery"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration; ex1 when neither this nor --config is given.
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Number of sample paths, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,
    /// Worker threads for path-level parallelism.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    workers: usize,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Ex1,
    Ex2,
    Ex3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Kernel,
    Isometry,
    Variance,
    Oracle,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forward simulation only; writes per-path flux series.
    Simulate,
    /// Ensemble simulation and variance series.
    Synthesize,
    /// Recovery kernel tables at the observation points.
    Kernel,
    /// Inversion from stored variance and kernel files.
    Invert {
        /// Variance CSV; defaults to variance.csv in the output directory
        #[arg(long, value_name = "PATH")]
        variance: Option<PathBuf>,
        /// Kernel CSV; defaults to kernel.csv in the output directory
        #[arg(long, value_name = "PATH")]
        kernel: Option<PathBuf>,
    },
    /// The whole pipeline.
    Run,
    /// Built-in verification suites; prints a JSON report.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
    },
}

impl Common {
    fn config(&self) -> stochflux::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, p) => match p.unwrap_or(PresetArg::Ex1) {
                PresetArg::Ex1 => Preset::Ex1,
                PresetArg::Ex2 => Preset::Ex2,
                PresetArg::Ex3 => Preset::Ex3,
            }
            .config(),
        };
        if let Some(seed) = self.seed {
            cfg.sampling.seed = seed;
        }
        if let Some(paths) = self.paths {
            cfg.sampling.paths = paths;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_file(cfg: &ExperimentConfig, name: &str) -> stochflux::Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    Ok(cfg.output.dir.join(name))
}

fn staged<T>(stage: &'static str, r: stochflux::Result<T>) -> stochflux::Result<T> {
    r.map_err(|e| stochflux::Error::Stage {
        stage,
        source: Box::new(e),
    })
}

fn remove_on_error<T>(path: &Path, r: stochflux::Result<T>) -> stochflux::Result<T> {
    if r.is_err() {
        let _ = std::fs::remove_file(path);
    }
    r
}

fn execute(cli: &Cli, cfg: &ExperimentConfig) -> stochflux::Result<bool> {
    let workers = cli.common.workers;
    match &cli.command {
        Command::Simulate => {
            let path = out_file(cfg, FLUX_FILE)?;
            let r = with_workers(workers, || experiment::write_flux_dump(cfg, &path));
            staged("simulate", remove_on_error(&path, r))?;
            println!("{}", path.display());
        }
        Command::Synthesize => {
            let path = out_file(cfg, VARIANCE_FILE)?;
            let r = with_workers(workers, || {
                let series = experiment::synthesize(cfg)?;
                experiment::write_variance(cfg, &series, workers, &path)
            });
            staged("synthesize", remove_on_error(&path, r))?;
            println!("{}", path.display());
        }
        Command::Kernel => {
            let path = out_file(cfg, KERNEL_FILE)?;
            let r = with_workers(workers, || {
                io::write_kernel_csv(&path, &experiment::kernels(cfg)?)
            });
            staged("kernel", remove_on_error(&path, r))?;
            println!("{}", path.display());
        }
        Command::Invert { variance, kernel } => {
            let v = variance
                .clone()
                .unwrap_or_else(|| cfg.output.dir.join(VARIANCE_FILE));
            let k = kernel
                .clone()
                .unwrap_or_else(|| cfg.output.dir.join(KERNEL_FILE));
            let summary = experiment::invert_from_files(cfg, &v, &k, &cfg.output.dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Run => {
            let summary = experiment::run_experiment(cfg, workers, &cfg.output.dir)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Verify { suite } => {
            let suite = match suite {
                SuiteArg::Kernel => Suite::Kernel,
                SuiteArg::Isometry => Suite::Isometry,
                SuiteArg::Variance => Suite::Variance,
                SuiteArg::Oracle => Suite::Oracle,
                SuiteArg::All => Suite::All,
            };
            let report = with_workers(workers, || Ok(experiment::verify(suite, cfg)))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.common.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Ok(echo) = cfg.to_toml() {
                eprintln!("configuration:\n{echo}");
            }
            ExitCode::from(1)
        }
    }
}

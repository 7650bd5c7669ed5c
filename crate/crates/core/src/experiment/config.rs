use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::EnsembleSpec;
use crate::grid::GridSpec;
use crate::inversion::KaczmarzConfig;
use crate::profile::{SpatialProfile, TemporalProfile};
use crate::spectral::{BoundaryPoint, Equation, TRUNCATION_TOLERANCE};

/// A complete experiment, one TOML section per pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelSection,
    pub grid: GridSpec,
    #[serde(default)]
    pub observation: ObservationSection,
    pub sampling: SamplingSection,
    #[serde(default)]
    pub kernel: KernelSection,
    pub inversion: InversionSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub equation: Equation,
    pub g: SpatialProfile,
    /// The true temporal factor; used to simulate data and to score the
    /// reconstruction.
    pub f: TemporalProfile,
}

/// Observation points as coordinate tuples, `[x]` in 1D or `[x, y]` in 2D.
/// Empty means both endpoints of the interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub paths: usize,
    #[serde(default)]
    pub noise_level: f64,
    pub seed: u64,
    /// Subtract the sample mean before squaring.
    #[serde(default)]
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub tolerance: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            tolerance: TRUNCATION_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSection {
    pub alpha: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_order: Option<Vec<usize>>,
    /// Error window as fractions of the final time.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}

fn default_window() -> [f64; 2] {
    [0.05, 0.95]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Ex1,
    Ex2,
    Ex3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Ex1, Preset::Ex2, Preset::Ex3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ex1 => "ex1",
            Preset::Ex2 => "ex2",
            Preset::Ex3 => "ex3",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            Preset::Ex1 => include_str!("../../presets/ex1.toml"),
            Preset::Ex2 => include_str!("../../presets/ex2.toml"),
            Preset::Ex3 => include_str!("../../presets/ex3.toml"),
        }
    }

    pub fn config(self) -> ExperimentConfig {
        ExperimentConfig::from_toml(self.source()).expect("bundled presets are valid")
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Config(format!("unknown preset `{s}` (expected ex1, ex2 or ex3)"))
            })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.grid.validate().map_err(config_error)?;
        if self.model.equation == Equation::Wave && self.grid.dim == 2 {
            return bad("the wave equation is only supported in 1D".into());
        }
        self.model.g.validate().map_err(config_error)?;
        if let Some(d) = self.model.g.dim() {
            if d != self.grid.dim {
                return bad(format!("g is {d}D but the grid is {}D", self.grid.dim));
            }
        }
        self.model.f.validate().map_err(config_error)?;
        self.observation_points()?;
        if self.sampling.paths == 0 {
            return bad("sampling.paths must be positive".into());
        }
        if !(self.sampling.noise_level >= 0.0 && self.sampling.noise_level.is_finite()) {
            return bad("sampling.noise_level must be nonnegative".into());
        }
        if !(self.kernel.tolerance > 0.0) {
            return bad("kernel.tolerance must be positive".into());
        }
        self.kaczmarz().validate().map_err(config_error)?;
        let [a, b] = self.inversion.window;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return bad(format!(
                "inversion.window [{a}, {b}] must satisfy 0 <= a < b <= 1"
            ));
        }
        Ok(())
    }

    /// Observation points as requested (before grid snapping).
    pub fn observation_points(&self) -> Result<Vec<BoundaryPoint>> {
        if self.observation.points.is_empty() {
            if self.grid.dim == 1 {
                return Ok(vec![BoundaryPoint::Left, BoundaryPoint::Right]);
            }
            return Err(Error::Config(
                "2D experiments need observation.points".into(),
            ));
        }
        self.observation
            .points
            .iter()
            .map(|c| {
                if c.len() != self.grid.dim as usize {
                    return Err(Error::Config(format!(
                        "observation point {c:?} does not match grid dimension {}",
                        self.grid.dim
                    )));
                }
                BoundaryPoint::from_coords(c).map_err(config_error)
            })
            .collect()
    }

    pub fn kaczmarz(&self) -> KaczmarzConfig {
        KaczmarzConfig {
            alpha: self.inversion.alpha,
            tolerance: self.inversion.tolerance,
            max_iter: self.inversion.max_iter,
            block_order: self.inversion.block_order.clone(),
        }
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        Ok(EnsembleSpec {
            equation: self.model.equation,
            grid: self.grid,
            f: self.model.f.clone(),
            g: self.model.g.clone(),
            points: self.observation_points()?,
            paths: self.sampling.paths,
            noise_level: self.sampling.noise_level,
            master_seed: self.sampling.seed,
        })
    }

    /// Error window in absolute time.
    pub fn window(&self) -> (f64, f64) {
        let [a, b] = self.inversion.window;
        (a * self.grid.t_final, b * self.grid.t_final)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_roundtrip() {
        for p in Preset::ALL {
            let cfg = p.config();
            assert_eq!(cfg.name, p.name());
            let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(cfg, back);
        }
        assert_eq!(Preset::Ex3.config().observation_points().unwrap().len(), 3);
        assert!("ex4".parse::<Preset>().is_err());
    }

    #[test]
    fn wave_in_2d_is_rejected() {
        let text = Preset::Ex3.source().replace("\"heat\"", "\"wave\"");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("1D"), "{err}");
    }

    #[test]
    fn nonpositive_parameters_are_rejected() {
        for (from, to) in [
            ("alpha = 1e-2", "alpha = 0.0"),
            ("tolerance = 2e-3", "tolerance = -1.0"),
            ("paths = 5000", "paths = 0"),
            ("max_iter = 1000", "max_iter = 0"),
            ("noise_level = 0.0", "noise_level = -0.1"),
        ] {
            let text = Preset::Ex1.source().replace(from, to);
            assert_ne!(text, Preset::Ex1.source());
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{to}");
        }
    }

    #[test]
    fn one_d_defaults_to_both_endpoints() {
        let mut cfg = Preset::Ex1.config();
        cfg.observation.points.clear();
        assert_eq!(
            cfg.observation_points().unwrap(),
            vec![BoundaryPoint::Left, BoundaryPoint::Right]
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = Preset::Ex1
            .source()
            .replace("seed = 42", "seed = 42\ncolour = 1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}

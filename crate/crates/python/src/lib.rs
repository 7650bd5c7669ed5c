//! Python bindings: experiment configuration, the pipeline stages, kernels
//! and the Kaczmarz inversion.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stochflux::experiment::{self, with_workers, ExperimentConfig, Preset, Suite};
use stochflux::inversion::{
    kaczmarz_invert, KaczmarzConfig, ToeplitzLower, VolterraBlock, VolterraSystem,
};
use stochflux::spectral::{kernel_value, KernelTable};
use stochflux::{BoundaryPoint, Equation, Error, SpatialProfile, VarianceSeries};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(m) | Error::Config(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_dict(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| py_err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn equation(name: &str) -> PyResult<Equation> {
    match name {
        "heat" => Ok(Equation::Heat),
        "wave" => Ok(Equation::Wave),
        _ => Err(PyValueError::new_err(format!("unknown equation `{name}`"))),
    }
}

fn profile(name: &str) -> PyResult<SpatialProfile> {
    match name {
        "parabola" => Ok(SpatialProfile::Parabola),
        "bubble" => Ok(SpatialProfile::Bubble),
        "zero" => Ok(SpatialProfile::Zero),
        _ => Err(PyValueError::new_err(format!(
            "unknown spatial profile `{name}`"
        ))),
    }
}

/// Experiment configuration.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let p: Preset = name.parse().map_err(py_err)?;
        Ok(PyConfig { inner: p.config() })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyConfig {
            inner: ExperimentConfig::from_toml(text).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.sampling.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.sampling.seed = seed;
    }

    #[getter]
    fn paths(&self) -> usize {
        self.inner.sampling.paths
    }

    #[setter]
    fn set_paths(&mut self, paths: usize) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.sampling.paths = paths;
        next.validate().map_err(py_err)?;
        self.inner = next;
        Ok(())
    }

    #[getter]
    fn noise_level(&self) -> f64 {
        self.inner.sampling.noise_level
    }

    #[setter]
    fn set_noise_level(&mut self, sigma: f64) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.sampling.noise_level = sigma;
        next.validate().map_err(py_err)?;
        self.inner = next;
        Ok(())
    }

    /// Observation points after grid snapping.
    fn snapped_points(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(experiment::snapped_points(&self.inner)
            .map_err(py_err)?
            .iter()
            .map(|z| z.coords())
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(name={:?}, paths={}, seed={})",
            self.inner.name, self.inner.sampling.paths, self.inner.sampling.seed
        )
    }
}

/// Variance series `V_j` at one observation point.
#[pyclass(name = "VarianceSeries", from_py_object)]
#[derive(Clone)]
struct PyVariance {
    inner: VarianceSeries,
}

#[pymethods]
impl PyVariance {
    #[getter]
    fn point(&self) -> Vec<f64> {
        self.inner.point.coords()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    #[getter]
    fn paths(&self) -> usize {
        self.inner.paths
    }

    #[getter]
    fn ht(&self) -> f64 {
        self.inner.ht
    }

    fn standard_errors(&self) -> Vec<f64> {
        self.inner.standard_errors()
    }
}

/// Recovery kernel sampled at `t_1..t_{N_t}`.
#[pyclass(name = "KernelTable", from_py_object)]
#[derive(Clone)]
struct PyKernel {
    inner: KernelTable,
}

#[pymethods]
impl PyKernel {
    #[getter]
    fn point(&self) -> Vec<f64> {
        self.inner.z.coords()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    #[getter]
    fn truncation(&self) -> usize {
        self.inner.truncation
    }
}

#[pyclass(name = "Reconstruction", from_py_object)]
#[derive(Clone)]
struct PyReconstruction {
    inner: stochflux::Reconstruction,
}

#[pymethods]
impl PyReconstruction {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn f_squared(&self) -> Vec<f64> {
        self.inner.f_squared.clone()
    }

    #[getter]
    fn strength(&self) -> Vec<f64> {
        self.inner.strength.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn final_residual(&self) -> f64 {
        self.inner.final_residual
    }

    #[getter]
    fn clamped_count(&self) -> usize {
        self.inner.clamped_count
    }

    #[getter]
    fn residual_history(&self) -> Vec<f64> {
        self.inner.residual_history.clone()
    }

    /// Relative l2 error against the configuration's true `|f|` on its window.
    fn error(&self, config: &PyConfig) -> PyResult<f64> {
        self.inner
            .error_against(&config.inner.model.f, config.inner.window())
            .map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (config, workers = 1))]
fn synthesize(py: Python<'_>, config: &PyConfig, workers: usize) -> PyResult<Vec<PyVariance>> {
    let cfg = config.inner.clone();
    let series = py
        .detach(|| with_workers(workers, || experiment::synthesize(&cfg)))
        .map_err(py_err)?;
    Ok(series
        .into_iter()
        .map(|inner| PyVariance { inner })
        .collect())
}

#[pyfunction]
fn kernels(config: &PyConfig) -> PyResult<Vec<PyKernel>> {
    Ok(experiment::kernels(&config.inner)
        .map_err(py_err)?
        .into_iter()
        .map(|inner| PyKernel { inner })
        .collect())
}

#[pyfunction]
fn invert(
    config: &PyConfig,
    kernels: Vec<PyKernel>,
    variances: Vec<PyVariance>,
) -> PyResult<PyReconstruction> {
    let k: Vec<KernelTable> = kernels.into_iter().map(|k| k.inner).collect();
    let v: Vec<VarianceSeries> = variances.into_iter().map(|v| v.inner).collect();
    Ok(PyReconstruction {
        inner: experiment::invert(&config.inner, &k, &v).map_err(py_err)?,
    })
}

/// Regularized block Kaczmarz on explicit Toeplitz columns and data vectors.
#[pyfunction]
#[pyo3(signature = (columns, data, ht, alpha, tolerance, max_iter))]
fn kaczmarz(
    columns: Vec<Vec<f64>>,
    data: Vec<Vec<f64>>,
    ht: f64,
    alpha: f64,
    tolerance: f64,
    max_iter: usize,
) -> PyResult<PyReconstruction> {
    if columns.len() != data.len() {
        return Err(PyValueError::new_err("columns and data differ in length"));
    }
    let blocks = columns
        .into_iter()
        .zip(data)
        .map(|(c, d)| VolterraBlock {
            point: BoundaryPoint::Left,
            matrix: ToeplitzLower::new(c),
            data: d,
        })
        .collect();
    let system = VolterraSystem { blocks, ht };
    Ok(PyReconstruction {
        inner: kaczmarz_invert(&system, &KaczmarzConfig::new(alpha, tolerance, max_iter))
            .map_err(py_err)?,
    })
}

/// `G_z(t)` for a named spatial profile, truncated at `terms` modes.
#[pyfunction]
#[pyo3(signature = (point, t, profile_name = "parabola", equation_name = "heat", terms = 4096))]
fn kernel(
    point: Vec<f64>,
    t: f64,
    profile_name: &str,
    equation_name: &str,
    terms: usize,
) -> PyResult<f64> {
    let z = BoundaryPoint::from_coords(&point).map_err(py_err)?;
    kernel_value(
        &z,
        &profile(profile_name)?,
        equation(equation_name)?,
        t,
        terms,
    )
    .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (config, out_dir, workers = 1))]
fn run(py: Python<'_>, config: &PyConfig, out_dir: PathBuf, workers: usize) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let summary = py
        .detach(|| experiment::run_experiment(&cfg, workers, &out_dir))
        .map_err(py_err)?;
    to_dict(py, &summary)
}

#[pyfunction]
#[pyo3(signature = (suite, config))]
fn verify(py: Python<'_>, suite: &str, config: &PyConfig) -> PyResult<Py<PyAny>> {
    let suite: Suite = suite.parse().map_err(py_err)?;
    let cfg = config.inner.clone();
    let report = py.detach(|| experiment::verify(suite, &cfg));
    to_dict(py, &report)
}

#[pymodule]
#[pyo3(name = "stochflux")]
fn stochflux_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyVariance>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyReconstruction>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(kernels, m)?)?;
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    m.add_function(wrap_pyfunction!(kaczmarz, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}

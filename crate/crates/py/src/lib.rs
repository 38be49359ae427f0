//! Python bindings: images, scene synthesis, Wald simulation, fusion,
//! metrics, the smooth Schatten-p function and the file-based commands.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gloria::cli::{self, RunConfig};
use gloria::imaging::{wald_simulate, HsImage, WaldConfig, WaldOutput};
use gloria::io::{read_image, write_image};
use gloria::linalg::{self, DenseMatrix};
use gloria::metrics::{self, MetricOptions};
use gloria::patching::grid_layout;
use gloria::regularizer::{self, SchattenParams};
use gloria::solver::{default_gamma, solve, uniform_gammas, Init, Problem, SolverConfig};
use gloria::synth::{gen_scene, SceneConfig};
use gloria::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(err)
}

fn json_to_py<'py>(py: Python<'py>, s: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (s,))
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn from_json<T: serde::de::DeserializeOwned + Default>(s: Option<&str>) -> PyResult<T> {
    match s {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(T::default()),
    }
}

/// Hyperspectral cube stored as a bands × pixels matrix, pixels in raster
/// order.
#[pyclass(name = "Image", module = "gloria_py")]
struct PyImage {
    inner: HsImage,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = HsImage::new(width, height, matrix(rows)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: read_image(&path).map_err(err)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        write_image(&path, &self.inner).map_err(err)
    }

    #[getter]
    fn bands(&self) -> usize {
        self.inner.bands()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    /// Band-major nested list, `rows[band][pixel]`.
    fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.matrix().to_rows()
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<Vec<f64>> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err("pixel outside the image"));
        }
        Ok(self.inner.pixel(x, y).to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Image(bands={}, width={}, height={})",
            self.inner.bands(),
            self.inner.width(),
            self.inner.height()
        )
    }
}

/// Degraded observation pair with the operators that produced it.
#[pyclass(name = "Observations", module = "gloria_py")]
struct PyObservations {
    inner: WaldOutput,
    synthetic: bool,
    snr: (f64, f64),
}

#[pymethods]
impl PyObservations {
    #[getter]
    fn y_m(&self) -> PyImage {
        PyImage {
            inner: self.inner.y_m.clone(),
        }
    }

    #[getter]
    fn y_h(&self) -> PyImage {
        PyImage {
            inner: self.inner.y_h.clone(),
        }
    }

    /// Spectral response matrix as nested rows.
    fn spectral_response(&self) -> Vec<Vec<f64>> {
        self.inner.f.matrix().to_rows()
    }

    /// Reconstructs the super-resolved image. `config` is a solver JSON
    /// document; returns the estimate and a report dictionary.
    #[pyo3(signature = (config = None))]
    fn fuse<'py>(
        &self,
        py: Python<'py>,
        config: Option<&str>,
    ) -> PyResult<(PyImage, Bound<'py, PyAny>)> {
        let sc: SolverConfig = from_json(config)?;
        sc.validate().map_err(err)?;
        let y_m = &self.inner.y_m;
        let layout =
            grid_layout(y_m.width(), y_m.height(), sc.patch_rows, sc.patch_cols).map_err(err)?;
        let gamma = sc
            .gamma
            .unwrap_or_else(|| default_gamma(self.snr.0, self.snr.1, self.synthetic));
        let gammas = uniform_gammas(gamma, layout.len(), sc.gamma_global);
        let problem = Problem::from_observations(
            y_m,
            &self.inner.y_h,
            &self.inner.f,
            &self.inner.g,
            layout,
            sc.params().map_err(err)?,
            gammas,
        )
        .map_err(err)?;
        let report = py
            .detach(|| {
                solve(
                    &problem,
                    sc.solver,
                    &Init::Uniform(sc.seed),
                    sc.stop(),
                    sc.inner_stop(),
                    gamma,
                )
            })
            .map_err(err)?;
        let summary = serde_json::json!({
            "solver": sc.solver.name(),
            "gamma": gamma,
            "iterations": report.iterations,
            "stop_reason": report.stop_reason,
            "final_objective": report.final_objective,
            "objective_trace": report.objective_trace,
            "wall_time": report.wall_time,
        });
        let image = HsImage::new(y_m.width(), y_m.height(), report.x_est).map_err(err)?;
        Ok((
            PyImage { inner: image },
            json_to_py(py, &summary.to_string())?,
        ))
    }
}

/// Synthetic scene with endmember variability; `config` is a scene JSON
/// document (defaults: 30 bands, 48×48, 4 endmembers).
#[pyfunction]
#[pyo3(signature = (seed, config = None))]
fn synth_scene(seed: u64, config: Option<&str>) -> PyResult<PyImage> {
    let cfg: SceneConfig = from_json(config)?;
    let scene = gen_scene(&cfg, seed).map_err(err)?;
    Ok(PyImage { inner: scene.image })
}

/// Wald-protocol degradation of a ground truth; `config` is a simulation
/// JSON document.
#[pyfunction]
#[pyo3(signature = (truth, seed, config = None, synthetic = true))]
fn simulate(
    truth: &PyImage,
    seed: u64,
    config: Option<&str>,
    synthetic: bool,
) -> PyResult<PyObservations> {
    let cfg: WaldConfig = from_json(config)?;
    let inner = wald_simulate(&truth.inner, &cfg, seed).map_err(err)?;
    Ok(PyObservations {
        inner,
        synthetic,
        snr: (cfg.snr_m_db, cfg.snr_h_db),
    })
}

/// PSNR, SAM, ERGAS and UIQI of an estimate against a reference.
#[pyfunction]
#[pyo3(signature = (reference, estimate, unit_peak = false, resolution_ratio = 4.0))]
fn evaluate<'py>(
    py: Python<'py>,
    reference: &PyImage,
    estimate: &PyImage,
    unit_peak: bool,
    resolution_ratio: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let options = MetricOptions {
        unit_peak,
        resolution_ratio,
        ..MetricOptions::default()
    };
    let m = metrics::evaluate(&reference.inner, &estimate.inner, &options).map_err(err)?;
    json_to_py(py, &to_json(&m)?)
}

/// Smooth Schatten-p function `tr((XXᵀ + τI)^{p/2})` of a matrix given as
/// nested rows.
#[pyfunction]
#[pyo3(signature = (x, p = 0.5, tau = 1.0))]
fn phi(x: Vec<Vec<f64>>, p: f64, tau: f64) -> PyResult<f64> {
    let params = SchattenParams::new(p, tau).map_err(err)?;
    regularizer::phi(&matrix(x)?, &params).map_err(err)
}

#[pyfunction]
fn nuclear_norm(x: Vec<Vec<f64>>) -> PyResult<f64> {
    linalg::nuclear_norm(&matrix(x)?).map_err(err)
}

/// Smallest rank capturing `threshold` of the squared singular-value energy.
#[pyfunction]
#[pyo3(signature = (x, threshold = regularizer::DEFAULT_ENERGY_THRESHOLD))]
fn approx_rank(x: Vec<Vec<f64>>, threshold: f64) -> PyResult<usize> {
    regularizer::approx_rank(&matrix(x)?, threshold).map_err(err)
}

/// Local approximate-rank rows, one dictionary per grid size.
#[pyfunction]
#[pyo3(signature = (image, grids, threshold = regularizer::DEFAULT_ENERGY_THRESHOLD))]
fn rank_table<'py>(
    py: Python<'py>,
    image: &PyImage,
    grids: Vec<usize>,
    threshold: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let rows = regularizer::rank_table(&image.inner, &grids, threshold).map_err(err)?;
    json_to_py(py, &to_json(&rows)?)
}

fn run_config(config: &str, out_dir: Option<PathBuf>) -> PyResult<RunConfig> {
    let mut c = RunConfig::from_json(config).map_err(err)?;
    if let Some(out) = out_dir {
        c.out_dir = out;
    }
    Ok(c)
}

/// File-based `simulate` command; returns the scene record.
#[pyfunction]
#[pyo3(signature = (config = "{}", out_dir = None))]
fn run_simulate<'py>(
    py: Python<'py>,
    config: &str,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let c = run_config(config, out_dir)?;
    let record = cli::cmd_simulate(&c).map_err(err)?;
    json_to_py(py, &to_json(&record)?)
}

/// File-based `fuse` command; returns the run report.
#[pyfunction]
#[pyo3(signature = (config = "{}", out_dir = None))]
fn run_fuse<'py>(
    py: Python<'py>,
    config: &str,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let c = run_config(config, out_dir)?;
    let (report, _) = py.detach(|| cli::cmd_fuse(&c)).map_err(err)?;
    json_to_py(py, &to_json(&report)?)
}

#[pymodule]
fn gloria_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyObservations>()?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(nuclear_norm, m)?)?;
    m.add_function(wrap_pyfunction!(approx_rank, m)?)?;
    m.add_function(wrap_pyfunction!(rank_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_fuse, m)?)?;
    Ok(())
}

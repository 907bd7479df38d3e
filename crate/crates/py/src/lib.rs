//! Python bindings: model parameters, the lazy landscape, extremes, hitting
//! probabilities, K-process simulation and batch experiments.

use std::path::PathBuf;

use grem_core::dynamics::{exact_generator, timescales};
use grem_core::env::{self, DenseLandscape, EnergyOracle, Landscape, ModelParams};
use grem_core::experiment::{self, ExperimentConfig};
use grem_core::hitting::{self, KempermanInput};
use grem_core::kprocess::{self, KInit, KParams};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

fn to_py_err(e: grem_core::Error) -> PyErr {
    match e {
        grem_core::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A 2-GREM environment, generated lazily from `(N, p, a, beta, seed)`.
#[pyclass(module = "grem", frozen)]
struct Environment {
    oracle: EnergyOracle,
}

#[pymethods]
impl Environment {
    #[new]
    #[pyo3(signature = (n, p, a, beta, seed=0))]
    fn new(n: u32, p: f64, a: f64, beta: f64, seed: u64) -> PyResult<Self> {
        let oracle = EnergyOracle::new(ModelParams::new(n, p, a, beta, seed)).map_err(to_py_err)?;
        Ok(Environment { oracle })
    }

    /// Derived constants as a dict.
    fn derived<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.oracle.derived())
    }

    /// Time scales for the threshold `L`.
    fn timescales<'py>(&self, py: Python<'py>, l: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &timescales(self.oracle.derived(), l).map_err(to_py_err)?,
        )
    }

    fn xi1(&self, sigma1: u64) -> PyResult<f64> {
        if sigma1 >= self.oracle.derived().level1_states() {
            return Err(PyValueError::new_err("sigma1 out of range"));
        }
        Ok(self.oracle.xi1(sigma1))
    }

    /// Normalized energy `Ξ_σ` of a full configuration index.
    fn xi(&self, sigma: u64) -> PyResult<f64> {
        if sigma >= self.oracle.derived().states() {
            return Err(PyValueError::new_err("sigma out of range"));
        }
        Ok(self.oracle.xi(sigma))
    }

    /// The `k` deepest configurations, deepest first, as a list of dicts.
    fn top_k<'py>(&self, py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyAny>> {
        let records = py
            .detach(|| env::top_k(&self.oracle, k))
            .map_err(to_py_err)?;
        to_py(py, &records)
    }

    /// Escape probability from a first-level state with Gaussian `xi1`.
    fn no_hit(&self, xi1: f64) -> f64 {
        hitting::no_hit(self.oracle.derived(), xi1)
    }

    /// Largest relative deviation of the exact stationary law from Gibbs.
    fn gibbs_check(&self, py: Python<'_>) -> PyResult<f64> {
        py.detach(|| {
            let dense = DenseLandscape::from_oracle(&self.oracle)?;
            Ok(exact_generator(&dense)?.gibbs_rel_err())
        })
        .map_err(to_py_err)
    }
}

/// `E[(1-q)^τ]` for the hitting time of a fixed vertex of the `n`-cube from a uniform start.
#[pyfunction]
fn kemperman_gf(n: u32, q: f64) -> PyResult<f64> {
    hitting::kemperman_gf(&KempermanInput::new(n, q).map_err(to_py_err)?).map_err(to_py_err)
}

/// Simulates a truncated K-process with weights `gamma` and returns its trajectory summary.
#[pyfunction]
#[pyo3(signature = (gamma, horizon, seed=0))]
fn simulate_k<'py>(
    py: Python<'py>,
    gamma: Vec<f64>,
    horizon: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let params = KParams::new(gamma).map_err(to_py_err)?;
    let report = py
        .detach(|| {
            kprocess::simulate_k(
                &params,
                horizon,
                KInit::Uniform,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
        })
        .map_err(to_py_err)?;
    let value = serde_json::json!({
        "fractions": report.fractions(),
        "stationary": params.stationary(),
        "jumps": report.jumps,
    });
    to_py(py, &value)
}

/// Runs an experiment from a config file and returns the manifest.
#[pyfunction]
#[pyo3(signature = (config, out=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: PathBuf,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = ExperimentConfig::from_path(&config).map_err(to_py_err)?;
    if let Some(dir) = out {
        cfg.out = dir;
    }
    let manifest = py.detach(|| experiment::run(&cfg)).map_err(to_py_err)?;
    to_py(py, &manifest)
}

#[pymodule]
fn grem(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BETA_STAR", env::beta_star())?;
    m.add_class::<Environment>()?;
    m.add_function(wrap_pyfunction!(kemperman_gf, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_k, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

//! Python bindings for the synthetic market data workbench.
//!
//! Exposes the return-series container, the three generator families,
//! the fidelity/portfolio/risk evaluations, and the full pipeline.
//! Reports cross the boundary as plain dicts (via their JSON form), so
//! Python callers get native structures without extra dependencies.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use synthfin::fidelity;
use synthfin::generators::{Family, GeneratorConfig, GeneratorModel, SyntheticDataset};
use synthfin::market_data::{
    load_prices, log_returns, make_windows, standardize, CsvSchema, ReturnSeries,
};
use synthfin::pipeline::{cmd_pipeline, RunConfig};
use synthfin::portfolio::{
    estimate_moments, solve_long_only, solve_mean_variance, ReturnTarget,
};
use synthfin::risk::risk_report;
use synthfin::Error;

/// Input/validation problems become ValueError, computation failures
/// RuntimeError — mirroring the CLI's exit codes 2 and 1.
fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Recursively convert a JSON value into native Python objects.
fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.unbind().into_any()
            } else {
                n.as_f64()
                    .ok_or_else(|| PyValueError::new_err("non-finite number in report"))?
                    .into_pyobject(py)?
                    .unbind()
                    .into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into_any()
        }
    })
}

/// Serialize any report type straight into a Python dict.
fn report_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyRuntimeError::new_err(format!("serialization failed: {e}")))?;
    json_to_py(py, &json)
}

fn target_from(value: Option<f64>) -> ReturnTarget {
    match value {
        Some(t) => ReturnTarget::Fixed(t),
        None => ReturnTarget::MinVariance,
    }
}

/// Daily log returns of a set of assets on a shared date axis.
#[pyclass(name = "Returns")]
struct PyReturns {
    inner: ReturnSeries,
}

#[pymethods]
impl PyReturns {
    /// Load a price CSV (`date,close` or `date,<asset>,...`) and take
    /// log returns.
    #[staticmethod]
    fn from_prices_csv(path: PathBuf) -> PyResult<Self> {
        let prices = load_prices(&path, CsvSchema::Auto).map_err(to_py)?;
        let inner = log_returns(&prices).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn assets(&self) -> Vec<String> {
        self.inner.assets.clone()
    }

    #[getter]
    fn dates(&self) -> Vec<String> {
        self.inner.dates.iter().map(|d| d.to_string()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// One asset's return track, by name.
    fn column(&self, asset: &str) -> PyResult<Vec<f64>> {
        let idx = self
            .inner
            .assets
            .iter()
            .position(|a| a == asset)
            .ok_or_else(|| PyValueError::new_err(format!("unknown asset {asset:?}")))?;
        Ok(self.inner.column(idx).to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Returns(assets={:?}, observations={})",
            self.inner.assets,
            self.inner.len()
        )
    }
}

/// A batch of sampled windows, in raw (destandardized) return units.
#[pyclass(name = "SyntheticData")]
struct PySyntheticData {
    inner: SyntheticDataset,
}

#[pymethods]
impl PySyntheticData {
    #[getter]
    fn assets(&self) -> Vec<String> {
        self.inner.assets.clone()
    }

    #[getter]
    fn window_length(&self) -> usize {
        self.inner.window_length
    }

    #[getter]
    fn n_windows(&self) -> usize {
        self.inner.n_windows()
    }

    /// Window `i` as rows of per-asset raw returns: `[t][asset]`.
    fn window(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        if i >= self.inner.n_windows() {
            return Err(PyValueError::new_err(format!(
                "window {i} out of range ({} windows)",
                self.inner.n_windows()
            )));
        }
        let a = self.inner.n_assets();
        let win = &self.inner.windows[i];
        Ok((0..self.inner.window_length)
            .map(|t| {
                (0..a)
                    .map(|asset| {
                        self.inner
                            .standardization
                            .destandardize(asset, win[t * a + asset])
                    })
                    .collect()
            })
            .collect())
    }

    /// Concatenate every window into one return series starting at
    /// `start_date` (YYYY-MM-DD).
    fn to_returns(&self, start_date: &str) -> PyResult<PyReturns> {
        let start = start_date
            .parse()
            .map_err(|_| PyValueError::new_err(format!("bad date {start_date:?}")))?;
        let inner = self.inner.to_return_series(start).map_err(to_py)?;
        Ok(PyReturns { inner })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "SyntheticData(windows={}, window_length={}, assets={:?})",
            self.inner.n_windows(),
            self.inner.window_length,
            self.inner.assets
        )
    }
}

/// A fitted generator of one family: arima_garch, vae, or time_gan.
#[pyclass(name = "Generator")]
struct PyGenerator {
    inner: GeneratorModel,
    log: serde_json::Value,
}

#[pymethods]
impl PyGenerator {
    /// Fit the named family on a return series. Zero network fields
    /// mean "use the family default".
    #[staticmethod]
    #[pyo3(signature = (returns, family, seed, window_length=20, stride=1,
                        hidden_dim=0, latent_dim=0, epochs=0,
                        batch_size=128, learning_rate=1e-3))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        returns: &PyReturns,
        family: &str,
        seed: u64,
        window_length: usize,
        stride: usize,
        hidden_dim: usize,
        latent_dim: usize,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
    ) -> PyResult<Self> {
        let family: Family = serde_json::from_value(serde_json::Value::String(family.into()))
            .map_err(|_| {
                PyValueError::new_err(format!(
                    "unknown family {family:?}; expected arima_garch, vae, or time_gan"
                ))
            })?;
        let config = GeneratorConfig {
            family,
            window_length,
            stride,
            hidden_dim,
            latent_dim,
            epochs,
            batch_size,
            learning_rate,
        }
        .or_family_defaults();
        config.validate().map_err(to_py)?;
        let (inner, log) = GeneratorModel::fit(&returns.inner, &config, seed).map_err(to_py)?;
        let log = serde_json::to_value(&log)
            .map_err(|e| PyRuntimeError::new_err(format!("serialization failed: {e}")))?;
        Ok(Self { inner, log })
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family().to_string()
    }

    #[getter]
    fn assets(&self) -> Vec<String> {
        self.inner.assets().to_vec()
    }

    /// Per-epoch losses recorded during the fit.
    fn training_log(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &self.log)
    }

    fn sample(&self, n_windows: usize, seed: u64) -> PyResult<PySyntheticData> {
        let inner = self.inner.sample(n_windows, seed).map_err(to_py)?;
        Ok(PySyntheticData { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[staticmethod]
    fn from_json(body: &str) -> PyResult<Self> {
        let inner = GeneratorModel::from_json(body).map_err(to_py)?;
        Ok(Self {
            inner,
            log: serde_json::Value::Null,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = GeneratorModel::load(&path).map_err(to_py)?;
        Ok(Self {
            inner,
            log: serde_json::Value::Null,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Generator(family={}, assets={:?})",
            self.inner.family(),
            self.inner.assets()
        )
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
#[pyfunction]
fn ks_statistic(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    fidelity::ks_statistic(&a, &b).map_err(to_py)
}

/// Wasserstein-1 distance between two samples.
#[pyfunction]
fn wasserstein1(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    fidelity::wasserstein1(&a, &b).map_err(to_py)
}

/// Autocorrelation of one track for lags 0..=max_lag.
#[pyfunction]
fn acf(values: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    fidelity::acf(&values, max_lag).map_err(to_py)
}

/// Dynamic-time-warping distance between two tracks.
#[pyfunction]
fn dtw_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    fidelity::dtw_distance(&a, &b).map_err(to_py)
}

/// Fidelity report of a synthetic sample against the real series it
/// was fitted on, as a dict.
#[pyfunction]
#[pyo3(signature = (returns, synthetic, max_lag=10, dtw_pairs=20, seed=0))]
fn fidelity_report(
    py: Python<'_>,
    returns: &PyReturns,
    synthetic: &PySyntheticData,
    max_lag: usize,
    dtw_pairs: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let (std_series, _) = standardize(&returns.inner).map_err(to_py)?;
    let real_windows =
        make_windows(&std_series, synthetic.inner.window_length, 1).map_err(to_py)?;
    let report = fidelity::fidelity_report(
        &real_windows,
        &synthetic.inner.window_set(),
        max_lag,
        dtw_pairs,
        seed,
    )
    .map_err(to_py)?;
    report_to_py(py, &report)
}

/// Mean-variance weights on a return series, as a dict.
#[pyfunction]
#[pyo3(signature = (returns, long_only=false, target=None))]
fn optimal_weights(
    py: Python<'_>,
    returns: &PyReturns,
    long_only: bool,
    target: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let moments = estimate_moments(&returns.inner).map_err(to_py)?;
    let target = target_from(target);
    let weights = if long_only {
        solve_long_only(&moments, target)
    } else {
        solve_mean_variance(&moments, target)
    }
    .map_err(to_py)?;
    report_to_py(py, &weights)
}

/// Per-asset volatility / VaR / ES report, as a list of dicts.
#[pyfunction]
#[pyo3(signature = (returns, confidence=0.95))]
fn risk(py: Python<'_>, returns: &PyReturns, confidence: f64) -> PyResult<Py<PyAny>> {
    let report = risk_report(&returns.inner, confidence).map_err(to_py)?;
    report_to_py(py, &report)
}

/// Run the full pipeline from a JSON config file, write artifacts, and
/// return the summary as a dict.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir=None))]
fn run_pipeline(py: Python<'_>, config_path: PathBuf, out_dir: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let mut config = RunConfig::load(Path::new(&config_path)).map_err(to_py)?;
    if let Some(dir) = out_dir {
        config.out_dir = dir;
    }
    cmd_pipeline(&config).map_err(to_py)?;
    let summary: serde_json::Value =
        synthfin::pipeline::read_json(&config.out_dir, "summary.json").map_err(to_py)?;
    json_to_py(py, &summary)
}

#[pymodule]
fn synthfin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyReturns>()?;
    m.add_class::<PySyntheticData>()?;
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(ks_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    m.add_function(wrap_pyfunction!(acf, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_report, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_weights, m)?)?;
    m.add_function(wrap_pyfunction!(risk, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}

//! Python module `lsgt`: fitting, forecasting, metrics and simulation.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lsgt::data::TimeSeries as CoreSeries;
use lsgt::dist::{hash_str, stream_key, RngStream};
use lsgt::forecast::{forecast_stream, simulate_paths, ForecastConfig, ForecastResult, DEFAULT_QUANTILES};
use lsgt::harness::{posterior_summary, run_benchmark, ConfigOverrides, RunConfig};
use lsgt::model::{ModelKind, PriorConfig, SeasonalPrior, VarianceMode};
use lsgt::sampler::{fit as core_fit, Grids, PosteriorSamples, SamplerConfig};
use lsgt::simulate::{sample_prior_predictive, ParameterOverrides, SimulationConfig};

fn py_err(e: lsgt::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "TimeSeries", module = "lsgt", frozen)]
struct PyTimeSeries {
    inner: CoreSeries,
}

#[pymethods]
impl PyTimeSeries {
    #[new]
    #[pyo3(signature = (id, values, period=1, horizon=6, category=None))]
    fn new(id: String, values: Vec<f64>, period: usize, horizon: usize, category: Option<String>) -> PyResult<Self> {
        let inner = CoreSeries::new(id, values, period, horizon, category).map_err(py_err)?;
        Ok(PyTimeSeries { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    #[getter]
    fn period(&self) -> usize {
        self.inner.period
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("TimeSeries(id={:?}, len={}, period={})", self.inner.id, self.inner.len(), self.inner.period)
    }
}

#[pyclass(name = "Forecast", module = "lsgt", frozen)]
struct PyForecast {
    inner: ForecastResult,
}

#[pymethods]
impl PyForecast {
    /// Per-horizon median of the simulated paths.
    #[getter]
    fn point(&self) -> Vec<f64> {
        self.inner.point.clone()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.clone()
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.inner.n_paths
    }

    #[getter]
    fn floor_events(&self) -> u64 {
        self.inner.floor_events
    }

    /// Mapping from quantile level to per-horizon values.
    #[getter]
    fn quantiles<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for q in &self.inner.quantiles {
            d.set_item(q.level, q.values.clone())?;
        }
        Ok(d)
    }

    fn quantile(&self, level: f64) -> PyResult<Vec<f64>> {
        self.inner
            .quantile(level)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyValueError::new_err(format!("level {level} was not forecast")))
    }
}

#[pyclass(name = "Posterior", module = "lsgt", frozen)]
struct PyPosterior {
    samples: PosteriorSamples,
    values: Vec<f64>,
    seed: u64,
}

#[pymethods]
impl PyPosterior {
    fn __len__(&self) -> usize {
        self.samples.len()
    }

    #[getter]
    fn series_id(&self) -> &str {
        &self.samples.series_id
    }

    /// Draws of one scalar parameter, e.g. `"alpha"` or `"log_s_init[2]"`.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let pick: Box<dyn Fn(&lsgt::model::ParameterDraw) -> f64> = match name {
            "nu" => Box::new(|d| d.nu),
            "gamma" => Box::new(|d| d.gamma),
            "rho" => Box::new(|d| d.rho),
            "lambda" => Box::new(|d| d.lambda),
            "alpha" => Box::new(|d| d.alpha),
            "beta" => Box::new(|d| d.beta),
            "zeta" => Box::new(|d| d.zeta),
            "chi2" => Box::new(|d| d.chi2),
            "phi" => Box::new(|d| d.phi),
            "tau" => Box::new(|d| d.tau),
            "b1" => Box::new(|d| d.b1),
            other => {
                let i = other
                    .strip_prefix("log_s_init[")
                    .and_then(|s| s.strip_suffix(']'))
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|i| *i < self.samples.period.max(1))
                    .ok_or_else(|| PyValueError::new_err(format!("unknown parameter '{other}'")))?;
                Box::new(move |d| d.log_s_init[i])
            }
        };
        Ok(self.samples.column(pick))
    }

    /// Posterior mean, sd, 5%, 50% and 95% quantiles per parameter.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for p in posterior_summary(&self.samples) {
            let row = PyDict::new(py);
            row.set_item("mean", p.mean)?;
            row.set_item("sd", p.sd)?;
            row.set_item("q05", p.q05)?;
            row.set_item("median", p.median)?;
            row.set_item("q95", p.q95)?;
            d.set_item(p.name, row)?;
        }
        Ok(d)
    }

    #[getter]
    fn smoothing_acceptance(&self) -> Option<f64> {
        self.samples.diagnostics.smoothing_acceptance()
    }

    #[pyo3(signature = (horizon, quantiles=None, paths_per_draw=2))]
    fn forecast(&self, py: Python<'_>, horizon: usize, quantiles: Option<Vec<f64>>, paths_per_draw: usize) -> PyResult<PyForecast> {
        let cfg = ForecastConfig {
            quantiles: quantiles.unwrap_or_else(|| DEFAULT_QUANTILES.to_vec()),
            paths_per_draw,
            ..ForecastConfig::new(horizon)
        };
        let rng = forecast_stream(self.seed, &self.samples.series_id);
        let inner = py
            .detach(|| simulate_paths(&self.samples, &self.values, &cfg, &rng))
            .map_err(py_err)?;
        Ok(PyForecast { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.samples).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

fn parse<T: std::str::FromStr<Err = lsgt::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// Runs the Gibbs sampler on one series.
#[pyfunction]
#[pyo3(signature = (series, model="lgt", variance="hetero", seasonal_prior="horseshoe", iterations=5000, burn_in=2500, thinning=1, chains=2, seed=0))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    series: &PyTimeSeries,
    model: &str,
    variance: &str,
    seasonal_prior: &str,
    iterations: usize,
    burn_in: usize,
    thinning: usize,
    chains: usize,
    seed: u64,
) -> PyResult<PyPosterior> {
    let kind: ModelKind = parse(model)?;
    let mut prior = PriorConfig::for_values(&series.inner.values, kind, parse::<VarianceMode>(variance)?);
    prior.seasonal_prior = parse::<SeasonalPrior>(seasonal_prior)?;
    let cfg = SamplerConfig {
        iterations,
        burn_in,
        thinning,
        chains,
        seed,
        ..Default::default()
    };
    let samples = py.detach(|| core_fit(&series.inner, &prior, &cfg)).map_err(py_err)?;
    Ok(PyPosterior {
        samples,
        values: series.inner.values.clone(),
        seed,
    })
}

#[pyfunction]
fn smape(actual: Vec<f64>, forecast: Vec<f64>) -> PyResult<f64> {
    lsgt::metrics::smape(&actual, &forecast).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (actual, forecast, insample, period=1))]
fn mase(actual: Vec<f64>, forecast: Vec<f64>, insample: Vec<f64>, period: usize) -> PyResult<f64> {
    lsgt::metrics::mase(&actual, &forecast, &insample, period).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (actual, lower, upper, alpha, insample, period=1))]
fn msis(actual: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>, alpha: f64, insample: Vec<f64>, period: usize) -> PyResult<f64> {
    lsgt::metrics::msis(&actual, &lower, &upper, alpha, &insample, period).map_err(py_err)
}

/// Draws a series from the prior predictive; `params` fixes named
/// parameters, e.g. `{"alpha": 0.3}`.
#[pyfunction]
#[pyo3(signature = (length, period=1, model="lgt", variance="hetero", chi2_prior=(3.0, 2.0), initial=100.0, params=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    length: usize,
    period: usize,
    model: &str,
    variance: &str,
    chi2_prior: (f64, f64),
    initial: f64,
    params: Option<std::collections::HashMap<String, f64>>,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let mut prior = PriorConfig {
        model_kind: parse(model)?,
        variance_mode: parse(variance)?,
        chi2_prior: Some(chi2_prior),
        ..Default::default()
    };
    prior.s_gamma = initial / 100.0;
    prior.s_b1 = initial / 100.0;
    let overrides: ParameterOverrides = match params {
        Some(map) => serde_json::from_value(serde_json::to_value(map).map_err(|e| PyValueError::new_err(e.to_string()))?)
            .map_err(|e| PyValueError::new_err(format!("bad params: {e}")))?,
        None => ParameterOverrides::default(),
    };
    let grids = Grids::for_prior(&prior).map_err(py_err)?;
    let sim = SimulationConfig {
        initial_value: initial,
        ..SimulationConfig::new(length, period)
    };
    let mut rng = RngStream::new(seed, stream_key(&[hash_str("simulate"), 0]));
    let (_, y) = sample_prior_predictive(&prior, &grids, &overrides, &sim, &mut rng).map_err(py_err)?;
    Ok(y)
}

/// Runs the benchmark described by a TOML config file and returns the
/// summary as a JSON string.
#[pyfunction]
fn benchmark(py: Python<'_>, config_path: &str) -> PyResult<String> {
    let mut cfg = RunConfig::default();
    cfg.merge(&ConfigOverrides::load(config_path).map_err(py_err)?).map_err(py_err)?;
    let summary = py.detach(|| run_benchmark(&cfg)).map_err(py_err)?;
    serde_json::to_string(&summary).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "lsgt")]
fn lsgt_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTimeSeries>()?;
    m.add_class::<PyPosterior>()?;
    m.add_class::<PyForecast>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(smape, m)?)?;
    m.add_function(wrap_pyfunction!(mase, m)?)?;
    m.add_function(wrap_pyfunction!(msis, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

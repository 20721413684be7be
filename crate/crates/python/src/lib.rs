//! Python bindings for tgarma-core.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tgarma_core::assess::{criteria, mape as core_mape, quantile_residuals_at_mean, quantile_residuals_averaged};
use tgarma_core::forecast::{forecast as core_forecast, rolling_one_step, ForecastOptions, ForecastResult, PointMethod};
use tgarma_core::inference::{fit as core_fit, summarize, McmcConfig, ModelOptions, PriorSpec, TgarmaPosterior};
use tgarma_core::inference::{FitResult, FitSummary};
use tgarma_core::model::{gamma_logpdf as core_gamma, invgauss_logpdf as core_ig};
use tgarma_core::simlab::simulate_tgarma;
use tgarma_core::{transform, Family, ModelOrder, ParamVector, Series, TgarmaError};

fn to_py(e: TgarmaError) -> PyErr {
    match e {
        TgarmaError::Domain(_) | TgarmaError::Dimension(_) | TgarmaError::Config(_) | TgarmaError::Data { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn family(name: &str) -> PyResult<Family> {
    name.parse().map_err(to_py)
}

#[pyfunction]
fn boxcox(y: f64, lam: f64) -> PyResult<f64> {
    transform::boxcox(y, lam).map_err(to_py)
}

#[pyfunction]
fn inv_boxcox(z: f64, lam: f64) -> PyResult<f64> {
    transform::inv_boxcox(z, lam).map_err(to_py)
}

#[pyfunction]
fn gamma_logpdf(y: f64, mu: f64, nu: f64) -> PyResult<f64> {
    core_gamma(y, mu, nu).map_err(to_py)
}

#[pyfunction]
fn invgauss_logpdf(y: f64, mu: f64, sigma2: f64) -> PyResult<f64> {
    core_ig(y, mu, sigma2).map_err(to_py)
}

#[pyfunction]
fn mape(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    core_mape(&actual, &predicted).map_err(to_py)
}

/// Simulated series from given parameters.
#[pyfunction]
#[pyo3(signature = (beta0, phi, theta, u, lam, n, family="gamma", seed=1, floor_c=0.01))]
#[allow(clippy::too_many_arguments)]
fn simulate(beta0: f64, phi: Vec<f64>, theta: Vec<f64>, u: f64, lam: f64, n: usize, family: &str, seed: u64, floor_c: f64) -> PyResult<Vec<f64>> {
    let order = ModelOrder::new(phi.len(), theta.len());
    let params = ParamVector { beta0, phi, theta, u, lambda: lam };
    let s = simulate_tgarma(&params, order, self::family(family)?, n, floor_c, seed).map_err(to_py)?;
    Ok(s.values().to_vec())
}

fn summary_dict<'py>(py: Python<'py>, s: &FitSummary) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    for p in &s.parameters {
        let d = PyDict::new(py);
        d.set_item("mean", p.mean)?;
        d.set_item("sd", p.sd)?;
        d.set_item("hpd_lower", p.hpd_lower)?;
        d.set_item("hpd_upper", p.hpd_upper)?;
        d.set_item("geweke_z", p.geweke_z)?;
        out.set_item(&p.parameter, d)?;
    }
    Ok(out)
}

fn forecast_dict<'py>(py: Python<'py>, f: &ForecastResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("point", f.point.clone())?;
    d.set_item("lower", f.lower.clone())?;
    d.set_item("upper", f.upper.clone())?;
    d.set_item("level", f.level)?;
    d.set_item("draws_used", f.draws_used)?;
    d.set_item("draws_excluded", f.draws_excluded)?;
    Ok(d)
}

/// A fitted TGARMA model: the posterior chain plus the data it came from.
#[pyclass(module = "tgarma")]
struct Fit {
    post: TgarmaPosterior,
    result: FitResult,
}

#[pymethods]
impl Fit {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.result.chain.names()
    }

    #[getter]
    fn acceptance_rate(&self) -> f64 {
        self.result.chain.acceptance_rate()
    }

    #[getter]
    fn mode(&self) -> Vec<f64> {
        self.result.mode.params.to_vec()
    }

    /// Stored draws, one row per draw, columns as in `names`.
    fn draws(&self) -> Vec<Vec<f64>> {
        self.result.chain.draws.clone()
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        summary_dict(py, &summarize(&self.result.chain))
    }

    /// DIC, EBIC and the sum of log CPO.
    fn criteria<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = criteria(&self.result.chain, &self.post).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("dic", c.dic)?;
        d.set_item("ebic", c.ebic)?;
        d.set_item("cpo", c.cpo)?;
        d.set_item("p_d", c.p_d)?;
        d.set_item("n_terms", c.n_eff_terms)?;
        Ok(d)
    }

    #[pyo3(signature = (horizon=1, level=0.95, point="mean", predictive=false, seed=1))]
    fn forecast<'py>(&self, py: Python<'py>, horizon: usize, level: f64, point: &str, predictive: bool, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let point: PointMethod = point.parse().map_err(to_py)?;
        let opts = ForecastOptions { horizon, level, point, predictive, seed, keep_draws: false };
        let f = core_forecast(&self.result.chain, self.post.raw(), self.post.options.floor_c, &opts).map_err(to_py)?;
        forecast_dict(py, &f)
    }

    /// One-step forecasts of the trailing `len(full) - len(training data)`
    /// points of `full`, whose head must be the training data.
    #[pyo3(signature = (full, level=0.95, point="mean"))]
    fn one_step<'py>(&self, py: Python<'py>, full: Vec<f64>, level: f64, point: &str) -> PyResult<Bound<'py, PyDict>> {
        let n = self.post.raw().len();
        if full.len() <= n || full[..n] != *self.post.raw().values() {
            return Err(PyValueError::new_err("full series must extend the training data"));
        }
        let holdout = full.len() - n;
        let point: PointMethod = point.parse().map_err(to_py)?;
        let full = Series::new(full).map_err(to_py)?;
        let opts = ForecastOptions { level, point, ..Default::default() };
        let f = rolling_one_step(&self.result.chain, &full, holdout, self.post.options.floor_c, &opts).map_err(to_py)?;
        let d = forecast_dict(py, &f)?;
        d.set_item("mape", core_mape(&full.values()[n..], &f.point).map_err(to_py)?)?;
        Ok(d)
    }

    #[pyo3(signature = (maxlag=20, averaged=false))]
    fn residuals<'py>(&self, py: Python<'py>, maxlag: usize, averaged: bool) -> PyResult<Bound<'py, PyDict>> {
        let r = if averaged {
            quantile_residuals_averaged(&self.result.chain, &self.post, maxlag)
        } else {
            quantile_residuals_at_mean(&self.result.chain, &self.post, maxlag)
        }
        .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("residuals", r.residuals)?;
        d.set_item("acf", r.acf)?;
        d.set_item("pacf", r.pacf)?;
        d.set_item("clamped", r.clamped)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit({} {}, draws={}, acceptance={:.3})",
            self.post.family,
            self.post.order,
            self.result.chain.len(),
            self.result.chain.acceptance_rate()
        )
    }
}

/// Posterior mode search followed by random-walk Metropolis.
#[pyfunction]
#[pyo3(signature = (data, p=1, q=0, family="gamma", draws=5000, burn_in=1000, thin=3, seed=1, lambda_fixed=None, include_jacobian=true, floor_c=0.01, prior_var=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: Vec<f64>,
    p: usize,
    q: usize,
    family: &str,
    draws: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    lambda_fixed: Option<f64>,
    include_jacobian: bool,
    floor_c: f64,
    prior_var: Option<f64>,
) -> PyResult<Fit> {
    let order = ModelOrder::new(p, q);
    let family = self::family(family)?;
    let series = Series::new(data).map_err(to_py)?;
    let priors = prior_var.map_or_else(|| PriorSpec::default_for(order), |v| PriorSpec::flat(order, v));
    let options = ModelOptions { floor_c, include_jacobian, lambda_fixed };
    let post = TgarmaPosterior::new(series, order, family, priors, options).map_err(to_py)?;
    let mcmc = McmcConfig { draws, burn_in, thin, seed, ..McmcConfig::default() };
    let result = py.detach(|| core_fit(&post, None, &mcmc)).map_err(to_py)?;
    Ok(Fit { post, result })
}

#[pymodule]
fn tgarma(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(boxcox, m)?)?;
    m.add_function(wrap_pyfunction!(inv_boxcox, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_logpdf, m)?)?;
    m.add_function(wrap_pyfunction!(invgauss_logpdf, m)?)?;
    m.add_function(wrap_pyfunction!(mape, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_class::<Fit>()?;
    Ok(())
}

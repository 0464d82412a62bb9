//! Python module `heston_condvar`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use condvar::estimator::{self, CondMomentResult, EstimatorOptions, OuDiagnostic, Rating, Route};
use condvar::kernel;
use condvar::model;
use condvar::montecarlo::{self, Bandwidth, McConfig};
use condvar::quadrature::Tolerances;
use condvar::series;

create_exception!(heston_condvar, HestonError, PyValueError);

fn err(e: condvar::Error) -> PyErr {
    HestonError::new_err(e.to_string())
}

/// Validated model constants `(gamma, k, theta, alpha)`.
#[pyclass(frozen, skip_from_py_object, name = "HestonParams", module = "heston_condvar")]
#[derive(Clone, Copy)]
struct PyHestonParams(model::HestonParams);

#[pymethods]
impl PyHestonParams {
    #[new]
    fn new(gamma: f64, k: f64, theta: f64, alpha: f64) -> PyResult<Self> {
        model::HestonParams::new(gamma, k, theta, alpha).map(Self).map_err(err)
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn k(&self) -> f64 {
        self.0.k()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    fn feller_ratio(&self) -> f64 {
        self.0.feller_ratio()
    }

    fn __repr__(&self) -> String {
        format!(
            "HestonParams(gamma={}, k={}, theta={}, alpha={})",
            self.0.gamma(),
            self.0.k(),
            self.0.theta(),
            self.0.alpha()
        )
    }
}

/// Initial return distribution.
#[pyclass(frozen, skip_from_py_object, name = "Distribution", module = "heston_condvar")]
#[derive(Clone, Copy)]
struct PyDistribution(model::InitialReturnDistribution);

#[pymethods]
impl PyDistribution {
    #[staticmethod]
    fn uniform(half_width: f64) -> PyResult<Self> {
        model::InitialReturnDistribution::uniform(half_width)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn gaussian(m: f64) -> PyResult<Self> {
        model::InitialReturnDistribution::gaussian(m).map(Self).map_err(err)
    }

    #[staticmethod]
    fn dirac() -> Self {
        Self(model::InitialReturnDistribution::Dirac)
    }

    #[staticmethod]
    fn cauchy(m: f64) -> PyResult<Self> {
        model::InitialReturnDistribution::cauchy(m).map(Self).map_err(err)
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn __repr__(&self) -> String {
        format!("Distribution({:?})", self.0)
    }
}

fn options(abs_tol: f64, rel_tol: f64, route: &str, symmetry_check: bool) -> PyResult<EstimatorOptions> {
    let route = match route {
        "kernel" => Route::Kernel,
        "fastpath" => Route::Fastpath,
        other => return Err(HestonError::new_err(format!("unknown route `{other}`"))),
    };
    Ok(EstimatorOptions {
        route,
        symmetry_check,
        ..EstimatorOptions::with_tolerances(Tolerances::new(abs_tol, rel_tol).map_err(err)?)
    })
}

fn result_dict<'py>(py: Python<'py>, r: &CondMomentResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    d.set_item("f", r.f)?;
    d.set_item("mean", r.mean)?;
    d.set_item("mean_abs_error", r.mean_abs_error)?;
    d.set_item("variance", r.variance)?;
    d.set_item("variance_abs_error", r.variance_abs_error)?;
    d.set_item("method", r.method.as_str())?;
    d.set_item("imag_residue", r.imag_residue)?;
    Ok(d)
}

/// Conditional mean (and optionally variance) of `v(t)` given `f(t) = f`.
#[pyfunction]
#[pyo3(signature = (params, dist, t, f, with_variance=false, abs_tol=1e-10, rel_tol=1e-8, route="kernel", symmetry_check=false))]
#[allow(clippy::too_many_arguments)]
fn cond_moments<'py>(
    py: Python<'py>,
    params: &PyHestonParams,
    dist: &PyDistribution,
    t: f64,
    f: f64,
    with_variance: bool,
    abs_tol: f64,
    rel_tol: f64,
    route: &str,
    symmetry_check: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = options(abs_tol, rel_tol, route, symmetry_check)?;
    let (p, d) = (params.0, dist.0);
    let r = py
        .detach(|| estimator::cond_moments(&p, &d, t, f, &opts, with_variance))
        .map_err(err)?;
    result_dict(py, &r)
}

/// `E[v(t) | f(t) = f]` as a float.
#[pyfunction]
#[pyo3(signature = (params, dist, t, f, abs_tol=1e-10, rel_tol=1e-8))]
fn cond_mean(
    py: Python<'_>,
    params: &PyHestonParams,
    dist: &PyDistribution,
    t: f64,
    f: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> PyResult<f64> {
    let opts = options(abs_tol, rel_tol, "kernel", false)?;
    let (p, d) = (params.0, dist.0);
    py.detach(|| estimator::cond_mean(&p, &d, t, f, &opts))
        .map(|r| r.mean)
        .map_err(err)
}

/// `Var(v(t) | f(t) = f)` as a float.
#[pyfunction]
#[pyo3(signature = (params, dist, t, f, abs_tol=1e-10, rel_tol=1e-8))]
fn cond_variance(
    py: Python<'_>,
    params: &PyHestonParams,
    dist: &PyDistribution,
    t: f64,
    f: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> PyResult<f64> {
    let opts = options(abs_tol, rel_tol, "kernel", false)?;
    let (p, d) = (params.0, dist.0);
    py.detach(|| estimator::cond_variance(&p, &d, t, f, &opts))
        .map(|r| r.variance.unwrap_or(f64::NAN))
        .map_err(err)
}

/// Evaluates every `(t, f)` pair with `t` outermost.
#[pyfunction]
#[pyo3(signature = (params, dist, ts, fs, with_variance=false, abs_tol=1e-10, rel_tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn cond_moments_grid<'py>(
    py: Python<'py>,
    params: &PyHestonParams,
    dist: &PyDistribution,
    ts: Vec<f64>,
    fs: Vec<f64>,
    with_variance: bool,
    abs_tol: f64,
    rel_tol: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let opts = options(abs_tol, rel_tol, "kernel", false)?;
    let (p, d) = (params.0, dist.0);
    let results = py.detach(|| estimator::cond_moments_grid(&p, &d, &ts, &fs, &opts, with_variance));
    results.into_iter().map(|r| result_dict(py, &r.map_err(err)?)).collect()
}

/// `(K0, K1, K2)` at `xi = 0`.
#[pyfunction]
fn riccati_kernel(params: &PyHestonParams, t: f64, mu: f64) -> (Complex64, Complex64, Complex64) {
    let k = kernel::riccati_kernel(&params.0, t, mu);
    (k.k0, k.k1, k.k2)
}

/// Truncated small-time series of the conditional mean (Gaussian data of width `m`).
#[pyfunction]
#[pyo3(signature = (params, m, t, f, order=4))]
fn taylor_cond_mean(params: &PyHestonParams, m: f64, t: f64, f: f64, order: usize) -> PyResult<f64> {
    series::taylor_cond_mean(&params.0, m, t, f, order)
        .map(|e| e.value)
        .map_err(err)
}

/// Minimum point of the order-4 series in `f`.
#[pyfunction]
fn taylor_argmin(params: &PyHestonParams, m: f64, t: f64) -> PyResult<f64> {
    series::taylor_argmin(&params.0, m, t).map_err(err)
}

/// `f / V(t, f)`, or `None` when `V` vanishes.
#[pyfunction]
#[pyo3(signature = (params, dist, t, f, abs_tol=1e-10, rel_tol=1e-8))]
fn rating_index(
    py: Python<'_>,
    params: &PyHestonParams,
    dist: &PyDistribution,
    t: f64,
    f: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> PyResult<Option<f64>> {
    let opts = options(abs_tol, rel_tol, "kernel", false)?;
    let (p, d) = (params.0, dist.0);
    match py
        .detach(|| estimator::rating_index(&p, &d, t, f, &opts))
        .map_err(err)?
    {
        Rating::Value { index, .. } => Ok(Some(index)),
        Rating::Undefined => Ok(None),
    }
}

/// Positive `mu^4` coefficient when the constant-diffusion variant diverges, else `None`.
#[pyfunction]
fn ou_divergence_check(params: &PyHestonParams, t: f64) -> PyResult<Option<f64>> {
    match estimator::ou_divergence_check(&params.0, t).map_err(err)? {
        OuDiagnostic::Applicable => Ok(None),
        OuDiagnostic::Divergent { coefficient } => Ok(Some(coefficient)),
    }
}

fn mc_config(n_paths: usize, n_steps: usize, seed: u64, bandwidth: Option<f64>) -> McConfig {
    McConfig {
        n_paths,
        n_steps,
        seed,
        bandwidth: bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
        ..McConfig::default()
    }
}

/// Terminal `(f, v)` pairs of `n_paths` simulated paths.
#[pyfunction]
#[pyo3(signature = (params, dist, t, n_paths, n_steps=1000, seed=0))]
fn simulate_terminal(
    py: Python<'_>,
    params: &PyHestonParams,
    dist: &PyDistribution,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64)>> {
    let cfg = mc_config(n_paths, n_steps, seed, None);
    let (p, d) = (params.0, dist.0);
    py.detach(|| montecarlo::simulate_terminal(&p, &d, t, &cfg))
        .map(|s| s.pairs)
        .map_err(err)
}

/// Kernel-regression estimates of the conditional moments from a fresh simulation.
#[pyfunction]
#[pyo3(signature = (params, dist, t, fs, n_paths, n_steps=1000, seed=0, bandwidth=None))]
#[allow(clippy::too_many_arguments)]
fn mc_conditional_moments<'py>(
    py: Python<'py>,
    params: &PyHestonParams,
    dist: &PyDistribution,
    t: f64,
    fs: Vec<f64>,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    bandwidth: Option<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = mc_config(n_paths, n_steps, seed, bandwidth);
    let (p, d) = (params.0, dist.0);
    let points = py
        .detach(|| {
            let sample = montecarlo::simulate_terminal(&p, &d, t, &cfg)?;
            montecarlo::conditional_moments(&sample, &fs, cfg.bandwidth)
        })
        .map_err(err)?;
    points
        .iter()
        .map(|pt| {
            let dict = PyDict::new(py);
            dict.set_item("f", pt.f)?;
            dict.set_item("mean", pt.mean)?;
            dict.set_item("variance", pt.variance)?;
            dict.set_item("se_mean", pt.se_mean)?;
            dict.set_item("se_variance", pt.se_variance)?;
            dict.set_item("effective_n", pt.effective_n)?;
            dict.set_item("insufficient_local_data", pt.insufficient_local_data)?;
            Ok(dict)
        })
        .collect()
}

#[pymodule]
fn heston_condvar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HestonError", m.py().get_type::<HestonError>())?;
    m.add_class::<PyHestonParams>()?;
    m.add_class::<PyDistribution>()?;
    m.add_function(wrap_pyfunction!(cond_moments, m)?)?;
    m.add_function(wrap_pyfunction!(cond_mean, m)?)?;
    m.add_function(wrap_pyfunction!(cond_variance, m)?)?;
    m.add_function(wrap_pyfunction!(cond_moments_grid, m)?)?;
    m.add_function(wrap_pyfunction!(riccati_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_cond_mean, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_argmin, m)?)?;
    m.add_function(wrap_pyfunction!(rating_index, m)?)?;
    m.add_function(wrap_pyfunction!(ou_divergence_check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_terminal, m)?)?;
    m.add_function(wrap_pyfunction!(mc_conditional_moments, m)?)?;
    Ok(())
}

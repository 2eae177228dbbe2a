//! Python bindings: diffusion and drift definitions, classification,
//! simulation and the command-line entry point.

use affine_regime::criteria::{self, ClassifyOptions};
use affine_regime::model::{DiffusionSpec, DriftSpec, Envelope, Matrix, MatrixNorm, PeriodicForm, DEFAULT_QUAD_TOL};
use affine_regime::simulate::{PathEnsemble, Scheme, SimConfig};
use affine_regime::stats::{self, StatsConfig};
use affine_regime::{linalg, special, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

type Rows = Vec<Vec<f64>>;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::InvalidSpec(_) | Error::Config(_) | Error::Grid(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: &Rows) -> PyResult<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("expected a non-empty rectangular list of rows"));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &Matrix) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Serialize through JSON into plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Diffusion", frozen)]
pub struct PyDiffusion {
    inner: DiffusionSpec,
}

fn envelope(e: Envelope, pattern: &Rows) -> PyResult<PyDiffusion> {
    DiffusionSpec::envelope(e, matrix(pattern)?).map(|inner| PyDiffusion { inner }).map_err(to_py_err)
}

#[pymethods]
impl PyDiffusion {
    #[staticmethod]
    fn constant(matrix_rows: Rows) -> PyResult<Self> {
        DiffusionSpec::constant(matrix(&matrix_rows)?).map(|inner| Self { inner }).map_err(to_py_err)
    }

    /// `scale·e^{−rate·t}·pattern`
    #[staticmethod]
    fn exp_decay(scale: f64, rate: f64, pattern: Rows) -> PyResult<Self> {
        envelope(Envelope::ExpDecay { scale, rate }, &pattern)
    }

    /// `sqrt(γ / ln(e+t))·pattern`
    #[staticmethod]
    fn log_power(gamma: f64, pattern: Rows) -> PyResult<Self> {
        envelope(Envelope::LogPower { gamma }, &pattern)
    }

    /// `scale·(1+t)^exponent·pattern`
    #[staticmethod]
    fn power_law(scale: f64, exponent: f64, pattern: Rows) -> PyResult<Self> {
        envelope(Envelope::PowerLaw { scale, exponent }, &pattern)
    }

    /// `scale·ln(e+t)^exponent·pattern`
    #[staticmethod]
    fn log_grow(scale: f64, exponent: f64, pattern: Rows) -> PyResult<Self> {
        envelope(Envelope::LogGrow { scale, exponent }, &pattern)
    }

    #[staticmethod]
    fn table(times: Vec<f64>, values: Vec<Rows>) -> PyResult<Self> {
        let values = values.iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        DiffusionSpec::table(times, values).map(|inner| Self { inner }).map_err(to_py_err)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    fn eval(&self, t: f64) -> PyResult<Rows> {
        self.inner.eval(t).map(|m| rows(&m)).map_err(to_py_err)
    }

    /// `∫_a^b ‖σ‖²_F`.
    fn intensity(&self, a: f64, b: f64) -> PyResult<f64> {
        self.inner.intensity(a, b, MatrixNorm::Frobenius, DEFAULT_QUAD_TOL).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("Diffusion({:?})", self.inner.form())
    }
}

#[pyclass(name = "Drift", frozen)]
pub struct PyDrift {
    inner: DriftSpec,
}

#[pymethods]
impl PyDrift {
    #[staticmethod]
    fn constant(matrix_rows: Rows) -> PyResult<Self> {
        DriftSpec::constant(matrix(&matrix_rows)?).map(|inner| Self { inner }).map_err(to_py_err)
    }

    /// `A(t) = mean + Σ_k cos[k]·cos(kωt) + sin[k]·sin(kωt)` with `ω = 2π/period`.
    #[staticmethod]
    #[pyo3(signature = (period, mean, cos = Vec::new(), sin = Vec::new()))]
    fn fourier(period: f64, mean: Rows, cos: Vec<Rows>, sin: Vec<Rows>) -> PyResult<Self> {
        let form = PeriodicForm::Fourier {
            mean: matrix(&mean)?,
            cos: cos.iter().map(matrix).collect::<PyResult<_>>()?,
            sin: sin.iter().map(matrix).collect::<PyResult<_>>()?,
        };
        DriftSpec::periodic(period, form).map(|inner| Self { inner }).map_err(to_py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, t: f64) -> Rows {
        rows(&self.inner.eval(t))
    }

    /// `(Ψ(T), ρ(Ψ(T)))` for a periodic drift.
    #[pyo3(signature = (tol = 1e-10))]
    fn monodromy(&self, tol: f64) -> PyResult<(Rows, f64)> {
        let DriftSpec::Periodic(p) = &self.inner else {
            return Err(PyValueError::new_err("monodromy needs a periodic drift"));
        };
        let m = linalg::monodromy(p, tol).map_err(to_py_err)?;
        Ok((rows(&m.psi_t), m.rho))
    }

    fn __repr__(&self) -> String {
        format!("Drift({:?})", self.inner)
    }
}

#[pyclass(name = "Ensemble", frozen)]
pub struct PyEnsemble {
    inner: PathEnsemble,
}

#[pymethods]
impl PyEnsemble {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn n_paths(&self) -> usize {
        self.inner.n_paths()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds()
    }

    fn states(&self, path: usize) -> PyResult<Rows> {
        self.check(path)?;
        Ok((0..self.inner.times.len()).map(|k| self.inner.state(path, k).to_vec()).collect())
    }

    fn norm(&self, path: usize) -> PyResult<Vec<f64>> {
        self.check(path)?;
        Ok(self.inner.paths[path].norm.clone())
    }

    fn running_max(&self, path: usize) -> PyResult<Vec<f64>> {
        self.check(path)?;
        Ok(self.inner.paths[path].running_max.clone())
    }

    fn avg_sq(&self, path: usize) -> PyResult<Vec<f64>> {
        self.check(path)?;
        Ok(self.inner.paths[path].avg_sq.clone())
    }

    /// Ensemble mean of `‖X‖²` and its standard error at every recorded time.
    fn mean_sq(&self) -> (Vec<f64>, Vec<f64>) {
        let c = stats::ensemble_mean_sq(&self.inner);
        (c.mean, c.std_error)
    }

    fn __len__(&self) -> usize {
        self.inner.n_paths()
    }
}

impl PyEnsemble {
    fn check(&self, path: usize) -> PyResult<()> {
        if path < self.inner.n_paths() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("path {path} out of range")))
        }
    }
}

/// Regime verdict as a dictionary.
#[pyfunction]
#[pyo3(signature = (diffusion, drift, h = 1.0))]
fn classify<'py>(
    py: Python<'py>,
    diffusion: PyRef<'_, PyDiffusion>,
    drift: PyRef<'_, PyDrift>,
    h: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = ClassifyOptions { h, ..ClassifyOptions::default() };
    let v = criteria::classify_with(&diffusion.inner, &drift.inner, &opts).map_err(to_py_err)?;
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (diffusion, eps, h = 1.0))]
fn decide_s_prime<'py>(
    py: Python<'py>,
    diffusion: PyRef<'_, PyDiffusion>,
    eps: f64,
    h: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &criteria::decide_s_prime(&diffusion.inner, eps, h).map_err(to_py_err)?)
}

#[pyfunction]
#[pyo3(signature = (diffusion, eps, c = 1.0))]
fn decide_i<'py>(
    py: Python<'py>,
    diffusion: PyRef<'_, PyDiffusion>,
    eps: f64,
    c: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &criteria::decide_i(&diffusion.inner, eps, c).map_err(to_py_err)?)
}

/// `Σ_{n=1}^{N} θ(n)·exp(−ε²/(2θ(n)²))`.
#[pyfunction]
fn partial_sum_s_prime(diffusion: PyRef<'_, PyDiffusion>, eps: f64, h: f64, n: usize) -> PyResult<f64> {
    criteria::partial_sum_s_prime(&diffusion.inner, eps, h, n, DEFAULT_QUAD_TOL)
        .map(|p| p.value)
        .map_err(to_py_err)
}

/// `1 − Φ(x)`.
#[pyfunction]
fn mills_tail(x: f64) -> f64 {
    special::mills_tail(x)
}

#[pyfunction]
fn expm(a: Rows, t: f64) -> PyResult<Rows> {
    linalg::expm(&matrix(&a)?, t).map(|m| rows(&m)).map_err(to_py_err)
}

#[pyfunction]
fn spectral_abscissa(a: Rows) -> PyResult<f64> {
    linalg::spectral_abscissa(&matrix(&a)?).map_err(to_py_err)
}

/// `(M, residual)` with `AᵀM + MA = −I`.
#[pyfunction]
fn solve_lyapunov(a: Rows) -> PyResult<(Rows, f64)> {
    let s = linalg::solve_lyapunov(&matrix(&a)?).map_err(to_py_err)?;
    Ok((rows(&s.m), s.residual))
}

fn with_callable<'py, R>(
    f: &Bound<'py, PyAny>,
    run: impl FnOnce(&mut dyn FnMut(f64) -> f64) -> affine_regime::Result<R>,
) -> PyResult<R> {
    let mut failure = None;
    let mut g = |x: f64| match f.call1((x,)).and_then(|v| v.extract::<f64>()) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let out = run(&mut g);
    if let Some(e) = failure {
        return Err(e);
    }
    out.map_err(to_py_err)
}

#[pyfunction]
fn build_min_sequence(f: &Bound<'_, PyAny>, h: f64, n: usize) -> PyResult<Vec<f64>> {
    with_callable(f, |g| criteria::build_min_sequence(g, h, n))
}

/// `(s, t)`: the maximiser sequence and the derived sequence.
#[pyfunction]
fn build_max_sequence(f: &Bound<'_, PyAny>, h: f64, n: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    with_callable(f, |g| criteria::build_max_sequence(g, h, n)).map(|m| (m.s, m.t))
}

#[pyfunction]
#[pyo3(signature = (drift, diffusion, dt, t_end, paths, seed = 0, xi = None, scheme = "exact", stride = 1))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    drift: PyRef<'_, PyDrift>,
    diffusion: PyRef<'_, PyDiffusion>,
    dt: f64,
    t_end: f64,
    paths: usize,
    seed: u64,
    xi: Option<Vec<f64>>,
    scheme: &str,
    stride: usize,
) -> PyResult<PyEnsemble> {
    let scheme = match scheme {
        "exact" => Scheme::ExactLinearGaussian,
        "euler" => Scheme::EulerMaruyama,
        other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}; use \"exact\" or \"euler\""))),
    };
    let cfg = SimConfig::new(dt, t_end, paths, seed).with_scheme(scheme).with_stride(stride);
    let xi = xi.unwrap_or_else(|| vec![0.0; drift.inner.dim()]);
    let (drift, sigma) = (drift.inner.clone(), diffusion.inner.clone());
    let inner = py
        .detach(|| affine_regime::simulate::simulate(&drift, &sigma, &xi, &cfg))
        .map_err(to_py_err)?;
    Ok(PyEnsemble { inner })
}

/// Classify and compare with an ensemble simulated from the same system.
#[pyfunction]
#[pyo3(signature = (drift, diffusion, ensemble, h = 1.0))]
fn verify<'py>(
    py: Python<'py>,
    drift: PyRef<'_, PyDrift>,
    diffusion: PyRef<'_, PyDiffusion>,
    ensemble: PyRef<'_, PyEnsemble>,
    h: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = ClassifyOptions { h, ..ClassifyOptions::default() };
    let verdict = criteria::classify_with(&diffusion.inner, &drift.inner, &opts).map_err(to_py_err)?;
    let evidence = stats::compare(&verdict, &ensemble.inner, &StatsConfig::default());
    to_py(py, &evidence)
}

/// Run the command-line front end with `args` (without the program name).
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    affine_regime::cli::run(std::iter::once("affine-regime".to_string()).chain(args))
}

/// Add the classes and functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDiffusion>()?;
    m.add_class::<PyDrift>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(decide_s_prime, m)?)?;
    m.add_function(wrap_pyfunction!(decide_i, m)?)?;
    m.add_function(wrap_pyfunction!(partial_sum_s_prime, m)?)?;
    m.add_function(wrap_pyfunction!(mills_tail, m)?)?;
    m.add_function(wrap_pyfunction!(expm, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_abscissa, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(build_min_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(build_max_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}

#[pymodule(name = "affine_regime")]
fn affine_regime_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

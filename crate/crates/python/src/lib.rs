//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use switchcount::experiment::{run_sweep, run_verify, Schedule, SweepConfig, VerifyOptions};
use switchcount::{dynamics, function, moments, simulate, spectral};
use switchcount::{BiasParam, Error, FamilySpec, McConfig, Point, TruncationPolicy, TruthTable};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::TruncationFailure { .. } | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn bias(p: f64) -> PyResult<BiasParam> {
    BiasParam::new(p).map_err(to_py)
}

fn policy(tol: f64) -> TruncationPolicy {
    TruncationPolicy::with_tol(tol)
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_family(name: &str, tribe_size: Option<usize>) -> PyResult<FamilySpec> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "dictator" => FamilySpec::Dictator,
        "majority" => FamilySpec::Majority,
        "parity" => FamilySpec::Parity,
        "tribes" => FamilySpec::Tribes {
            tribe_size: tribe_size.ok_or_else(|| PyValueError::new_err("tribes needs tribe_size"))?,
        },
        "and" => FamilySpec::And,
        "or" => FamilySpec::Or,
        other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
    })
}

/// A Boolean function on `{0,1}^n`; points are little-endian words (coordinate i is bit i-1).
#[pyclass(name = "BooleanFunction", module = "switchcount_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBooleanFunction {
    inner: function::BooleanFunction,
}

#[pymethods]
impl PyBooleanFunction {
    #[staticmethod]
    #[pyo3(signature = (name, n, tribe_size=None))]
    fn family(name: &str, n: usize, tribe_size: Option<usize>) -> PyResult<Self> {
        let spec = parse_family(name, tribe_size)?;
        Ok(PyBooleanFunction {
            inner: function::BooleanFunction::family(spec, n).map_err(to_py)?,
        })
    }

    /// Truth table of length `2^n`, entry `x` holding `f(x)`.
    #[staticmethod]
    #[pyo3(signature = (bits, name="custom"))]
    fn from_bits(bits: Vec<bool>, name: &str) -> PyResult<Self> {
        let n = bits.len().trailing_zeros() as usize;
        let table = TruthTable::new(n, bits).map_err(to_py)?;
        Ok(PyBooleanFunction {
            inner: function::BooleanFunction::from_table(table, name),
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let t = TruthTable::load(&path).map_err(to_py)?;
        Ok(PyBooleanFunction {
            inner: function::BooleanFunction::from_table(t, path.display().to_string()),
        })
    }

    #[staticmethod]
    fn random(n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyBooleanFunction {
            inner: function::BooleanFunction::random(n, seed).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn random_increasing(n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyBooleanFunction {
            inner: function::BooleanFunction::random_increasing(n, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn __call__(&self, x: u64) -> PyResult<bool> {
        self.evaluate(x)
    }

    fn evaluate(&self, x: u64) -> PyResult<bool> {
        let pt = Point::new(x, self.inner.dim()).map_err(to_py)?;
        self.inner.evaluate(pt).map_err(to_py)
    }

    fn is_increasing(&self) -> PyResult<bool> {
        function::is_increasing(&self.inner).map_err(to_py)
    }

    /// Exact `P(f = 1)` under the p-biased measure.
    fn nondegeneracy(&self, p: f64) -> PyResult<f64> {
        function::exact_nondegeneracy(&self.inner, bias(p)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("BooleanFunction({}, n={})", self.inner.name(), self.inner.dim())
    }
}

#[pyclass(name = "Spectrum", module = "switchcount_py", frozen)]
struct PySpectrum {
    inner: spectral::Spectrum,
}

#[pymethods]
impl PySpectrum {
    #[getter]
    fn n(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.bias().get()
    }

    /// All coefficients, indexed by subset word.
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    fn coeff(&self, mask: u64) -> PyResult<f64> {
        if mask >> self.inner.dim() != 0 {
            return Err(PyValueError::new_err("mask has bits above n"));
        }
        Ok(self.inner.at(mask))
    }

    fn inverse(&self) -> PyResult<PyBooleanFunction> {
        Ok(PyBooleanFunction {
            inner: spectral::inverse_transform(&self.inner).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.coeffs().len()
    }
}

#[pyfunction]
fn transform(f: &PyBooleanFunction, p: f64) -> PyResult<PySpectrum> {
    Ok(PySpectrum {
        inner: spectral::transform(&f.inner, bias(p)?).map_err(to_py)?,
    })
}

#[pyfunction]
fn influence_profile<'py>(py: Python<'py>, f: &PyBooleanFunction, p: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &dynamics::influence_profile(&f.inner, bias(p)?).map_err(to_py)?)
}

#[pyfunction]
fn sensitivity_function(f: &PyBooleanFunction, p: f64) -> PyResult<Vec<f64>> {
    dynamics::sensitivity_function(&f.inner, bias(p)?).map_err(to_py)
}

#[pyfunction]
fn expected_count(f: &PyBooleanFunction, p: f64) -> PyResult<f64> {
    moments::expected_count(&f.inner, bias(p)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (f, p, tol=1e-12))]
fn second_moment_series(f: &PyBooleanFunction, p: f64, tol: f64) -> PyResult<f64> {
    moments::second_moment_series(&f.inner, bias(p)?, &policy(tol)).map_err(to_py)
}

#[pyfunction]
fn second_moment_fourier(f: &PyBooleanFunction, p: f64) -> PyResult<f64> {
    moments::second_moment_fourier(&f.inner, bias(p)?).map_err(to_py)
}

#[pyfunction]
fn second_moment_increasing(f: &PyBooleanFunction, p: f64) -> PyResult<f64> {
    moments::second_moment_increasing(&f.inner, bias(p)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (f, p, s, tol=1e-12))]
fn mgf(f: &PyBooleanFunction, p: f64, s: f64, tol: f64) -> PyResult<f64> {
    moments::mgf(&f.inner, bias(p)?, s, &policy(tol)).map_err(to_py)
}

#[pyfunction]
fn pz_lower_bound(f: &PyBooleanFunction, p: f64, theta: f64) -> PyResult<f64> {
    moments::pz_lower_bound(&f.inner, bias(p)?, theta).map_err(to_py)
}

#[pyfunction]
fn increasing_upper_bound(f: &PyBooleanFunction, p: f64) -> PyResult<f64> {
    moments::increasing_upper_bound(&f.inner, bias(p)?).map_err(to_py)
}

/// `(ratio, satisfied)`.
#[pyfunction]
fn nontame_criterion(f: &PyBooleanFunction, p: f64, constant: f64) -> PyResult<(f64, bool)> {
    let c = moments::nontame_criterion(&f.inner, bias(p)?, constant).map_err(to_py)?;
    Ok((c.ratio, c.satisfied))
}

#[pyfunction]
#[pyo3(signature = (f, p, thetas=None, tol=1e-12))]
fn moment_report<'py>(
    py: Python<'py>,
    f: &PyBooleanFunction,
    p: f64,
    thetas: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let thetas = thetas.unwrap_or_else(|| vec![0.25, 0.5, 0.75]);
    let r = moments::moment_report(&f.inner, bias(p)?, &thetas, &policy(tol)).map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
fn increasing_constant(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_dict(py, moments::increasing_constant())
}

#[pyfunction]
fn sample_count<'py>(py: Python<'py>, f: &PyBooleanFunction, p: f64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &simulate::sample_count(&f.inner, bias(p)?, seed).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (f, p, trials, seed=0, batch=4096))]
fn monte_carlo_moments<'py>(
    py: Python<'py>,
    f: &PyBooleanFunction,
    p: f64,
    trials: u64,
    seed: u64,
    batch: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = McConfig { trials, seed, batch }.validated().map_err(to_py)?;
    let p = bias(p)?;
    let inner = f.inner.clone();
    let s = py.detach(move || simulate::monte_carlo_moments(&inner, p, &cfg)).map_err(to_py)?;
    to_dict(py, &s)
}

#[pyfunction]
#[pyo3(signature = (f, p, k_max, tol=1e-12))]
fn exact_count_distribution<'py>(
    py: Python<'py>,
    f: &PyBooleanFunction,
    p: f64,
    k_max: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let d = simulate::exact_count_distribution(&f.inner, bias(p)?, k_max, &policy(tol)).map_err(to_py)?;
    to_dict(py, &d)
}

#[pyfunction]
#[pyo3(signature = (n_max=6, p_grid=None, seed=0, mc_trials=20000))]
fn verify(py: Python<'_>, n_max: usize, p_grid: Option<Vec<f64>>, seed: u64, mc_trials: u64) -> PyResult<Bound<'_, PyAny>> {
    let d = VerifyOptions::default();
    let opts = VerifyOptions {
        n_max,
        p_grid: p_grid.unwrap_or(d.p_grid),
        seed,
        mc_trials,
        reproducible: true,
        ..VerifyOptions::default()
    };
    let r = py.detach(move || run_verify(&opts)).map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (family, n_grid, schedule="constant:0.5", trials=20000, seed=0, tribe_size=None, thetas=None, k_grid=None))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    family: &str,
    n_grid: Vec<usize>,
    schedule: &str,
    trials: u64,
    seed: u64,
    tribe_size: Option<usize>,
    thetas: Option<Vec<f64>>,
    k_grid: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyAny>> {
    let schedule: Schedule = schedule.parse().map_err(to_py)?;
    let mut cfg = SweepConfig::new(parse_family(family, tribe_size)?, n_grid, schedule);
    cfg.mc.trials = trials;
    cfg.mc.seed = seed;
    cfg.reproducible = true;
    if let Some(t) = thetas {
        cfg.thetas = t;
    }
    if let Some(k) = k_grid {
        cfg.k_grid = k;
    }
    let r = py.detach(move || run_sweep(&cfg)).map_err(to_py)?;
    to_dict(py, &r)
}

#[pymodule]
mod switchcount_py {
    #[pymodule_export]
    use super::{
        exact_count_distribution, expected_count, increasing_constant, increasing_upper_bound, influence_profile, mgf,
        moment_report, monte_carlo_moments, nontame_criterion, pz_lower_bound, sample_count, second_moment_fourier,
        second_moment_increasing, second_moment_series, sensitivity_function, sweep, transform, verify,
        PyBooleanFunction, PySpectrum,
    };
}

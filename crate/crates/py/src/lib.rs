//! Python bindings: models, cutoffs, the certified sums, leading-term
//! predictions and scenario runs.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;
use trace_lab::asymptotics::{self, FitReport};
use trace_lab::cli::{self, Scenario};
use trace_lab::geometry;
use trace_lab::kernels::{self, SumResult, Tolerance};
use trace_lab::{LabError, PointM};

fn err(e: LabError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point(s: Vec<f64>) -> PyResult<PointM> {
    PointM::new(s).map_err(err)
}

fn tolerance(tol: f64, relative: bool) -> Tolerance {
    if relative {
        Tolerance::Relative(tol)
    } else {
        Tolerance::Absolute(tol)
    }
}

/// Parses JSON text with Python's own `json` module.
fn from_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn fit_dict<'py>(py: Python<'py>, fit: &FitReport) -> PyResult<Bound<'py, PyAny>> {
    from_json(py, &serde_json::to_string(fit).expect("fit report serializes"))
}

#[pyclass(name = "ToricModel", frozen)]
struct PyToricModel {
    inner: trace_lab::ToricModel,
}

#[pymethods]
impl PyToricModel {
    #[new]
    #[pyo3(signature = (shifts, constants = vec![]))]
    fn new(shifts: Vec<i64>, constants: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: trace_lab::ToricModel::new(&shifts, &constants).map_err(err)? })
    }

    #[staticmethod]
    fn cp1() -> Self {
        Self { inner: trace_lab::ToricModel::cp1() }
    }

    #[staticmethod]
    fn augmented_cp1() -> Self {
        Self { inner: trace_lab::ToricModel::augmented_cp1() }
    }

    #[staticmethod]
    fn cp1_cp1() -> Self {
        Self { inner: trace_lab::ToricModel::cp1_cp1() }
    }

    /// Number of projective-line factors.
    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    /// Number of commuting Hamiltonians.
    #[getter]
    fn r(&self) -> usize {
        self.inner.r
    }

    fn joint_eigenvalue(&self, level: u64, offsets: Vec<u64>) -> PyResult<Vec<f64>> {
        self.inner.joint_eigenvalue(level, &offsets).map_err(err)
    }

    fn diagonal_amplitude(&self, level: u64, offsets: Vec<u64>, s: Vec<f64>) -> PyResult<f64> {
        self.inner.diagonal_amplitude(level, &offsets, &point(s)?).map_err(err)
    }

    fn level_diagonal_sum(&self, level: u64) -> f64 {
        self.inner.level_diagonal_sum(level)
    }

    /// `(level, offsets, eigenvalue)` tuples within `radius` of `center`.
    fn enumerate_spectrum(&self, center: Vec<f64>, radius: f64) -> PyResult<Vec<(u64, Vec<u64>, Vec<f64>)>> {
        Ok(self
            .inner
            .enumerate_spectrum(&center, radius)
            .map_err(err)?
            .into_iter()
            .map(|p| (p.level, p.offsets, p.eigenvalue))
            .collect())
    }

    fn count_eigenvalues(&self, radius: f64) -> u64 {
        self.inner.count_eigenvalues(radius)
    }

    fn meridian_point(&self, factor: usize, s: Vec<f64>, h: f64) -> PyResult<Vec<f64>> {
        Ok(self.inner.meridian_point(factor, &point(s)?, h).map_err(err)?.s)
    }

    /// `(phi, |phi|)` at the moment point `s`.
    fn moment_map(&self, s: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
        let m = geometry::moment_map(&self.inner, &point(s)?);
        Ok((m.phi, m.norm))
    }

    fn density(&self, s: Vec<f64>) -> PyResult<f64> {
        geometry::cal_d(&self.inner, &point(s)?).map_err(err)
    }

    /// Components of the fixed locus of `s0` as dicts.
    fn fixed_locus<'py>(&self, py: Python<'py>, s0: Vec<f64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let info = geometry::fixed_locus(&self.inner, &s0).map_err(err)?;
        info.components
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("poles", c.pole_values())?;
                d.set_item("fixed_dim", c.fixed_dim)?;
                d.set_item("codim", c.codim)?;
                d.set_item("phase_ok", c.phase_ok)?;
                d.set_item("rotation_angles", c.rotation_angles.clone())?;
                d.set_item("poincare", geometry::poincare_factor(&c.rotation_angles))?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("ToricModel(shifts={:?}, constants={:?})", self.inner.shifts(), self.inner.constants())
    }
}

#[pyclass(name = "Cutoff", frozen)]
struct PyCutoff {
    inner: kernels::Cutoff,
}

#[pymethods]
impl PyCutoff {
    #[staticmethod]
    fn gaussian(sigma: f64, dim: usize) -> PyResult<Self> {
        Ok(Self { inner: kernels::Cutoff::gaussian(sigma, dim).map_err(err)? })
    }

    #[staticmethod]
    fn bump(epsilon: f64, dim: usize) -> PyResult<Self> {
        Ok(Self { inner: kernels::Cutoff::bump(epsilon, dim).map_err(err)? })
    }

    fn chi(&self, s: Vec<f64>) -> f64 {
        self.inner.chi(&s)
    }

    fn hat(&self, xi: Vec<f64>) -> PyResult<f64> {
        self.inner.hat(&xi).map_err(err)
    }
}

/// A certified lattice sum: the value and its truncation certificate.
#[pyclass(name = "Sum", frozen, get_all)]
struct PySum {
    value: Complex64,
    radius: f64,
    tail_bound: f64,
    ln_tail_bound: f64,
    rounding_bound: f64,
    terms: u64,
    met: bool,
    resolved: bool,
}

impl From<SumResult> for PySum {
    fn from(s: SumResult) -> Self {
        Self {
            value: s.value(),
            radius: s.cert.radius,
            tail_bound: s.cert.tail_bound,
            ln_tail_bound: s.cert.ln_tail_bound,
            rounding_bound: s.cert.rounding_bound,
            terms: s.cert.terms,
            met: s.cert.met,
            resolved: s.resolved(),
        }
    }
}

#[pymethods]
impl PySum {
    fn __repr__(&self) -> String {
        format!("Sum(value={}, tail_bound={:e}, terms={})", self.value, self.tail_bound, self.terms)
    }
}

#[pyfunction]
#[pyo3(signature = (model, cutoff, beta, s0, lam, s, tol = 1e-10, relative = true))]
#[allow(clippy::too_many_arguments)]
fn smoothed_projector_diag(
    model: &PyToricModel,
    cutoff: &PyCutoff,
    beta: Vec<f64>,
    s0: Vec<f64>,
    lam: f64,
    s: Vec<f64>,
    tol: f64,
    relative: bool,
) -> PyResult<PySum> {
    let p = point(s)?;
    kernels::smoothed_projector_diag(&model.inner, &cutoff.inner, &beta, &s0, lam, &p, tolerance(tol, relative))
        .map(PySum::from)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (model, cutoff, beta, s0, lam, tol = 1e-10, relative = false))]
fn trace_ft(
    model: &PyToricModel,
    cutoff: &PyCutoff,
    beta: Vec<f64>,
    s0: Vec<f64>,
    lam: f64,
    tol: f64,
    relative: bool,
) -> PyResult<PySum> {
    kernels::trace_ft(&model.inner, &cutoff.inner, &beta, &s0, lam, tolerance(tol, relative))
        .map(PySum::from)
        .map_err(err)
}

/// `(exponent, coefficient, phase_rate)` of the on-locus diagonal leading term at `s`.
#[pyfunction]
fn predict_diag_leading(
    model: &PyToricModel,
    cutoff: &PyCutoff,
    beta: Vec<f64>,
    s0: Vec<f64>,
    s: Vec<f64>,
) -> PyResult<(f64, Complex64, f64)> {
    let p = point(s)?;
    let pred =
        asymptotics::predict_diag_leading(&model.inner, &p, &s0, &beta, &cutoff.inner, &[], 0.0, 0).map_err(err)?;
    Ok((pred.exponent, pred.coefficient, pred.phase_rate))
}

/// One `(exponent, coefficient, phase_rate, poincare)` tuple per contributing component.
#[pyfunction]
fn predict_trace_leading(
    model: &PyToricModel,
    cutoff: &PyCutoff,
    beta: Vec<f64>,
    s0: Vec<f64>,
) -> PyResult<Vec<(f64, Complex64, f64, Complex64)>> {
    let preds = asymptotics::predict_trace_leading(&model.inner, &s0, &beta, &cutoff.inner).map_err(err)?;
    Ok(preds
        .iter()
        .map(|t| (t.prediction.exponent, t.prediction.coefficient, t.prediction.phase_rate, t.poincare))
        .collect())
}

/// Log-log fit of `(lambda, value)` pairs.
#[pyfunction]
fn fit_power_law<'py>(py: Python<'py>, samples: Vec<(f64, f64)>) -> PyResult<Bound<'py, PyAny>> {
    fit_dict(py, &asymptotics::fit_power_law(&samples).map_err(err)?)
}

/// Runs every check of a scenario JSON text and returns the verdict list.
#[pyfunction]
fn verify<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let prepared = Scenario::from_json(config_json)
        .and_then(|s| s.prepare(None))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (verdicts, _) = py.detach(|| cli::run_checks(&prepared));
    let bytes = cli::run::verdicts_json(&prepared.scenario.digest(), &verdicts);
    from_json(py, std::str::from_utf8(&bytes).expect("verdict json is utf-8"))
}

/// Same as `lab run`: writes the CSV files, verdicts and manifest to `out`
/// and returns whether every check passed.
#[pyfunction]
#[pyo3(signature = (config, out, tol = None))]
fn run(py: Python<'_>, config: PathBuf, out: PathBuf, tol: Option<f64>) -> PyResult<bool> {
    py.detach(|| cli::run(&config, &out, tol))
        .map(|m| m.all_pass())
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn tracelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyToricModel>()?;
    m.add_class::<PyCutoff>()?;
    m.add_class::<PySum>()?;
    m.add_function(wrap_pyfunction!(smoothed_projector_diag, m)?)?;
    m.add_function(wrap_pyfunction!(trace_ft, m)?)?;
    m.add_function(wrap_pyfunction!(predict_diag_leading, m)?)?;
    m.add_function(wrap_pyfunction!(predict_trace_leading, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

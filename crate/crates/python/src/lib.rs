use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use lg::montecarlo::{self as mc, Rect, SimConfig};
use lg::oracle::QuadratureSpec;
use lg::{CovMatrix, Drift, Point, SkewVector, C64};

fn to_py(e: lg::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Structured results cross the boundary as JSON and come back as dicts.
fn to_dict<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn pt((a, b): (f64, f64)) -> Point {
    Point::new(a, b)
}

/// Validated model parameters.
#[pyclass(frozen, skip_from_py_object, name = "ModelParams")]
struct PyParams {
    inner: lg::ModelParams,
}

#[pymethods]
impl PyParams {
    /// Covariances as `(s11, s12, s22)`, drifts as `(m1, m2)`; `q=None` selects
    /// the divergence-form skew.
    #[new]
    #[pyo3(signature = (sigma_plus, sigma_minus, mu_plus, mu_minus, q=None))]
    fn new(
        sigma_plus: (f64, f64, f64),
        sigma_minus: (f64, f64, f64),
        mu_plus: (f64, f64),
        mu_minus: (f64, f64),
        q: Option<(f64, f64)>,
    ) -> PyResult<Self> {
        let cov = |(a, b, c): (f64, f64, f64)| CovMatrix::new(a, b, c);
        let inner = lg::ModelParams::new(
            cov(sigma_plus),
            cov(sigma_minus),
            Drift::new(mu_plus.0, mu_plus.1),
            Drift::new(mu_minus.0, mu_minus.1),
            q.map(|(a, b)| SkewVector::new(a, b)),
        )
        .map_err(to_py)?;
        Ok(PyParams { inner })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        lg::ModelParams::from_json(s).map(|inner| PyParams { inner }).map_err(PyValueError::new_err)
    }

    /// One of `symmetric`, `asymmetric`, `pole`, `drifted`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        use lg::model::presets;
        let inner = match name {
            "symmetric" => presets::symmetric(),
            "asymmetric" => presets::asymmetric(),
            "pole" => presets::with_pole(),
            "drifted" => presets::drifted(),
            _ => return Err(PyValueError::new_err(format!("unknown preset {name:?}"))),
        };
        Ok(PyParams { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner.to_raw()).unwrap()
    }

    #[getter]
    fn is_divergence_form(&self) -> bool {
        self.inner.is_divergence_form()
    }

    #[getter]
    fn q(&self) -> (f64, f64) {
        let q = self.inner.q();
        (q.q1, q.q2)
    }

    fn __repr__(&self) -> String {
        format!("ModelParams({})", self.to_json())
    }
}

#[pyfunction]
fn branching_points(py: Python<'_>, p: &PyParams) -> PyResult<Py<PyAny>> {
    to_dict(py, &lg::algebra::branching_points(&p.inner))
}

#[pyfunction]
fn key_angles(py: Python<'_>, p: &PyParams) -> PyResult<Py<PyAny>> {
    to_dict(py, &lg::algebra::key_angles(&p.inner).map_err(to_py)?)
}

#[pyfunction]
fn case_classify(p: &PyParams) -> PyResult<String> {
    Ok(lg::algebra::case_classify(&p.inner).map_err(to_py)?.to_string())
}

#[pyfunction]
fn find_pole(py: Python<'_>, p: &PyParams) -> PyResult<Py<PyAny>> {
    to_dict(py, &lg::algebra::find_pole(&p.inner).map_err(to_py)?)
}

#[pyfunction]
fn saddle(py: Python<'_>, p: &PyParams, alpha: f64) -> PyResult<Py<PyAny>> {
    to_dict(py, &lg::algebra::saddle(&p.inner, alpha).map_err(to_py)?)
}

#[pyfunction]
fn phi(p: &PyParams, z0: (f64, f64), x: C64) -> PyResult<C64> {
    lg::laplace::phi(&p.inner, pt(z0), x).map_err(to_py)
}

/// Leading term in the fixed direction `alpha`, with its regime.
#[pyfunction]
fn green_asymptotic(py: Python<'_>, p: &PyParams, z0: (f64, f64), r: f64, alpha: f64) -> PyResult<Py<PyAny>> {
    let a = lg::asymptotics::green_asymptotic_fixed(&p.inner, pt(z0), r, alpha).map_err(to_py)?;
    let d = to_dict(py, &a)?;
    d.bind(py).set_item("regime_tag", a.regime.tag())?;
    Ok(d)
}

/// `(value, error)` of the Green's function at an off-axis target.
#[pyfunction]
#[pyo3(signature = (p, z0, target, tol=1e-9))]
fn green_contour(py: Python<'_>, p: &PyParams, z0: (f64, f64), target: (f64, f64), tol: f64) -> PyResult<(f64, f64)> {
    let spec = QuadratureSpec::with_tol(tol);
    let g = py.detach(|| lg::oracle::green_contour(&p.inner, pt(z0), pt(target), &spec)).map_err(to_py)?;
    Ok((g.value, g.error))
}

/// `(value, error)` of the density on the axis at `(u, 0)`.
#[pyfunction]
#[pyo3(signature = (p, z0, u, tol=1e-9))]
fn green_axis(py: Python<'_>, p: &PyParams, z0: (f64, f64), u: f64, tol: f64) -> PyResult<(f64, f64)> {
    let spec = QuadratureSpec::with_tol(tol);
    let g = py.detach(|| lg::oracle::green_axis(&p.inner, pt(z0), u, &spec)).map_err(to_py)?;
    Ok((g.value, g.error))
}

/// `(up, down)` escape probabilities from height `b0`.
#[pyfunction]
fn escape_prob(p: &PyParams, b0: f64) -> PyResult<(f64, f64)> {
    let up = lg::harmonic::escape_prob_up(&p.inner, b0).map_err(to_py)?;
    let down = lg::harmonic::escape_prob_down(&p.inner, b0).map_err(to_py)?;
    Ok((up, down))
}

#[pyfunction]
fn martin_kernel(p: &PyParams, alpha: f64, z: (f64, f64)) -> PyResult<f64> {
    lg::harmonic::martin_kernel(&p.inner, alpha, pt(z)).map_err(to_py)
}

#[pyfunction]
fn boundary_structure(py: Python<'_>, p: &PyParams) -> PyResult<Py<PyAny>> {
    to_dict(py, &lg::harmonic::boundary_structure(&p.inner).map_err(to_py)?)
}

#[pyfunction]
fn lemma_integral_check(py: Python<'_>, q: f64) -> PyResult<Py<PyAny>> {
    to_dict(py, &lg::oracle::lemma_integral_check(q).map_err(to_py)?)
}

fn config(n_paths: usize, dt: f64, seed: u64, threads: usize) -> SimConfig {
    let mut cfg = SimConfig::new(dt, n_paths, seed);
    cfg.threads = threads;
    cfg
}

/// Monte Carlo escape estimate.
#[pyfunction]
#[pyo3(signature = (p, z0, n_paths, dt=1e-3, seed=0, threads=0))]
fn simulate_escape(
    py: Python<'_>,
    p: &PyParams,
    z0: (f64, f64),
    n_paths: usize,
    dt: f64,
    seed: u64,
    threads: usize,
) -> PyResult<Py<PyAny>> {
    let cfg = config(n_paths, dt, seed, threads);
    let e = py.detach(|| mc::escape_estimate(&p.inner, pt(z0), &cfg)).map_err(to_py)?;
    to_dict(py, &e)
}

/// Monte Carlo occupation of boxes `((a_lo, a_hi), (b_lo, b_hi))`.
#[pyfunction]
#[pyo3(signature = (p, z0, boxes, n_paths, dt=1e-3, seed=0, threads=0))]
fn simulate_green(
    py: Python<'_>,
    p: &PyParams,
    z0: (f64, f64),
    boxes: Vec<((f64, f64), (f64, f64))>,
    n_paths: usize,
    dt: f64,
    seed: u64,
    threads: usize,
) -> PyResult<Py<PyAny>> {
    let cfg = config(n_paths, dt, seed, threads);
    let rects: Vec<Rect> = boxes.into_iter().map(|(a, b)| Rect::new(a, b)).collect();
    let g = py.detach(|| mc::green_measure(&p.inner, pt(z0), &rects, &cfg)).map_err(to_py)?;
    to_dict(py, &g)
}

#[pymodule]
fn layered_green(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_function(wrap_pyfunction!(branching_points, m)?)?;
    m.add_function(wrap_pyfunction!(key_angles, m)?)?;
    m.add_function(wrap_pyfunction!(case_classify, m)?)?;
    m.add_function(wrap_pyfunction!(find_pole, m)?)?;
    m.add_function(wrap_pyfunction!(saddle, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(green_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(green_contour, m)?)?;
    m.add_function(wrap_pyfunction!(green_axis, m)?)?;
    m.add_function(wrap_pyfunction!(escape_prob, m)?)?;
    m.add_function(wrap_pyfunction!(martin_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_structure, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_integral_check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_escape, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_green, m)?)?;
    Ok(())
}

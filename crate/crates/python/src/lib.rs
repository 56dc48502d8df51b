//! Python bindings. Points cross the boundary as `(chart, coords)` tuples,
//! kernel and function descriptors as JSON strings.

use std::sync::Arc;

use horocell::bridge::{self, DriftVariant, WdmProblem};
use horocell::convolution::{self, DirectionalFunction, Kernel, KernelSpec, McParams, Quadrature};
use horocell::frame::OrthonormalFrame;
use horocell::manifold::{self, Manifold, Tangent};
use horocell::suite::{self, SuiteContext};
use horocell::Point;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(horocell, HorocellError, PyException);

type PyPoint = (usize, Vec<f64>);

fn err(e: horocell::Error) -> PyErr {
    HorocellError::new_err(format!("{}: {e}", e.class()))
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn space(id: &str) -> PyResult<Arc<dyn Manifold>> {
    manifold::from_id(id).map_err(err)
}

fn point(p: PyPoint) -> Point {
    Point::new(p.0, p.1)
}

fn out(p: Point) -> PyPoint {
    (p.chart, p.coords)
}

#[pyfunction]
fn sectional_curvature(manifold: &str, at: PyPoint, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let m = space(manifold)?;
    manifold::sectional_curvature(m.as_ref(), &point(at), &a, &b).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (manifold, base, velocity, n_steps=None))]
fn geodesic_exp(manifold: &str, base: PyPoint, velocity: Vec<f64>, n_steps: Option<usize>) -> PyResult<PyPoint> {
    let m = space(manifold)?;
    let v = Tangent::new(point(base), velocity);
    let p = match n_steps {
        Some(n) => manifold::geodesic_exp(m.as_ref(), &v, n),
        None => manifold::exp(m.as_ref(), &v),
    };
    p.map(out).map_err(err)
}

#[pyfunction]
fn riemannian_log(manifold: &str, x: PyPoint, y: PyPoint) -> PyResult<Vec<f64>> {
    let m = space(manifold)?;
    manifold::riemannian_log(m.as_ref(), &point(x), &point(y), manifold::LOG_TOL).map(|v| v.components).map_err(err)
}

#[pyfunction]
fn distance(manifold: &str, x: PyPoint, y: PyPoint) -> PyResult<f64> {
    let m = space(manifold)?;
    manifold::distance(m.as_ref(), &point(x), &point(y)).map_err(err)
}

/// `(value, stderr)` of the guided-bridge heat kernel estimate `p_T(x, y)`.
#[pyfunction]
fn heat_kernel(manifold: &str, x: PyPoint, y: PyPoint, t: f64, n_paths: usize, n_steps: usize, seed: u64) -> PyResult<(f64, f64)> {
    let m = space(manifold)?;
    let est = bridge::heat_kernel_estimate(m.as_ref(), &point(x), &point(y), t, n_paths, n_steps, seed).map_err(err)?;
    Ok((est.value[0], est.stderr[0]))
}

/// Directional convolution at the chart-standard frame over `base`.
#[pyfunction]
#[pyo3(signature = (manifold, kernel, function, base, nodes=16))]
fn conv_directional(manifold: &str, kernel: &str, function: &str, base: PyPoint, nodes: usize) -> PyResult<Vec<f64>> {
    let m = space(manifold)?;
    let k = Kernel::new(m.dim(), parse::<KernelSpec>("kernel", kernel)?).map_err(err)?;
    let f = DirectionalFunction::from_spec(m.clone(), &parse("function", function)?).map_err(err)?;
    let u = OrthonormalFrame::standard(m.as_ref(), point(base)).map_err(err)?;
    convolution::conv_directional(m.as_ref(), &k, &f, &u, Quadrature { nodes }).map_err(err)
}

/// Horizontal stochastic convolution; returns `(value, stderr)` per channel.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn conv_horizontal(
    manifold: &str,
    kernel: &str,
    function: &str,
    base: PyPoint,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let m = space(manifold)?;
    let k = Kernel::new(m.dim(), parse::<KernelSpec>("kernel", kernel)?).map_err(err)?;
    let f = DirectionalFunction::from_spec(m.clone(), &parse("function", function)?).map_err(err)?;
    let u = OrthonormalFrame::standard(m.as_ref(), point(base)).map_err(err)?;
    let est = convolution::conv_horizontal_mc(m.as_ref(), &k, &f, &u, &McParams::new(t, n_paths, n_steps, seed)).map_err(err)?;
    Ok((est.value, est.stderr))
}

/// Weighted diffusion mean by importance resampling. Returns a dict with the
/// resampled point, the weighted samples and their log weights.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (manifold, points, weights, t, j, n_steps, seed, drift_variant="euclidean-exact"))]
fn sample_wdm<'py>(
    py: Python<'py>,
    manifold: &str,
    points: Vec<PyPoint>,
    weights: Vec<f64>,
    t: f64,
    j: usize,
    n_steps: usize,
    seed: u64,
    drift_variant: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let m = space(manifold)?;
    let drift: DriftVariant = serde_json::from_value(serde_json::Value::from(drift_variant))
        .map_err(|e| PyValueError::new_err(format!("drift_variant: {e}")))?;
    let prob = WdmProblem::new(m, points.into_iter().map(point).collect(), weights, t, drift).map_err(err)?;
    let (v, set) = py.detach(|| bridge::sample_wdm_sir(&prob, j, n_steps, seed)).map_err(err)?;
    let ess = set.effective_sample_size().map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("resampled", out(v))?;
    d.set_item("samples", set.samples.into_iter().map(out).collect::<Vec<_>>())?;
    d.set_item("log_weights", set.log_weights)?;
    d.set_item("hit_defects", set.hit_defects)?;
    d.set_item("escaped", set.escaped)?;
    d.set_item("ess", ess)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (manifold, points, weights, step=0.5, tol=1e-10, max_iter=1000))]
fn wfm(manifold: &str, points: Vec<PyPoint>, weights: Vec<f64>, step: f64, tol: f64, max_iter: usize) -> PyResult<PyPoint> {
    let m = space(manifold)?;
    let xs: Vec<Point> = points.into_iter().map(point).collect();
    bridge::wfm_gradient_descent(m.as_ref(), &xs, &weights, step, tol, max_iter).map(out).map_err(err)
}

/// Runs an acceptance bundle; one `(id, title, passed, [(check, measured, bound, passed)])` per criterion.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn run_suite(py: Python<'_>, name: &str) -> PyResult<Vec<(u8, String, bool, Vec<(String, f64, String, bool)>)>> {
    let reports = py.detach(|| suite::run_suite(name, &SuiteContext::reference())).map_err(err)?;
    Ok(reports
        .into_iter()
        .map(|r| {
            let passed = r.passed();
            let checks = r.checks.into_iter().map(|c| (c.name, c.measured, c.bound, c.passed)).collect();
            (r.id, r.title.to_string(), passed, checks)
        })
        .collect())
}

/// `(r, commutator defect, bracket term)` on the unit sphere.
#[pyfunction]
fn commutator_table() -> PyResult<Vec<(f64, f64, f64)>> {
    suite::commutator_table(&manifold::Sphere2).map_err(err)
}

#[pymodule]
#[pyo3(name = "horocell")]
fn horocell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HorocellError", m.py().get_type::<HorocellError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(sectional_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic_exp, m)?)?;
    m.add_function(wrap_pyfunction!(riemannian_log, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(conv_directional, m)?)?;
    m.add_function(wrap_pyfunction!(conv_horizontal, m)?)?;
    m.add_function(wrap_pyfunction!(sample_wdm, m)?)?;
    m.add_function(wrap_pyfunction!(wfm, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(commutator_table, m)?)?;
    Ok(())
}

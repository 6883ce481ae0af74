//! Python bindings. Reports come back as JSON strings; `json.loads` them.

use pyo3::exceptions::{PyNotImplementedError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use slicekit::bodies::{body_volume, intersection_body_of, StarBody};
use slicekit::john::{john_ellipsoid, sandwich};
use slicekit::lab::{self, InequalityId};
use slicekit::measures::{self, BodyMeasure, Density, DEFAULT_RADIAL_NODES};
use slicekit::radon::{self, SphereFunction};
use slicekit::scalars;
use slicekit::sphere::{sphere_grid, Direction, GridSpec};
use slicekit::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Data(_) | Error::Precondition(_) => PyValueError::new_err(e.to_string()),
        Error::Capability(_) => PyNotImplementedError::new_err(e.to_string()),
        Error::Solver { .. } | Error::Certificate { .. } => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn spec_for(n: usize, level: Option<usize>, mc: bool, seed: u64) -> GridSpec {
    let default = lab::default_spec(n, seed);
    match (mc, level) {
        (true, l) => GridSpec::monte_carlo(l.unwrap_or(64), seed),
        (false, Some(l)) => GridSpec::gauss(l),
        (false, None) => default,
    }
}

fn config(n: usize, level: Option<usize>, mc: bool, seed: u64, radial_nodes: usize) -> lab::LabConfig {
    lab::lab_config(n, spec_for(n, level, mc, seed), radial_nodes)
}

/// An origin-symmetric star body.
#[pyclass(name = "Body", module = "slicekit", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyBody {
    inner: StarBody,
}

#[pymethods]
impl PyBody {
    /// Build from a JSON body description.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyBody { inner: StarBody::from_json(text).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (dim, radius = 1.0))]
    fn ball(dim: usize, radius: f64) -> PyResult<Self> {
        Ok(PyBody { inner: StarBody::ball(dim, radius).map_err(py_err)? })
    }

    #[staticmethod]
    fn lp_ball(dim: usize, p: f64) -> PyResult<Self> {
        Ok(PyBody { inner: StarBody::lp_ball(dim, p).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (dim, halfwidth = 1.0))]
    fn cube(dim: usize, halfwidth: f64) -> PyResult<Self> {
        Ok(PyBody { inner: StarBody::cube(dim, halfwidth).map_err(py_err)? })
    }

    #[staticmethod]
    fn cross_polytope(dim: usize) -> PyResult<Self> {
        Ok(PyBody { inner: StarBody::cross_polytope(dim).map_err(py_err)? })
    }

    /// One of the standard test bodies by name.
    #[staticmethod]
    #[pyo3(signature = (name, dim, seed = 1))]
    fn named(name: &str, dim: usize, seed: u64) -> PyResult<Self> {
        Ok(PyBody { inner: lab::suite_body(name, dim, seed).map_err(py_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    fn is_convex(&self) -> bool {
        self.inner.is_convex()
    }

    fn radial(&self, theta: Vec<f64>) -> PyResult<f64> {
        let d = Direction::normalized(theta).map_err(py_err)?;
        if d.dim() != self.inner.dim() {
            return Err(PyValueError::new_err("direction has the wrong dimension"));
        }
        Ok(self.inner.radial(d.as_slice()))
    }

    fn contains(&self, x: Vec<f64>) -> PyResult<bool> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err("point has the wrong dimension"));
        }
        Ok(self.inner.contains(&x))
    }

    #[pyo3(signature = (level = None, mc = false, seed = 1))]
    fn volume(&self, level: Option<usize>, mc: bool, seed: u64) -> PyResult<f64> {
        let n = self.inner.dim();
        let grid = sphere_grid(n, spec_for(n, level, mc, seed)).map_err(py_err)?;
        body_volume(&self.inner, &grid).map_err(py_err)
    }

    #[pyo3(signature = (xi, level = None, mc = false, seed = 1))]
    fn section_volume(&self, xi: Vec<f64>, level: Option<usize>, mc: bool, seed: u64) -> PyResult<f64> {
        let n = self.inner.dim();
        let xi = Direction::normalized(xi).map_err(py_err)?;
        measures::section_volume(&self.inner, &xi, spec_for(n, level, mc, seed)).map_err(py_err)
    }

    /// The intersection body, evaluated lazily on a grid of the given level.
    #[pyo3(signature = (level = 32))]
    fn intersection_body(&self, level: usize) -> PyResult<Self> {
        Ok(PyBody { inner: intersection_body_of(&self.inner, GridSpec::gauss(level)).map_err(py_err)? })
    }

    fn scaled(&self, factor: f64) -> PyResult<Self> {
        Ok(PyBody { inner: self.inner.scaled(factor).map_err(py_err)? })
    }

    fn describe(&self) -> PyResult<String> {
        to_json(&self.inner.describe())
    }

    fn __repr__(&self) -> String {
        format!("Body({})", self.inner.label())
    }
}

/// A nonnegative density on R^n.
#[pyclass(name = "Density", module = "slicekit", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDensity {
    inner: Density,
}

#[pymethods]
impl PyDensity {
    #[new]
    #[pyo3(signature = (text = "uniform"))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(PyDensity { inner: Density::parse(text).map_err(py_err)? })
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        self.inner.eval(&x)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    fn __repr__(&self) -> String {
        format!("Density({})", self.inner.label())
    }
}

fn density_or_uniform(density: Option<&PyDensity>) -> Density {
    density.map(|d| d.inner.clone()).unwrap_or_else(Density::uniform)
}

#[pyfunction]
fn slicing_constant(n: usize) -> PyResult<f64> {
    scalars::slicing_constant(n).map_err(py_err)
}

#[pyfunction]
fn unit_ball_volume(n: usize) -> PyResult<f64> {
    scalars::log_unit_ball_volume(n).map(f64::exp).map_err(py_err)
}

#[pyfunction]
fn sphere_area(n: usize) -> PyResult<f64> {
    scalars::sphere_area(n).map_err(py_err)
}

/// Integral of the density over the body.
#[pyfunction]
#[pyo3(signature = (body, density = None, level = None, mc = false, seed = 1, radial_nodes = DEFAULT_RADIAL_NODES))]
fn body_measure(
    py: Python<'_>,
    body: &PyBody,
    density: Option<&PyDensity>,
    level: Option<usize>,
    mc: bool,
    seed: u64,
    radial_nodes: usize,
) -> PyResult<f64> {
    let n = body.inner.dim();
    let m = BodyMeasure::new(body.inner.clone(), density_or_uniform(density)).map_err(py_err)?;
    let spec = spec_for(n, level, mc, seed);
    py.detach(|| {
        let grid = sphere_grid(n, spec)?;
        measures::body_measure(&m, &grid, radial_nodes)
    })
    .map_err(py_err)
}

/// Largest central section of the measure. Returns `(value, direction)`.
#[pyfunction]
#[pyo3(signature = (body, density = None, level = None, mc = false, seed = 1, radial_nodes = DEFAULT_RADIAL_NODES))]
fn max_section(
    py: Python<'_>,
    body: &PyBody,
    density: Option<&PyDensity>,
    level: Option<usize>,
    mc: bool,
    seed: u64,
    radial_nodes: usize,
) -> PyResult<(f64, Vec<f64>)> {
    let n = body.inner.dim();
    let m = BodyMeasure::new(body.inner.clone(), density_or_uniform(density)).map_err(py_err)?;
    let search = config(n, level, mc, seed, radial_nodes).search;
    let s = py.detach(|| measures::max_section(&m, &search)).map_err(py_err)?;
    Ok((s.value, s.direction.into_inner()))
}

/// Check one inequality; `ineq` is one of eq1..eq4. Returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (ineq, body, density = None, level = None, mc = false, seed = 1, radial_nodes = DEFAULT_RADIAL_NODES))]
#[allow(clippy::too_many_arguments)]
fn verify(
    py: Python<'_>,
    ineq: &str,
    body: &PyBody,
    density: Option<&PyDensity>,
    level: Option<usize>,
    mc: bool,
    seed: u64,
    radial_nodes: usize,
) -> PyResult<String> {
    let id: InequalityId = ineq.parse().map_err(py_err)?;
    let cfg = config(body.inner.dim(), level, mc, seed, radial_nodes);
    let density = density_or_uniform(density);
    let report = py.detach(|| lab::verify(id, &body.inner, &density, &cfg)).map_err(py_err)?;
    to_json(&report)
}

/// Stability check on the intersection body of `source`. Returns JSON.
#[pyfunction]
#[pyo3(signature = (source, density, level = None, seed = 1, radial_nodes = DEFAULT_RADIAL_NODES))]
fn verify_stability(
    py: Python<'_>,
    source: &PyBody,
    density: &PyDensity,
    level: Option<usize>,
    seed: u64,
    radial_nodes: usize,
) -> PyResult<String> {
    let cfg = config(source.inner.dim(), level, false, seed, radial_nodes);
    let report = py.detach(|| lab::verify_stability(&source.inner, &density.inner, &cfg)).map_err(py_err)?;
    to_json(&report)
}

/// Maximal-volume inscribed ellipsoid as a row-major matrix `M` with `E = {x : x^T M x <= 1}`.
#[pyfunction]
fn john(body: &PyBody) -> PyResult<Vec<f64>> {
    Ok(john_ellipsoid(&body.inner).map_err(py_err)?.ellipsoid.row_major())
}

/// Sandwich certificate for a convex body. Returns JSON.
#[pyfunction]
#[pyo3(signature = (body, level = 16))]
fn sandwich_certificate(body: &PyBody, level: usize) -> PyResult<String> {
    let grid = sphere_grid(body.inner.dim(), GridSpec::gauss(level)).map_err(py_err)?;
    to_json(&sandwich(&body.inner, &grid).map_err(py_err)?)
}

/// Section volume computed as the spherical Radon transform of `rho^(n-1)/(n-1)`.
#[pyfunction]
#[pyo3(signature = (body, xi, level = 32))]
fn radon_section(body: &PyBody, xi: Vec<f64>, level: usize) -> PyResult<f64> {
    let f = SphereFunction::section_density(&body.inner).map_err(py_err)?;
    let xi = Direction::normalized(xi).map_err(py_err)?;
    radon::radon(&f, &xi, GridSpec::gauss(level)).map_err(py_err)
}

/// Rejection-sampling estimate of the body measure. Returns `(estimate, stderr)`.
#[pyfunction]
#[pyo3(signature = (body, density = None, samples = 1_000_000, seed = 1))]
fn mc_oracle(
    py: Python<'_>,
    body: &PyBody,
    density: Option<&PyDensity>,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let m = BodyMeasure::new(body.inner.clone(), density_or_uniform(density)).map_err(py_err)?;
    let est = py.detach(|| lab::mc_oracle(&m, samples, seed)).map_err(py_err)?;
    Ok((est.estimate, est.stderr))
}

#[pymodule]
#[pyo3(name = "slicekit")]
fn slicekit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBody>()?;
    m.add_class::<PyDensity>()?;
    m.add_function(wrap_pyfunction!(slicing_constant, m)?)?;
    m.add_function(wrap_pyfunction!(unit_ball_volume, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_area, m)?)?;
    m.add_function(wrap_pyfunction!(body_measure, m)?)?;
    m.add_function(wrap_pyfunction!(max_section, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(verify_stability, m)?)?;
    m.add_function(wrap_pyfunction!(john, m)?)?;
    m.add_function(wrap_pyfunction!(sandwich_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(radon_section, m)?)?;
    m.add_function(wrap_pyfunction!(mc_oracle, m)?)?;
    Ok(())
}

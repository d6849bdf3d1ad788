use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::tractor_mass::asymptotics::{check_equivalence as rs_check_equivalence, extract};
use ::tractor_mass::chart::{adapted_rho, hyperbolic_metric, kid_basis};
use ::tractor_mass::cocycle::{alignment_transform as rs_alignment, densities_of_tensor, AlignmentInput};
use ::tractor_mass::config::RunConfig;
use ::tractor_mass::families::{aspect_perturbation as rs_aspect, schwarzschild_ads as rs_schwarzschild, AspectProfile};
use ::tractor_mass::harmonics::Chi;
use ::tractor_mass::mass::{self, MassOptions};
use ::tractor_mass::metric::MetricField;
use ::tractor_mass::{EpsilonSchedule, Error, Matrix, Vector};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Inconclusive(_) | Error::DivergentTail(_) | Error::NonFinite(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a non-empty square matrix"));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// A metric on the Poincaré ball, compared against the hyperbolic metric.
#[pyclass(name = "Metric", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMetric {
    inner: MetricField,
}

#[pymethods]
impl PyMetric {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family().to_string()
    }

    fn params(&self) -> std::collections::BTreeMap<String, String> {
        self.inner.params().clone()
    }

    /// Components `h_ij(x)` at a point of the open ball.
    fn eval(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected {} coordinates", self.inner.dim())));
        }
        Ok(to_rows(&self.inner.eval(&Vector::from_vec(x))))
    }

    /// Push the metric forward by a rotation matrix.
    fn rotated(&self, rotation: Vec<Vec<f64>>) -> PyResult<PyMetric> {
        let r = from_rows(&rotation)?;
        if r.nrows() != self.inner.dim() {
            return Err(PyValueError::new_err("rotation has the wrong size"));
        }
        Ok(PyMetric { inner: self.inner.rotated(&r) })
    }

    fn __repr__(&self) -> String {
        format!("Metric(family={:?}, dim={}, params={:?})", self.inner.family(), self.inner.dim(), self.inner.params())
    }
}

#[pyfunction]
fn hyperbolic(n: usize) -> PyResult<PyMetric> {
    Ok(PyMetric { inner: hyperbolic_metric(n).map_err(py_err)? })
}

#[pyfunction]
fn schwarzschild_ads(n: usize, m: f64) -> PyResult<PyMetric> {
    Ok(PyMetric { inner: rs_schwarzschild(n, m).map_err(py_err)? })
}

/// Aspect perturbation with `χ(ω) = c0 + c·ω`, or spherical harmonics given as JSON.
#[pyfunction]
#[pyo3(signature = (n, c0=1.0, c=None, profile="trace", order=None, harmonics_json=None))]
fn aspect_perturbation(
    n: usize,
    c0: f64,
    c: Option<Vec<f64>>,
    profile: &str,
    order: Option<f64>,
    harmonics_json: Option<&str>,
) -> PyResult<PyMetric> {
    let chi = match harmonics_json {
        Some(text) => Chi::from_json(n, text).map_err(py_err)?,
        None => {
            let c = c.unwrap_or_else(|| vec![0.0; n]);
            if c.len() != n {
                return Err(PyValueError::new_err(format!("c must have {n} entries")));
            }
            Chi::Affine { c0, c: Vector::from_vec(c) }
        }
    };
    let profile: AspectProfile = profile.parse().map_err(py_err)?;
    Ok(PyMetric { inner: rs_aspect(n, &chi, profile, order).map_err(py_err)? })
}

/// Energy–momentum from one route.
#[pyclass(name = "MassReport", frozen)]
struct PyMassReport {
    inner: mass::MassReport,
}

#[pymethods]
impl PyMassReport {
    #[getter]
    fn route(&self) -> String {
        serde_json::to_value(self.inner.route).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    #[getter]
    fn p0(&self) -> f64 {
        self.inner.p0
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p.clone()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count
    }

    #[getter]
    fn status(&self) -> String {
        serde_json::to_value(self.inner.status()).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    /// Mass aspect `(ω, weight, m)` per quadrature node (tractor route only).
    fn aspect(&self) -> Option<Vec<(Vec<f64>, f64, f64)>> {
        self.inner
            .aspect
            .as_ref()
            .map(|a| a.iter().map(|s| (s.omega.clone(), s.weight, s.value)).collect())
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("MassReport(route={}, p0={:e}, p={:?})", self.route(), self.inner.p0, self.inner.p)
    }
}

fn options(eps0: f64, ratio: f64, count: usize, stages: usize, extraction_tol: f64) -> PyResult<MassOptions> {
    Ok(MassOptions {
        schedule: EpsilonSchedule::new(eps0, ratio, count, stages).map_err(py_err)?,
        extraction_tol,
    })
}

fn run_route(
    route: fn(&MetricField, &MetricField, &::tractor_mass::QuadratureRule, &MassOptions) -> ::tractor_mass::Result<mass::MassReport>,
    h: &PyMetric,
    level: usize,
    opts: MassOptions,
) -> PyResult<PyMassReport> {
    let n = h.inner.dim();
    let g = hyperbolic_metric(n).map_err(py_err)?;
    let q = ::tractor_mass::sphere_quadrature(n - 1, level).map_err(py_err)?;
    Ok(PyMassReport { inner: route(&g, &h.inner, &q, &opts).map_err(py_err)? })
}

#[pyfunction(name = "tractor_mass")]
#[pyo3(signature = (h, level=3, eps0=0.1, ratio=0.5, count=8, stages=4, extraction_tol=1e-6))]
fn py_tractor_mass(h: &PyMetric, level: usize, eps0: f64, ratio: f64, count: usize, stages: usize, extraction_tol: f64) -> PyResult<PyMassReport> {
    run_route(mass::tractor_mass, h, level, options(eps0, ratio, count, stages, extraction_tol)?)
}

#[pyfunction(name = "michel_mass")]
#[pyo3(signature = (h, level=3, eps0=0.1, ratio=0.5, count=8, stages=4, extraction_tol=1e-6))]
fn py_michel_mass(h: &PyMetric, level: usize, eps0: f64, ratio: f64, count: usize, stages: usize, extraction_tol: f64) -> PyResult<PyMassReport> {
    run_route(mass::michel_mass, h, level, options(eps0, ratio, count, stages, extraction_tol)?)
}

/// Both routes and their componentwise relative differences.
#[pyfunction]
#[pyo3(signature = (h, level=3, tol=1e-3))]
fn compare_routes(h: &PyMetric, level: usize, tol: f64) -> PyResult<(PyMassReport, PyMassReport, Vec<f64>, bool)> {
    let n = h.inner.dim();
    let g = hyperbolic_metric(n).map_err(py_err)?;
    let q = ::tractor_mass::sphere_quadrature(n - 1, level).map_err(py_err)?;
    let (t, m, cmp) = mass::compare_routes(&g, &h.inner, &q, &MassOptions::default(), tol).map_err(py_err)?;
    Ok((PyMassReport { inner: t }, PyMassReport { inner: m }, cmp.relative_diff, cmp.pass))
}

/// `(μ∞, error)` of `h` relative to the hyperbolic metric along `ω`.
#[pyfunction]
fn extract_mu(h: &PyMetric, omega: Vec<f64>) -> PyResult<(f64, f64)> {
    let n = h.inner.dim();
    let g = hyperbolic_metric(n).map_err(py_err)?;
    let d = extract(&g, &h.inner, &adapted_rho(n), &Vector::from_vec(omega), &EpsilonSchedule::default()).map_err(py_err)?;
    Ok((d.mu_inf, d.mu_err))
}

/// `(pass, fitted order or None)` of the order-of-contact test against the hyperbolic metric.
#[pyfunction]
fn check_equivalence(h: &PyMetric) -> PyResult<(bool, Option<f64>)> {
    let g = hyperbolic_metric(h.inner.dim()).map_err(py_err)?;
    let eq = rs_check_equivalence(&g, &h.inner, &EpsilonSchedule::default()).map_err(py_err)?;
    Ok((eq.pass, eq.order))
}

/// Nodes `(ω, weight)` of the spherical rule on `S^d`.
#[pyfunction]
fn sphere_quadrature(d: usize, level: usize) -> PyResult<Vec<(Vec<f64>, f64)>> {
    let q = ::tractor_mass::sphere_quadrature(d, level).map_err(py_err)?;
    Ok(q.nodes().iter().map(|(w, wt)| (w.iter().copied().collect(), *wt)).collect())
}

/// Values of the `n + 1` KID solutions at `x`.
#[pyfunction]
fn kid_values(x: Vec<f64>) -> PyResult<Vec<f64>> {
    let n = x.len();
    ::tractor_mass::chart::check_dim(n).map_err(py_err)?;
    let x = Vector::from_vec(x);
    if x.norm() >= 1.0 {
        return Err(PyValueError::new_err("point must lie in the open unit ball"));
    }
    Ok(kid_basis(n).iter().map(|v| v.eval(&x)).collect())
}

/// Aligned boundary tensor for the frame vector `normal`.
#[pyfunction]
#[pyo3(signature = (mu, normal=0))]
fn alignment_transform(mu: Vec<Vec<f64>>, normal: usize) -> PyResult<Vec<Vec<f64>>> {
    let m = from_rows(&mu)?;
    let order = m.nrows();
    Ok(to_rows(&rs_alignment(&AlignmentInput { mu: m, normal, order }).map_err(py_err)?))
}

/// Densities `(c1, c2, c)` of a boundary tensor.
#[pyfunction]
#[pyo3(signature = (mu, normal=0))]
fn densities(mu: Vec<Vec<f64>>, normal: usize) -> PyResult<(f64, f64, f64)> {
    let m = from_rows(&mu)?;
    if normal >= m.nrows() {
        return Err(PyValueError::new_err("normal index out of range"));
    }
    Ok(densities_of_tensor(&m, normal))
}

/// Run the invariant suite for a flat `key = value` configuration; returns `(status, JSON)`.
#[pyfunction]
#[pyo3(signature = (config=""))]
fn verify(config: &str) -> PyResult<(String, String)> {
    let mut c = RunConfig::default();
    c.apply_text(config).map_err(py_err)?;
    let report = ::tractor_mass::verify::run(&c).map_err(py_err)?;
    let status = serde_json::to_value(report.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let json = serde_json::to_string_pretty(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((status, json))
}

#[pymodule]
#[pyo3(name = "tractor_mass")]
fn tractor_mass_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetric>()?;
    m.add_class::<PyMassReport>()?;
    m.add_function(wrap_pyfunction!(hyperbolic, m)?)?;
    m.add_function(wrap_pyfunction!(schwarzschild_ads, m)?)?;
    m.add_function(wrap_pyfunction!(aspect_perturbation, m)?)?;
    m.add_function(wrap_pyfunction!(py_tractor_mass, m)?)?;
    m.add_function(wrap_pyfunction!(py_michel_mass, m)?)?;
    m.add_function(wrap_pyfunction!(compare_routes, m)?)?;
    m.add_function(wrap_pyfunction!(extract_mu, m)?)?;
    m.add_function(wrap_pyfunction!(check_equivalence, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(kid_values, m)?)?;
    m.add_function(wrap_pyfunction!(alignment_transform, m)?)?;
    m.add_function(wrap_pyfunction!(densities, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}

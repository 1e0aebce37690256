//! Python bindings: the `submersion_lab` extension module.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use submersion_lab::cli_runner::{cmd_check, cmd_curvature, cmd_validate, RunReport, Scenario, ScenarioConfig};
use submersion_lab::core_geometry::{random_unit_tangent, sectional_curvature, FiniteDiff, Manifold, ShapeData};
use submersion_lab::geometries::{self, GeodesicKFold, HopfFibration, HopfFlavor, Sphere};
use submersion_lab::graph_geometry::SmoothMap;
use submersion_lab::linalg::{rng_for, Vector};
use submersion_lab::pullback::{direct_second_fundamental_form, PullbackFrame};
use submersion_lab::submersion::RiemannianSubmersionBundle;
use submersion_lab::GeometryError;

fn err(e: GeometryError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(v: Vec<f64>) -> Vector {
    Vector::from_vec(v)
}

fn fd(step: Option<f64>) -> FiniteDiff {
    step.map_or_else(FiniteDiff::default, FiniteDiff::with_step)
}

pub fn flavor(name: &str) -> Result<HopfFlavor, GeometryError> {
    match name {
        "complex" => Ok(HopfFlavor::Complex),
        "quaternionic" => Ok(HopfFlavor::Quaternionic),
        "octonionic" => Ok(HopfFlavor::Octonionic),
        other => Err(GeometryError::Config(format!("unknown Hopf flavor `{other}` (expected complex, quaternionic or octonionic)"))),
    }
}

/// A run report as JSON text, one object holding every record.
pub fn report_json(report: &RunReport) -> String {
    serde_json::to_string(report).expect("reports serialize")
}

fn to_python(py: Python<'_>, json: String) -> PyResult<Bound<'_, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

/// Sectional curvature of the round sphere `S^dim(radius)` on the plane
/// spanned by two tangent vectors at `point`.
#[pyfunction]
#[pyo3(signature = (dim, radius, point, a, b, fd_step=None))]
fn sphere_sectional_curvature(dim: usize, radius: f64, point: Vec<f64>, a: Vec<f64>, b: Vec<f64>, fd_step: Option<f64>) -> PyResult<f64> {
    let s = Sphere::new(dim, radius);
    sectional_curvature(&s, &vector(point), &vector(a), &vector(b), &fd(fd_step)).map_err(err)
}

/// Product in the complex numbers, quaternions or octonions (by length).
#[pyfunction]
fn multiply(x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
    if x.len() != y.len() || ![2, 4, 8].contains(&x.len()) {
        return Err(PyValueError::new_err("operands must both have length 2, 4 or 8"));
    }
    Ok(geometries::multiply(&x, &y))
}

/// `(T_k(c), T_k'(c), U_{k-1}(c), U_{k-1}'(c))`.
#[pyfunction]
fn chebyshev(k: usize, c: f64) -> (f64, f64, f64, f64) {
    geometries::chebyshev(k, c)
}

/// Geodesic `k`-fold of the unit sphere about the last coordinate axis.
#[pyfunction]
fn geodesic_fold(k: usize, point: Vec<f64>) -> PyResult<Vec<f64>> {
    let n = point.len();
    if n < 2 {
        return Err(PyValueError::new_err("point must have at least two coordinates"));
    }
    let s: Arc<dyn Manifold> = Arc::new(Sphere::unit(n - 1));
    let mut pole = Vector::zeros(n);
    pole[n - 1] = 1.0;
    let fold = GeodesicKFold::new(s.clone(), s, k, pole, 1.0).map_err(err)?;
    Ok(fold.apply(&vector(point)).as_slice().to_vec())
}

/// A Hopf fibration `S^{2d-1} → S^d(1/2)`.
#[pyclass(name = "HopfBundle", frozen)]
struct PyHopfBundle {
    fibration: HopfFibration,
    bundle: RiemannianSubmersionBundle,
}

#[pymethods]
impl PyHopfBundle {
    #[new]
    fn new(flavor_name: &str) -> PyResult<Self> {
        let fibration = HopfFibration::new(flavor(flavor_name).map_err(err)?);
        let bundle = fibration.bundle();
        Ok(Self { fibration, bundle })
    }

    #[getter]
    fn fiber_dim(&self) -> usize {
        self.bundle.fiber_dim
    }

    fn project(&self, p: Vec<f64>) -> Vec<f64> {
        self.fibration.project(&vector(p)).as_slice().to_vec()
    }

    fn sample_point(&self, seed: u64) -> Vec<f64> {
        self.bundle.sample_point(&mut rng_for(seed, 0)).as_slice().to_vec()
    }

    fn horizontal_lift(&self, p: Vec<f64>, w: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = self.bundle.horizontal_lift(&vector(p), &vector(w), &FiniteDiff::default()).map_err(err)?;
        Ok(v.as_slice().to_vec())
    }

    fn a_tensor(&self, p: Vec<f64>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let v = self.bundle.a_tensor(&vector(p), &vector(x), &vector(y), &FiniteDiff::default()).map_err(err)?;
        Ok(v.as_slice().to_vec())
    }

    fn vertizontal_sec(&self, p: Vec<f64>, x: Vec<f64>, u: Vec<f64>) -> PyResult<f64> {
        self.bundle.vertizontal_sec(&vector(p), &vector(x), &vector(u), &FiniteDiff::default()).map_err(err)
    }

    /// Smallest singular value of `A_X` over sampled unit horizontal `X`.
    #[pyo3(signature = (points=200, directions=50, seed=0))]
    fn fatness(&self, points: usize, directions: usize, seed: u64) -> PyResult<f64> {
        Ok(self.bundle.fatness(points, directions, seed, &FiniteDiff::default()).map_err(err)?.min_sigma)
    }
}

/// A configured pull-back scenario, as read by the command-line tool.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: Scenario,
}

impl PyScenario {
    fn run(&self, py: Python<'_>, f: fn(&ScenarioConfig) -> submersion_lab::Result<RunReport>) -> PyResult<Py<PyAny>> {
        let config = self.inner.config.clone();
        let report = py.detach(|| f(&config)).map_err(err)?;
        Ok(to_python(py, report_json(&report))?.unbind())
    }
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let config = ScenarioConfig::from_toml(text).map_err(err)?;
        Ok(Self { inner: Scenario::build(config).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let config = ScenarioConfig::load(&path).map_err(err)?;
        Ok(Self { inner: Scenario::build(config).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.config.name.clone()
    }

    #[getter]
    fn intrinsic_dim(&self) -> usize {
        self.inner.pullback.intrinsic_dim()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.inner.pullback.ambient_dim()
    }

    fn random_point(&self, seed: u64) -> Vec<f64> {
        self.inner.pullback.random_point(&mut rng_for(seed, 0)).as_slice().to_vec()
    }

    fn random_tangent(&self, point: Vec<f64>, seed: u64) -> Vec<f64> {
        random_unit_tangent(&self.inner.pullback, &vector(point), &mut rng_for(seed, 1)).as_slice().to_vec()
    }

    fn sectional_curvature(&self, point: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        let pb = &self.inner.pullback;
        sectional_curvature(pb, &vector(point), &vector(a), &vector(b), &self.inner.config.fd()).map_err(err)
    }

    /// `(formula, direct)` second fundamental forms inside `M × P`.
    fn second_fundamental_form(&self, point: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let pb = &self.inner.pullback;
        let fd = self.inner.config.fd();
        let (z, a, b) = (vector(point), vector(a), vector(b));
        let formula = PullbackFrame::at(pb, &z, &fd).map_err(err)?.second_fundamental_form(&a, &b);
        let direct = direct_second_fundamental_form(pb, &ShapeData::at(pb, &z, &fd).map_err(err)?, &a, &b);
        Ok((formula.as_slice().to_vec(), direct.as_slice().to_vec()))
    }

    fn validate(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        self.run(py, cmd_validate)
    }

    fn check(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        self.run(py, cmd_check)
    }

    fn curvature(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        self.run(py, cmd_curvature)
    }
}

#[pymodule]
#[pyo3(name = "submersion_lab")]
fn submersion_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(sphere_sectional_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(multiply, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic_fold, m)?)?;
    m.add_class::<PyHopfBundle>()?;
    m.add_class::<PyScenario>()?;
    Ok(())
}

//! Calculus on submanifolds of flat ambient space.
//!
//! A manifold is described by its tangent-projector field `x ↦ P(x)` and a
//! retraction. Everything else (covariant derivatives, second fundamental
//! forms, curvature) is derived from those two through the flat-ambient
//! Gauss equation, so only first derivatives of `P` are ever needed.

use std::fmt;
use std::sync::Arc;

use crate::error::{GeometryError, Result};
use crate::linalg::{gaussian_vector, range_basis, Matrix, SampleRng, Vector};

pub const MEMBERSHIP_TOL: f64 = 1e-8;
pub const TANGENCY_TOL: f64 = 1e-9;
pub const GRAM_TOL: f64 = 1e-12;

/// An embedded submanifold of `R^ambient_dim` with the induced metric.
pub trait Manifold: Send + Sync + fmt::Debug {
    fn ambient_dim(&self) -> usize;
    fn intrinsic_dim(&self) -> usize;

    /// Orthogonal projector onto `T_x M`, as an ambient matrix.
    fn projector(&self, x: &Vector) -> Matrix;

    /// Retraction `R_x(v)`; must satisfy `R_x(0) = x` on the manifold.
    fn retract(&self, x: &Vector, v: &Vector) -> Vector;

    /// Directional derivative `dP_x[v]`, when known in closed form.
    fn projector_derivative(&self, _x: &Vector, _v: &Vector) -> Option<Matrix> {
        None
    }

    fn random_point(&self, rng: &mut SampleRng) -> Vector;

    fn label(&self) -> String;
}

pub type ManifoldRef = Arc<dyn Manifold>;

/// Finite-difference settings: central differences along retraction curves
/// with one Richardson extrapolation step (`h` and `h/2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiff {
    pub step: f64,
    /// Use closed-form projector derivatives when the manifold provides them.
    pub use_analytic: bool,
}

impl Default for FiniteDiff {
    fn default() -> Self {
        Self { step: 1e-4, use_analytic: true }
    }
}

impl FiniteDiff {
    pub fn with_step(step: f64) -> Self {
        Self { step, ..Self::default() }
    }

    pub fn numeric_only(mut self) -> Self {
        self.use_analytic = false;
        self
    }

    fn central(&self, m: &dyn Manifold, x: &Vector, dir: &Vector, h: f64, f: &dyn Fn(&Vector) -> Matrix) -> Matrix {
        let plus = f(&m.retract(x, &(dir * h)));
        let minus = f(&m.retract(x, &(dir * -h)));
        (plus - minus) / (2.0 * h)
    }

    /// `d/dt f(R_x(t v))` at `t = 0`, Richardson-extrapolated.
    pub fn along(&self, m: &dyn Manifold, x: &Vector, v: &Vector, f: impl Fn(&Vector) -> Matrix) -> Matrix {
        let norm = v.norm();
        if norm == 0.0 {
            let shape = f(x).shape();
            return Matrix::zeros(shape.0, shape.1);
        }
        let dir = v / norm;
        let coarse = self.central(m, x, &dir, self.step, &f);
        let fine = self.central(m, x, &dir, 0.5 * self.step, &f);
        (fine * 4.0 - coarse) * (norm / 3.0)
    }

    /// Same as [`FiniteDiff::along`] for vector-valued functions.
    pub fn along_vector(&self, m: &dyn Manifold, x: &Vector, v: &Vector, f: impl Fn(&Vector) -> Vector) -> Vector {
        let d = self.along(m, x, v, |y| {
            let out = f(y);
            Matrix::from_column_slice(out.len(), 1, out.as_slice())
        });
        d.column(0).into_owned()
    }

    /// Plain Richardson error estimate `|D(h/2) - D(h)|` for diagnostics.
    pub fn error_estimate(&self, m: &dyn Manifold, x: &Vector, v: &Vector, f: impl Fn(&Vector) -> Matrix) -> f64 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let dir = v / norm;
        let coarse = self.central(m, x, &dir, self.step, &f);
        let fine = self.central(m, x, &dir, 0.5 * self.step, &f);
        (fine - coarse).norm() * norm
    }
}

/// A tangent vector in ambient coordinates, checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base_point: Vector,
    pub components: Vector,
}

impl TangentVector {
    pub fn new(m: &dyn Manifold, base_point: Vector, components: Vector) -> Result<Self> {
        check_membership(m, &base_point)?;
        let p = m.projector(&base_point);
        let residual = (&p * &components - &components).norm();
        if residual > TANGENCY_TOL * components.norm().max(1.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "vector is not tangent: projection residual {residual:.3e}"
            )));
        }
        Ok(Self { base_point, components })
    }

    /// Tangent projection of an arbitrary ambient vector.
    pub fn project(m: &dyn Manifold, base_point: Vector, ambient: &Vector) -> Result<Self> {
        check_membership(m, &base_point)?;
        let components = m.projector(&base_point) * ambient;
        Ok(Self { base_point, components })
    }
}

/// A vector field given pointwise in ambient coordinates.
#[derive(Clone)]
pub struct VectorField(Arc<dyn Fn(&Vector) -> Vector + Send + Sync>);

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VectorField")
    }
}

impl VectorField {
    pub fn new(f: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    /// The canonical extension `y ↦ P(y) v` of an ambient vector.
    pub fn projected_constant(m: ManifoldRef, v: Vector) -> Self {
        Self::new(move |y| m.projector(y) * &v)
    }

    pub fn eval(&self, y: &Vector) -> Vector {
        (self.0)(y)
    }
}

pub fn check_membership(m: &dyn Manifold, x: &Vector) -> Result<()> {
    if x.len() != m.ambient_dim() {
        return Err(GeometryError::DimensionMismatch(format!(
            "point has {} coordinates, ambient dimension is {}",
            x.len(),
            m.ambient_dim()
        )));
    }
    let back = m.retract(x, &Vector::zeros(x.len()));
    let distance = (back - x).norm();
    if !(distance <= MEMBERSHIP_TOL) {
        return Err(GeometryError::PointOffManifold { distance, tolerance: MEMBERSHIP_TOL });
    }
    Ok(())
}

pub fn tangent_projector(m: &dyn Manifold, x: &Vector) -> Result<Matrix> {
    check_membership(m, x)?;
    Ok(m.projector(x))
}

/// Deterministic orthonormal basis of `T_x M` (columns, ambient coordinates).
pub fn tangent_basis(m: &dyn Manifold, x: &Vector) -> Matrix {
    range_basis(&m.projector(x), m.intrinsic_dim())
}

pub fn random_tangent(m: &dyn Manifold, x: &Vector, rng: &mut SampleRng) -> Vector {
    m.projector(x) * gaussian_vector(rng, m.ambient_dim())
}

pub fn random_unit_tangent(m: &dyn Manifold, x: &Vector, rng: &mut SampleRng) -> Vector {
    let v = random_tangent(m, x, rng);
    let n = v.norm();
    v / n
}

/// `dP_x[v]`, closed form when available and allowed, otherwise numeric.
pub fn projector_derivative(m: &dyn Manifold, x: &Vector, v: &Vector, fd: &FiniteDiff) -> Matrix {
    if fd.use_analytic {
        if let Some(d) = m.projector_derivative(x, v) {
            return d;
        }
    }
    fd.along(m, x, v, |y| m.projector(y))
}

/// `∇_X Y = P(x) · d/dt Y(R_x(tX))`.
pub fn covariant_derivative(m: &dyn Manifold, field: &VectorField, x: &Vector, v: &Vector, fd: &FiniteDiff) -> Result<Vector> {
    check_membership(m, x)?;
    let d = fd.along_vector(m, x, v, |y| field.eval(y));
    Ok(m.projector(x) * d)
}

/// Lie bracket `[X, Y] = D_X Y - D_Y X`, tangent-projected.
pub fn lie_bracket(m: &dyn Manifold, a: &VectorField, b: &VectorField, x: &Vector, fd: &FiniteDiff) -> Result<Vector> {
    check_membership(m, x)?;
    let xa = a.eval(x);
    let xb = b.eval(x);
    let db_along_a = fd.along_vector(m, x, &xa, |y| b.eval(y));
    let da_along_b = fd.along_vector(m, x, &xb, |y| a.eval(y));
    Ok(m.projector(x) * (db_along_a - da_along_b))
}

/// `II(X, Y) = (I - P) dP[X] Y`: the normal part of the derivative of the
/// canonical extension `y ↦ P(y) Y` along `X`.
pub fn second_fundamental_form(m: &dyn Manifold, x: &Vector, a: &Vector, b: &Vector, fd: &FiniteDiff) -> Vector {
    let p = m.projector(x);
    let dp = projector_derivative(m, x, a, fd);
    let d = dp * b;
    &d - &p * &d
}

/// Second fundamental form materialized at one point.
///
/// `dP` is sampled once per tangent basis direction, which makes `II`
/// exactly bilinear and the curvature tensor exactly multilinear in its
/// arguments.
#[derive(Debug, Clone)]
pub struct ShapeData {
    pub point: Vector,
    pub projector: Matrix,
    pub basis: Matrix,
    normal_derivs: Vec<Matrix>,
}

impl ShapeData {
    pub fn at(m: &dyn Manifold, x: &Vector, fd: &FiniteDiff) -> Result<Self> {
        check_membership(m, x)?;
        let projector = m.projector(x);
        let basis = range_basis(&projector, m.intrinsic_dim());
        let complement = Matrix::identity(x.len(), x.len()) - &projector;
        let normal_derivs = basis
            .column_iter()
            .map(|b| &complement * projector_derivative(m, x, &b.into_owned(), fd))
            .collect();
        Ok(Self { point: x.clone(), projector, basis, normal_derivs })
    }

    pub fn second_fundamental_form(&self, a: &Vector, b: &Vector) -> Vector {
        let coeffs = self.basis.transpose() * a;
        let mut out = Vector::zeros(self.point.len());
        for (c, nd) in coeffs.iter().zip(&self.normal_derivs) {
            out += nd * b * *c;
        }
        out
    }

    /// `R(X,Y,Z,W) = <II(X,W), II(Y,Z)> - <II(X,Z), II(Y,W)>`, normalized so
    /// that `R(X,Y,Y,X)` is the sectional curvature numerator.
    pub fn riemann(&self, x: &Vector, y: &Vector, z: &Vector, w: &Vector) -> f64 {
        let xw = self.second_fundamental_form(x, w);
        let yz = self.second_fundamental_form(y, z);
        let xz = self.second_fundamental_form(x, z);
        let yw = self.second_fundamental_form(y, w);
        xw.dot(&yz) - xz.dot(&yw)
    }

    pub fn sectional_curvature(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let gram = plane_gram(x, y);
        if !(gram > GRAM_TOL) {
            return Err(GeometryError::DegeneratePlane { gram });
        }
        Ok(self.riemann(x, y, y, x) / gram)
    }
}

pub fn plane_gram(x: &Vector, y: &Vector) -> f64 {
    x.norm_squared() * y.norm_squared() - x.dot(y).powi(2)
}

pub fn riemann(m: &dyn Manifold, x: &Vector, a: &Vector, b: &Vector, c: &Vector, d: &Vector, fd: &FiniteDiff) -> Result<f64> {
    Ok(ShapeData::at(m, x, fd)?.riemann(a, b, c, d))
}

pub fn sectional_curvature(m: &dyn Manifold, x: &Vector, a: &Vector, b: &Vector, fd: &FiniteDiff) -> Result<f64> {
    let gram = plane_gram(a, b);
    if !(gram > GRAM_TOL) {
        return Err(GeometryError::DegeneratePlane { gram });
    }
    check_membership(m, x)?;
    let p = m.projector(x);
    let q = Matrix::identity(x.len(), x.len()) - &p;
    let da = &q * projector_derivative(m, x, a, fd);
    let db = &q * projector_derivative(m, x, b, fd);
    let num = (&da * a).dot(&(&db * b)) - (&da * b).dot(&(&db * a));
    Ok(num / gram)
}

use std::sync::Arc;

use crate::core_geometry::ManifoldRef;
use crate::error::{GeometryError, Result};
use crate::graph_geometry::{MapRef, SmoothMap};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct IdentityMap {
    space: ManifoldRef,
}

impl IdentityMap {
    pub fn new(space: ManifoldRef) -> Self {
        Self { space }
    }
}

impl SmoothMap for IdentityMap {
    fn source(&self) -> &ManifoldRef {
        &self.space
    }
    fn target(&self) -> &ManifoldRef {
        &self.space
    }
    fn apply(&self, x: &Vector) -> Vector {
        x.clone()
    }
    fn jacobian(&self, x: &Vector) -> Option<Matrix> {
        Some(Matrix::identity(x.len(), x.len()))
    }
    fn label(&self) -> String {
        "identity".into()
    }
}

#[derive(Debug, Clone)]
pub struct ConstantMap {
    source: ManifoldRef,
    target: ManifoldRef,
    value: Vector,
}

impl ConstantMap {
    pub fn new(source: ManifoldRef, target: ManifoldRef, value: Vector) -> Self {
        Self { source, target, value }
    }
}

impl SmoothMap for ConstantMap {
    fn source(&self) -> &ManifoldRef {
        &self.source
    }
    fn target(&self) -> &ManifoldRef {
        &self.target
    }
    fn apply(&self, _x: &Vector) -> Vector {
        self.value.clone()
    }
    fn jacobian(&self, x: &Vector) -> Option<Matrix> {
        Some(Matrix::zeros(self.value.len(), x.len()))
    }
    fn label(&self) -> String {
        "constant".into()
    }
}

/// Linear map between flat spaces.
#[derive(Debug, Clone)]
pub struct LinearMap {
    source: ManifoldRef,
    target: ManifoldRef,
    matrix: Matrix,
}

impl LinearMap {
    pub fn new(source: ManifoldRef, target: ManifoldRef, matrix: Matrix) -> Self {
        assert_eq!(matrix.shape(), (target.ambient_dim(), source.ambient_dim()));
        Self { source, target, matrix }
    }
}

impl SmoothMap for LinearMap {
    fn source(&self) -> &ManifoldRef {
        &self.source
    }
    fn target(&self) -> &ManifoldRef {
        &self.target
    }
    fn apply(&self, x: &Vector) -> Vector {
        &self.matrix * x
    }
    fn jacobian(&self, _x: &Vector) -> Option<Matrix> {
        Some(self.matrix.clone())
    }
    fn label(&self) -> String {
        "linear".into()
    }
}

/// Projection of a product `A × B` onto its first factor.
#[derive(Debug, Clone)]
pub struct FactorProjection {
    source: ManifoldRef,
    target: ManifoldRef,
}

impl FactorProjection {
    pub fn first(source: ManifoldRef, target: ManifoldRef) -> Self {
        Self { source, target }
    }
}

impl SmoothMap for FactorProjection {
    fn source(&self) -> &ManifoldRef {
        &self.source
    }
    fn target(&self) -> &ManifoldRef {
        &self.target
    }
    fn apply(&self, x: &Vector) -> Vector {
        x.rows(0, self.target.ambient_dim()).into_owned()
    }
    fn jacobian(&self, _x: &Vector) -> Option<Matrix> {
        let n = self.target.ambient_dim();
        let mut j = Matrix::zeros(n, self.source.ambient_dim());
        j.view_mut((0, 0), (n, n)).fill_with_identity();
        Some(j)
    }
    fn label(&self) -> String {
        "factor_projection".into()
    }
}

/// Chebyshev values `(T_k(c), T_k'(c), U_{k-1}(c), U_{k-1}'(c))` by the
/// three-term recurrences; `U_{-1} = 0`.
pub fn chebyshev(k: usize, c: f64) -> (f64, f64, f64, f64) {
    // T
    let (mut t0, mut t1, mut dt0, mut dt1) = (1.0, c, 0.0, 1.0);
    // U, shifted so that (u0, u1) = (U_{-1}, U_0)
    let (mut u0, mut u1, mut du0, mut du1) = (0.0, 1.0, 0.0, 0.0);
    if k == 0 {
        return (1.0, 0.0, 0.0, 0.0);
    }
    for _ in 1..k {
        let t2 = 2.0 * c * t1 - t0;
        let dt2 = 2.0 * t1 + 2.0 * c * dt1 - dt0;
        (t0, t1, dt0, dt1) = (t1, t2, dt1, dt2);
        let u2 = 2.0 * c * u1 - u0;
        let du2 = 2.0 * u1 + 2.0 * c * du1 - du0;
        (u0, u1, du0, du1) = (u1, u2, du1, du2);
    }
    (t1, dt1, u1, du1)
}

/// Geodesic `k`-fold of `S^n`: the polar angle from `pole` is multiplied
/// by `k`. In Chebyshev form, with `c = <y, e₀>`,
/// `y ↦ T_k(c) e₀ + U_{k-1}(c) (y - c e₀)`, which is polynomial in `y`.
/// The image is scaled onto the target sphere radius.
#[derive(Debug, Clone)]
pub struct GeodesicKFold {
    source: ManifoldRef,
    target: ManifoldRef,
    pub k: usize,
    pub pole: Vector,
    pub scale: f64,
}

impl GeodesicKFold {
    pub fn new(source: ManifoldRef, target: ManifoldRef, k: usize, pole: Vector, scale: f64) -> Result<Self> {
        if source.ambient_dim() != target.ambient_dim() || pole.len() != source.ambient_dim() {
            return Err(GeometryError::DimensionMismatch("geodesic fold needs equal sphere dimensions".into()));
        }
        if (pole.norm() - 1.0).abs() > 1e-12 {
            return Err(GeometryError::InvalidParameter("pole must be a unit vector".into()));
        }
        Ok(Self { source, target, k, pole, scale })
    }

    /// `cos(kt) e₀ + sin(kt) X` for `y = cos(t) e₀ + sin(t) X`.
    pub fn angle_form(&self, y: &Vector) -> Vector {
        let c = self.pole.dot(y).clamp(-1.0, 1.0);
        let t = c.acos();
        let w = y - &self.pole * c;
        let dir = &w / w.norm();
        let kt = self.k as f64 * t;
        (&self.pole * kt.cos() + dir * kt.sin()) * self.scale
    }
}

impl SmoothMap for GeodesicKFold {
    fn source(&self) -> &ManifoldRef {
        &self.source
    }
    fn target(&self) -> &ManifoldRef {
        &self.target
    }
    fn apply(&self, y: &Vector) -> Vector {
        let c = self.pole.dot(y);
        let (t, _, u, _) = chebyshev(self.k, c);
        (&self.pole * t + (y - &self.pole * c) * u) * self.scale
    }
    fn jacobian(&self, y: &Vector) -> Option<Matrix> {
        let n = y.len();
        let c = self.pole.dot(y);
        let (_, dt, u, du) = chebyshev(self.k, c);
        let e = &self.pole;
        let w = y - e * c;
        let ee = e * e.transpose();
        let j = &ee * dt + &w * e.transpose() * du + (Matrix::identity(n, n) - ee) * u;
        Some(j * self.scale)
    }
    fn label(&self) -> String {
        format!("geodesic_fold({})", self.k)
    }
}

/// `x ↦ r (x/r + δ a) / |x/r + δ a|` on `S^n(r)`; a diffeomorphism for `δ < 1`.
#[derive(Debug, Clone)]
pub struct PerturbationDiffeo {
    sphere: ManifoldRef,
    pub delta: f64,
    pub axis: Vector,
    radius: f64,
}

impl PerturbationDiffeo {
    pub fn new(sphere: ManifoldRef, radius: f64, delta: f64, axis: Vector) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(GeometryError::InvalidParameter(format!("perturbation delta must lie in [0, 1), got {delta}")));
        }
        if (axis.norm() - 1.0).abs() > 1e-12 || axis.len() != sphere.ambient_dim() {
            return Err(GeometryError::InvalidParameter("perturbation axis must be a unit ambient vector".into()));
        }
        Ok(Self { sphere, delta, axis, radius })
    }
}

impl SmoothMap for PerturbationDiffeo {
    fn source(&self) -> &ManifoldRef {
        &self.sphere
    }
    fn target(&self) -> &ManifoldRef {
        &self.sphere
    }
    fn apply(&self, x: &Vector) -> Vector {
        let q = x / self.radius + &self.axis * self.delta;
        let n = q.norm();
        q * (self.radius / n)
    }
    fn jacobian(&self, x: &Vector) -> Option<Matrix> {
        let q = x / self.radius + &self.axis * self.delta;
        let n = q.norm();
        let qh = &q / n;
        Some((Matrix::identity(q.len(), q.len()) - &qh * qh.transpose()) / n)
    }
    fn label(&self) -> String {
        format!("perturbed({})", self.delta)
    }
}

/// `outer ∘ inner`.
#[derive(Debug, Clone)]
pub struct Composition {
    pub outer: MapRef,
    pub inner: MapRef,
}

impl SmoothMap for Composition {
    fn source(&self) -> &ManifoldRef {
        self.inner.source()
    }
    fn target(&self) -> &ManifoldRef {
        self.outer.target()
    }
    fn apply(&self, x: &Vector) -> Vector {
        self.outer.apply(&self.inner.apply(x))
    }
    fn jacobian(&self, x: &Vector) -> Option<Matrix> {
        let ji = self.inner.jacobian(x)?;
        let jo = self.outer.jacobian(&self.inner.apply(x))?;
        Some(jo * ji)
    }
    fn label(&self) -> String {
        format!("compose({}, {})", self.outer.label(), self.inner.label())
    }
}

pub fn compose(outer: MapRef, inner: MapRef) -> Result<MapRef> {
    if outer.source().ambient_dim() != inner.target().ambient_dim()
        || outer.source().intrinsic_dim() != inner.target().intrinsic_dim()
    {
        return Err(GeometryError::DimensionMismatch(format!(
            "cannot compose {} after {}: {} vs {}",
            outer.label(),
            inner.label(),
            outer.source().label(),
            inner.target().label()
        )));
    }
    Ok(Arc::new(Composition { outer, inner }))
}

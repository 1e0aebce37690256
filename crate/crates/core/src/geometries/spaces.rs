use std::sync::Arc;

use crate::core_geometry::{Manifold, ManifoldRef};
use crate::error::{GeometryError, Result};
use crate::graph_geometry::SmoothMap;
use crate::linalg::{block_diag, concat, gaussian_vector, split, Matrix, SampleRng, Vector};
use crate::submersion::FiberChart;

/// Round sphere `S^n(r) ⊂ R^{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub dim: usize,
    pub radius: f64,
}

impl Sphere {
    pub fn new(dim: usize, radius: f64) -> Self {
        assert!(dim >= 1 && radius > 0.0, "sphere needs dim >= 1 and radius > 0");
        Self { dim, radius }
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(dim, 1.0)
    }
}

impl Manifold for Sphere {
    fn ambient_dim(&self) -> usize {
        self.dim + 1
    }

    fn intrinsic_dim(&self) -> usize {
        self.dim
    }

    fn projector(&self, x: &Vector) -> Matrix {
        let n = self.dim + 1;
        Matrix::identity(n, n) - x * x.transpose() / (self.radius * self.radius)
    }

    fn retract(&self, x: &Vector, v: &Vector) -> Vector {
        let y = x + v;
        let norm = y.norm();
        y * (self.radius / norm)
    }

    fn projector_derivative(&self, x: &Vector, v: &Vector) -> Option<Matrix> {
        Some(-(v * x.transpose() + x * v.transpose()) / (self.radius * self.radius))
    }

    fn random_point(&self, rng: &mut SampleRng) -> Vector {
        let g = gaussian_vector(rng, self.dim + 1);
        let n = g.norm();
        g * (self.radius / n)
    }

    fn label(&self) -> String {
        if self.radius == 1.0 {
            format!("S^{}", self.dim)
        } else {
            format!("S^{}({})", self.dim, self.radius)
        }
    }
}

/// Flat `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean {
    pub dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Manifold for Euclidean {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn intrinsic_dim(&self) -> usize {
        self.dim
    }

    fn projector(&self, _x: &Vector) -> Matrix {
        Matrix::identity(self.dim, self.dim)
    }

    fn retract(&self, x: &Vector, v: &Vector) -> Vector {
        x + v
    }

    fn projector_derivative(&self, _x: &Vector, _v: &Vector) -> Option<Matrix> {
        Some(Matrix::zeros(self.dim, self.dim))
    }

    fn random_point(&self, rng: &mut SampleRng) -> Vector {
        gaussian_vector(rng, self.dim)
    }

    fn label(&self) -> String {
        format!("R^{}", self.dim)
    }
}

/// Riemannian product `A × B` in `R^{a + b}`.
#[derive(Debug, Clone)]
pub struct ProductManifold {
    pub first: ManifoldRef,
    pub second: ManifoldRef,
}

impl ProductManifold {
    pub fn new(first: ManifoldRef, second: ManifoldRef) -> Self {
        Self { first, second }
    }

    pub fn split(&self, v: &Vector) -> (Vector, Vector) {
        split(v, self.first.ambient_dim())
    }
}

impl Manifold for ProductManifold {
    fn ambient_dim(&self) -> usize {
        self.first.ambient_dim() + self.second.ambient_dim()
    }

    fn intrinsic_dim(&self) -> usize {
        self.first.intrinsic_dim() + self.second.intrinsic_dim()
    }

    fn projector(&self, x: &Vector) -> Matrix {
        let (a, b) = self.split(x);
        block_diag(&self.first.projector(&a), &self.second.projector(&b))
    }

    fn retract(&self, x: &Vector, v: &Vector) -> Vector {
        let (a, b) = self.split(x);
        let (va, vb) = self.split(v);
        concat(&self.first.retract(&a, &va), &self.second.retract(&b, &vb))
    }

    fn projector_derivative(&self, x: &Vector, v: &Vector) -> Option<Matrix> {
        let (a, b) = self.split(x);
        let (va, vb) = self.split(v);
        let da = self.first.projector_derivative(&a, &va)?;
        let db = self.second.projector_derivative(&b, &vb)?;
        Some(block_diag(&da, &db))
    }

    fn random_point(&self, rng: &mut SampleRng) -> Vector {
        let a = self.first.random_point(rng);
        let b = self.second.random_point(rng);
        concat(&a, &b)
    }

    fn label(&self) -> String {
        format!("{} x {}", self.first.label(), self.second.label())
    }
}

/// Surface of revolution `x² + y² = ρ(z)²` with `ρ(z) = exp(slope · z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedTube {
    pub slope: f64,
}

impl WarpedTube {
    pub fn new(slope: f64) -> Self {
        Self { slope }
    }

    pub fn radius_at(&self, z: f64) -> f64 {
        (self.slope * z).exp()
    }

    fn on_level(&self, q: &Vector, z: f64) -> Vector {
        let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
        let rho = self.radius_at(z);
        Vector::from_vec(vec![q[0] * rho / r, q[1] * rho / r, z])
    }
}

impl Manifold for WarpedTube {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn intrinsic_dim(&self) -> usize {
        2
    }

    fn projector(&self, x: &Vector) -> Matrix {
        let rho = self.radius_at(x[2]);
        let n = Vector::from_vec(vec![x[0], x[1], -rho * rho * self.slope]);
        let n = &n / n.norm();
        Matrix::identity(3, 3) - &n * n.transpose()
    }

    fn retract(&self, x: &Vector, v: &Vector) -> Vector {
        let q = x + v;
        self.on_level(&q, q[2])
    }

    fn random_point(&self, rng: &mut SampleRng) -> Vector {
        let g = gaussian_vector(rng, 3);
        self.on_level(&g, 0.5 * g[2])
    }

    fn label(&self) -> String {
        format!("warped_tube({})", self.slope)
    }
}

/// Height function of the warped tube, `(x, y, z) ↦ z`.
#[derive(Debug, Clone)]
pub struct TubeHeight {
    source: ManifoldRef,
    target: ManifoldRef,
}

impl TubeHeight {
    pub fn new(source: ManifoldRef, target: ManifoldRef) -> Self {
        Self { source, target }
    }
}

impl SmoothMap for TubeHeight {
    fn source(&self) -> &ManifoldRef {
        &self.source
    }
    fn target(&self) -> &ManifoldRef {
        &self.target
    }
    fn apply(&self, x: &Vector) -> Vector {
        Vector::from_element(1, x[2])
    }
    fn jacobian(&self, _x: &Vector) -> Option<Matrix> {
        Some(Matrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0]))
    }
    fn label(&self) -> String {
        "height".into()
    }
}

#[derive(Debug)]
pub struct TubeFiberChart {
    pub tube: Arc<WarpedTube>,
}

impl FiberChart for TubeFiberChart {
    fn fiber_point(&self, n: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(vec![self.tube.radius_at(n[0]), 0.0, n[0]]))
    }

    fn fiber_project(&self, p: &Vector, n: &Vector) -> Result<Vector> {
        if p[0].hypot(p[1]) == 0.0 {
            return Err(GeometryError::InvalidParameter("point on the tube axis".into()));
        }
        Ok(self.tube.on_level(p, n[0]))
    }
}

//! Built-in manifolds, maps and bundles.

mod algebra;
mod hopf;
mod maps;
mod spaces;

pub use algebra::{conjugate, left_multiplication, multiply, DivisionAlgebra};
pub use hopf::{HopfFiberChart, HopfFibration, HopfFlavor, HopfProjection, HOPF_BASE_RADIUS};
pub use maps::{
    chebyshev, compose, Composition, ConstantMap, FactorProjection, GeodesicKFold, IdentityMap, LinearMap,
    PerturbationDiffeo,
};
pub use spaces::{Euclidean, ProductManifold, Sphere, TubeFiberChart, TubeHeight, WarpedTube};

use std::sync::Arc;

use crate::core_geometry::ManifoldRef;
use crate::error::{GeometryError, Result};
use crate::linalg::Vector;
use crate::submersion::{FiberChart, RiemannianSubmersionBundle};

/// Trivial bundle `N × F → N` with the product metric.
pub fn trivial_bundle(base: ManifoldRef, fiber: ManifoldRef) -> RiemannianSubmersionBundle {
    let total: ManifoldRef = Arc::new(ProductManifold::new(base.clone(), fiber.clone()));
    let projection = Arc::new(FactorProjection::first(total.clone(), base.clone()));
    let chart = Arc::new(ProductFiberChart { base: base.clone(), fiber: fiber.clone() });
    RiemannianSubmersionBundle::new(
        format!("trivial({}, {})", base.label(), fiber.label()),
        total,
        base,
        projection,
        fiber.intrinsic_dim(),
        chart,
    )
}

/// Surface of revolution `x² + y² = exp(2 slope z)` over the `z` axis.
/// Its circle fibers are not geodesic whenever `slope ≠ 0`; used as a
/// broken fixture for the fiber-geodesy check.
pub fn warped_tube_bundle(slope: f64) -> RiemannianSubmersionBundle {
    let tube = Arc::new(WarpedTube::new(slope));
    let total: ManifoldRef = tube.clone();
    let base: ManifoldRef = Arc::new(Euclidean::new(1));
    let projection = Arc::new(TubeHeight::new(total.clone(), base.clone()));
    RiemannianSubmersionBundle::new(
        format!("warped_tube({slope})"),
        total,
        base,
        projection,
        1,
        Arc::new(TubeFiberChart { tube }),
    )
}

#[derive(Debug)]
struct ProductFiberChart {
    base: ManifoldRef,
    fiber: ManifoldRef,
}

impl FiberChart for ProductFiberChart {
    fn fiber_point(&self, n: &Vector) -> Result<Vector> {
        let f = self.fiber.retract(&reference_point(self.fiber.as_ref()), &Vector::zeros(self.fiber.ambient_dim()));
        Ok(crate::linalg::concat(n, &f))
    }

    fn fiber_project(&self, p: &Vector, n: &Vector) -> Result<Vector> {
        let (_, f) = crate::linalg::split(p, self.base.ambient_dim());
        let on_fiber = self.fiber.retract(&f, &Vector::zeros(f.len()));
        if on_fiber.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidParameter("fiber projection undefined".into()));
        }
        Ok(crate::linalg::concat(n, &on_fiber))
    }
}

/// A canonical point: last coordinate axis scaled onto the manifold.
pub fn reference_point(m: &dyn crate::core_geometry::Manifold) -> Vector {
    let mut v = Vector::zeros(m.ambient_dim());
    let last = m.ambient_dim() - 1;
    v[last] = 1.0;
    m.retract(&v, &Vector::zeros(v.len()))
}

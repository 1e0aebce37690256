//! Hopf fibrations `S^{2d-1} → S^d(1/2)` for `d = 2, 4, 8`.
//!
//! With `p = (a, b)` the projection is `(a b̄, (|a|² - |b|²)/2)`. The fiber
//! over a base point is the unit sphere of a `d`-dimensional linear
//! subspace; for the complex and quaternionic flavors the fiber is the orbit
//! of the right action `(a, b) ↦ (a z, b z)` of unit scalars.

use std::sync::Arc;

use super::algebra::{conjugate, left_multiplication, multiply, DivisionAlgebra};
use super::spaces::Sphere;
use crate::core_geometry::{ManifoldRef, MEMBERSHIP_TOL};
use crate::error::{GeometryError, Result};
use crate::graph_geometry::{MapRef, SmoothMap};
use crate::linalg::{concat, spd_solve, split, Matrix, Vector};
use crate::submersion::{FiberChart, RiemannianSubmersionBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HopfFlavor {
    Complex,
    Quaternionic,
    Octonionic,
}

impl HopfFlavor {
    pub fn algebra(self) -> DivisionAlgebra {
        match self {
            Self::Complex => DivisionAlgebra::Complex,
            Self::Quaternionic => DivisionAlgebra::Quaternion,
            Self::Octonionic => DivisionAlgebra::Octonion,
        }
    }

    /// Dimension `d` of the algebra; also the base-sphere dimension.
    pub fn dim(self) -> usize {
        self.algebra().dim()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Complex => "hopf_complex",
            Self::Quaternionic => "hopf_quaternionic",
            Self::Octonionic => "hopf_octonionic",
        }
    }

    pub fn from_base_dim(d: usize) -> Option<Self> {
        match d {
            2 => Some(Self::Complex),
            4 => Some(Self::Quaternionic),
            8 => Some(Self::Octonionic),
            _ => None,
        }
    }
}

pub const HOPF_BASE_RADIUS: f64 = 0.5;

/// The Hopf projection as a smooth map.
#[derive(Debug, Clone)]
pub struct HopfProjection {
    pub flavor: HopfFlavor,
    source: ManifoldRef,
    target: ManifoldRef,
}

impl HopfProjection {
    pub fn new(flavor: HopfFlavor) -> Self {
        let d = flavor.dim();
        Self {
            flavor,
            source: Arc::new(Sphere::unit(2 * d - 1)),
            target: Arc::new(Sphere::new(d, HOPF_BASE_RADIUS)),
        }
    }
}

impl SmoothMap for HopfProjection {
    fn source(&self) -> &ManifoldRef {
        &self.source
    }
    fn target(&self) -> &ManifoldRef {
        &self.target
    }
    fn apply(&self, p: &Vector) -> Vector {
        let d = self.flavor.dim();
        let (a, b) = (&p.as_slice()[..d], &p.as_slice()[d..]);
        let mut out = multiply(a, &conjugate(b));
        let height = 0.5 * (a.iter().map(|v| v * v).sum::<f64>() - b.iter().map(|v| v * v).sum::<f64>());
        out.push(height);
        Vector::from_vec(out)
    }
    fn jacobian(&self, p: &Vector) -> Option<Matrix> {
        let d = self.flavor.dim();
        let (a, b) = (&p.as_slice()[..d], &p.as_slice()[d..]);
        let b_bar = conjugate(b);
        let mut j = Matrix::zeros(d + 1, 2 * d);
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            // d(a b̄) along da = e_k and along db = e_k
            let col_a = multiply(&e, &b_bar);
            let col_b = multiply(a, &conjugate(&e));
            for r in 0..d {
                j[(r, k)] = col_a[r];
                j[(r, d + k)] = col_b[r];
            }
            j[(d, k)] = a[k];
            j[(d, d + k)] = -b[k];
        }
        Some(j)
    }
    fn label(&self) -> String {
        self.flavor.name().into()
    }
}

const SOUTH_CHART_THRESHOLD: f64 = 1e-6;

/// Closed-form fiber utilities for a Hopf fibration.
#[derive(Debug, Clone, Copy)]
pub struct HopfFiberChart {
    pub flavor: HopfFlavor,
}

/// Fiber over a base point as the graph of a linear map between the two
/// algebra coordinates.
enum FiberSubspace {
    /// `a = K b`, used in the southern hemisphere (`|b|² ≥ 1/2`).
    AOverB(Matrix),
    /// `b = K a`, used in the northern hemisphere.
    BOverA(Matrix),
}

impl HopfFiberChart {
    fn unit_base(&self, n: &Vector) -> Result<(Vec<f64>, f64)> {
        let d = self.flavor.dim();
        if n.len() != d + 1 {
            return Err(GeometryError::DimensionMismatch(format!("base point needs {} coordinates", d + 1)));
        }
        let distance = (n.norm() - HOPF_BASE_RADIUS).abs();
        if distance > MEMBERSHIP_TOL {
            return Err(GeometryError::PointOffManifold { distance, tolerance: MEMBERSHIP_TOL });
        }
        let u = n / n.norm();
        Ok((u.as_slice()[..d].to_vec(), u[d]))
    }

    fn subspace(&self, c: &[f64], s: f64) -> FiberSubspace {
        if s <= 0.0 {
            let beta2 = 0.5 * (1.0 - s);
            FiberSubspace::AOverB(left_multiplication(c) / (2.0 * beta2))
        } else {
            let alpha2 = 0.5 * (1.0 + s);
            FiberSubspace::BOverA(left_multiplication(&conjugate(c)) / (2.0 * alpha2))
        }
    }

    /// Right action of a unit algebra element on the total space.
    pub fn act(&self, p: &Vector, z: &[f64]) -> Vector {
        let d = self.flavor.dim();
        let (a, b) = split(p, d);
        let az = multiply(a.as_slice(), z);
        let bz = multiply(b.as_slice(), z);
        Vector::from_vec(az.into_iter().chain(bz).collect())
    }
}

impl FiberChart for HopfFiberChart {
    fn fiber_point(&self, n: &Vector) -> Result<Vector> {
        let d = self.flavor.dim();
        let (c, s) = self.unit_base(n)?;
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        // one chart covers everything but the south pole
        if 0.5 * (1.0 + s) < SOUTH_CHART_THRESHOLD {
            let beta = (0.5 * (1.0 - s)).sqrt();
            b[0] = beta;
            for (ai, ci) in a.iter_mut().zip(&c) {
                *ai = ci / (2.0 * beta);
            }
        } else {
            let alpha = (0.5 * (1.0 + s)).sqrt();
            a[0] = alpha;
            for (bi, ci) in b.iter_mut().zip(conjugate(&c)) {
                *bi = ci / (2.0 * alpha);
            }
        }
        Ok(Vector::from_vec(a.into_iter().chain(b).collect()))
    }

    /// Nearest point of the fiber: normalized orthogonal projection onto
    /// the fiber subspace.
    fn fiber_project(&self, p: &Vector, n: &Vector) -> Result<Vector> {
        let d = self.flavor.dim();
        let (c, s) = self.unit_base(n)?;
        let (a, b) = split(p, d);
        let eye = Matrix::identity(d, d);
        let point = match self.subspace(&c, s) {
            FiberSubspace::AOverB(k) => {
                let rhs = k.transpose() * &a + &b;
                let bs = spd_solve(&(k.transpose() * &k + &eye), &Matrix::from_column_slice(d, 1, rhs.as_slice()))?;
                let bs = bs.column(0).into_owned();
                concat(&(&k * &bs), &bs)
            }
            FiberSubspace::BOverA(k) => {
                let rhs = &a + k.transpose() * &b;
                let as_ = spd_solve(&(k.transpose() * &k + &eye), &Matrix::from_column_slice(d, 1, rhs.as_slice()))?;
                let as_ = as_.column(0).into_owned();
                concat(&as_, &(&k * &as_))
            }
        };
        let norm = point.norm();
        if !(norm > 1e-12) {
            return Err(GeometryError::InvalidParameter("point is orthogonal to the fiber".into()));
        }
        Ok(point / norm)
    }
}

/// A Hopf fibration with its total space, base and fiber chart.
#[derive(Debug, Clone)]
pub struct HopfFibration {
    pub flavor: HopfFlavor,
    projection: Arc<HopfProjection>,
}

impl HopfFibration {
    pub fn new(flavor: HopfFlavor) -> Self {
        Self { flavor, projection: Arc::new(HopfProjection::new(flavor)) }
    }

    pub fn projection_map(&self) -> MapRef {
        self.projection.clone()
    }

    pub fn total(&self) -> ManifoldRef {
        self.projection.source().clone()
    }

    pub fn base(&self) -> ManifoldRef {
        self.projection.target().clone()
    }

    pub fn chart(&self) -> HopfFiberChart {
        HopfFiberChart { flavor: self.flavor }
    }

    pub fn project(&self, p: &Vector) -> Vector {
        self.projection.apply(p)
    }

    pub fn bundle(&self) -> RiemannianSubmersionBundle {
        let d = self.flavor.dim();
        RiemannianSubmersionBundle::new(
            self.flavor.name().to_string(),
            self.total(),
            self.base(),
            self.projection.clone(),
            d - 1,
            Arc::new(self.chart()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_geometry::random_tangent;
    use crate::linalg::{gaussian_vector, rng_for};

    const FLAVORS: [HopfFlavor; 3] = [HopfFlavor::Complex, HopfFlavor::Quaternionic, HopfFlavor::Octonionic];

    #[test]
    fn complex_projection_values() {
        let h = HopfFibration::new(HopfFlavor::Complex);
        let n = h.project(&Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
        assert!((n - Vector::from_vec(vec![0.0, 0.0, 0.5])).norm() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let n = h.project(&Vector::from_vec(vec![r, 0.0, r, 0.0]));
        assert!((n - Vector::from_vec(vec![0.5, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn projection_lands_on_half_sphere_and_is_fiber_invariant() {
        for flavor in [HopfFlavor::Complex, HopfFlavor::Quaternionic] {
            let h = HopfFibration::new(flavor);
            let chart = h.chart();
            for i in 0..50 {
                let mut rng = rng_for(30, i);
                let p = h.total().random_point(&mut rng);
                let n = h.project(&p);
                assert!((n.norm() - 0.5).abs() < 1e-14);
                let z = gaussian_vector(&mut rng, flavor.dim());
                let z = &z / z.norm();
                let q = chart.act(&p, z.as_slice());
                assert!((h.project(&q) - n).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn octonion_norm_is_multiplicative_on_many_pairs() {
        for i in 0..100_000u64 {
            let mut rng = rng_for(31, i);
            let x = gaussian_vector(&mut rng, 8);
            let y = gaussian_vector(&mut rng, 8);
            let xy = Vector::from_vec(multiply(x.as_slice(), y.as_slice()));
            let scale = x.norm() * y.norm();
            assert!((xy.norm() - scale).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn fiber_point_round_trip() {
        for flavor in FLAVORS {
            let h = HopfFibration::new(flavor);
            let chart = h.chart();
            for i in 0..50 {
                let n = h.base().random_point(&mut rng_for(32, i));
                let p = chart.fiber_point(&n).unwrap();
                assert!((p.norm() - 1.0).abs() < 1e-12);
                assert!((h.project(&p) - &n).norm() < 1e-10);
            }
            let north = Vector::from_vec((0..=flavor.dim()).map(|k| if k == flavor.dim() { 0.5 } else { 0.0 }).collect());
            let p = chart.fiber_point(&north).unwrap();
            assert!((p[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fiber_point_is_continuous_along_base_paths() {
        // path along a meridian that avoids the excluded points; the chart
        // switch happens at the equator
        let h = HopfFibration::new(HopfFlavor::Quaternionic);
        let chart = h.chart();
        let mut prev: Option<Vector> = None;
        let steps = 400;
        for k in 0..=steps {
            let t = 0.2 + 2.7 * k as f64 / steps as f64;
            let n = Vector::from_vec(vec![0.5 * t.sin() * 0.6, 0.5 * t.sin() * 0.8, 0.0, 0.0, 0.5 * t.cos()]);
            let p = chart.fiber_point(&n).unwrap();
            if let Some(q) = prev {
                let jump = (&p - q).norm();
                assert!(jump < 0.05, "jump {jump} at step {k}");
            }
            prev = Some(p);
        }
    }

    #[test]
    fn fiber_project_fixes_fiber_points_and_is_equivariant() {
        for flavor in FLAVORS {
            let h = HopfFibration::new(flavor);
            let chart = h.chart();
            let mut rng = rng_for(33, flavor.dim() as u64);
            let p = h.total().random_point(&mut rng);
            let n = h.project(&p);
            assert!((chart.fiber_project(&p, &n).unwrap() - &p).norm() < 1e-12);
            let q = h.total().retract(&p, &(random_tangent(h.total().as_ref(), &p, &mut rng) * 0.3));
            let proj = chart.fiber_project(&q, &n).unwrap();
            assert!((h.project(&proj) - &n).norm() < 1e-12);
            if flavor != HopfFlavor::Octonionic {
                let z = gaussian_vector(&mut rng, flavor.dim());
                let z = &z / z.norm();
                let lhs = chart.fiber_project(&chart.act(&q, z.as_slice()), &n).unwrap();
                let rhs = chart.act(&proj, z.as_slice());
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fiber_project_matches_grid_search() {
        let h = HopfFibration::new(HopfFlavor::Complex);
        let chart = h.chart();
        let mut rng = rng_for(34, 0);
        let p0 = h.total().random_point(&mut rng);
        let n = h.project(&p0);
        let target = h.total().random_point(&mut rng);
        let closed = chart.fiber_project(&target, &n).unwrap();
        let mut best = (f64::INFINITY, Vector::zeros(4));
        let steps = 200_000;
        for k in 0..steps {
            let th = std::f64::consts::TAU * k as f64 / steps as f64;
            let q = chart.act(&p0, &[th.cos(), th.sin()]);
            let dist = (&q - &target).norm();
            if dist < best.0 {
                best = (dist, q);
            }
        }
        assert!((&closed - &best.1).norm() < 1e-4);
        assert!(((&closed - &target).norm() - best.0).abs() < 1e-6);
    }

    #[test]
    fn off_base_point_is_rejected() {
        let chart = HopfFibration::new(HopfFlavor::Complex).chart();
        assert!(chart.fiber_point(&Vector::from_vec(vec![0.0, 0.0, 1.0])).is_err());
    }
}

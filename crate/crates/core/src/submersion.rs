//! Riemannian submersions with totally geodesic fibers.
//!
//! Vertical space is `ker dπ`, horizontal space its orthogonal complement in
//! `T_p P`. The A-tensor is computed from brackets of basic fields: a base
//! vector `w` is extended by `n ↦ P_N(n) w` on the base and lifted pointwise.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::core_geometry::{check_membership, random_unit_tangent, FiniteDiff, ManifoldRef};
use crate::error::{GeometryError, Result};
use crate::graph_geometry::{differential, MapRef};
use crate::linalg::{
    gaussian_vector, range_basis, rng_for, row_and_null_space, singular_values, spd_solve, Matrix, SampleRng, Vector,
};

pub const FAT_TOLERANCE: f64 = 1e-3;
pub const RANK_REL_TOL: f64 = 1e-6;

/// Closed-form access to the fibers of a bundle.
pub trait FiberChart: Send + Sync + fmt::Debug {
    /// Some point `p` with `π(p) = n`.
    fn fiber_point(&self, n: &Vector) -> Result<Vector>;
    /// A point of `π⁻¹(n)` close to `p`, depending smoothly on `(p, n)`.
    fn fiber_project(&self, p: &Vector, n: &Vector) -> Result<Vector>;
}

#[derive(Debug, Clone)]
pub struct RiemannianSubmersionBundle {
    pub name: String,
    pub total: ManifoldRef,
    pub base: ManifoldRef,
    pub projection: MapRef,
    pub fiber_dim: usize,
    pub fibers: Arc<dyn FiberChart>,
}

/// The A-tensor on an orthonormal horizontal basis at one point.
#[derive(Debug, Clone)]
pub struct AComponents {
    pub point: Vector,
    pub horizontal_basis: Matrix,
    pub vertical_basis: Matrix,
    /// `values[i][j] = A(h_i, h_j)` in ambient coordinates.
    pub values: Vec<Vec<Vector>>,
}

impl AComponents {
    pub fn a(&self, x: &Vector, y: &Vector) -> Vector {
        let cx = self.horizontal_basis.transpose() * x;
        let cy = self.horizontal_basis.transpose() * y;
        let mut out = Vector::zeros(self.point.len());
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out += v * (cx[i] * cy[j]);
            }
        }
        out
    }

    /// Matrix of `A_X : H → V` in the vertical/horizontal bases.
    pub fn a_x_matrix(&self, x: &Vector) -> Matrix {
        let cx = self.horizontal_basis.transpose() * x;
        let h = self.horizontal_basis.ncols();
        let mut m = Matrix::zeros(self.vertical_basis.ncols(), h);
        for j in 0..h {
            let mut col = Vector::zeros(self.point.len());
            for i in 0..h {
                col += &self.values[i][j] * cx[i];
            }
            m.set_column(j, &(self.vertical_basis.transpose() * col));
        }
        m
    }

    /// `A†_X U` defined by `<A†_X U, Y> = <U, A(X, Y)>`.
    pub fn a_dagger(&self, x: &Vector, u: &Vector) -> Vector {
        let mut out = Vector::zeros(self.point.len());
        for h in self.horizontal_basis.column_iter() {
            let h = h.into_owned();
            out += &h * u.dot(&self.a(x, &h));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FatnessReport {
    pub min_sigma: f64,
    pub worst_point: Vec<f64>,
    pub worst_direction: Vec<f64>,
    pub fat: bool,
    pub points: usize,
    pub directions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberGeodesyReport {
    pub max_norm: f64,
    pub worst_point: Vec<f64>,
    pub points: usize,
}

impl RiemannianSubmersionBundle {
    pub fn new(
        name: String,
        total: ManifoldRef,
        base: ManifoldRef,
        projection: MapRef,
        fiber_dim: usize,
        fibers: Arc<dyn FiberChart>,
    ) -> Self {
        Self { name, total, base, projection, fiber_dim, fibers }
    }

    pub fn project(&self, p: &Vector) -> Vector {
        self.projection.apply(p)
    }

    pub fn dpi(&self, p: &Vector, fd: &FiniteDiff) -> Matrix {
        differential(self.projection.as_ref(), p, fd)
    }

    /// `𝓛_p` as an ambient matrix: the minimum-norm right inverse of `dπ_p`
    /// on `T_{π(p)}N`. Assumes `dπ_p` is surjective.
    pub fn lift_operator(&self, p: &Vector, fd: &FiniteDiff) -> Matrix {
        let dpi = self.dpi(p, fd);
        let pn = self.base.projector(&self.project(p));
        let n = pn.nrows();
        let gram = &dpi * dpi.transpose() + (Matrix::identity(n, n) - &pn);
        let inv = spd_solve(&gram, &pn).expect("dπ is surjective at sampled points");
        dpi.transpose() * inv
    }

    /// Horizontal projector `dπᵀ (dπ dπᵀ)⁺ dπ`.
    pub fn horizontal_projector_unchecked(&self, p: &Vector, fd: &FiniteDiff) -> Matrix {
        self.lift_operator(p, fd) * self.dpi(p, fd)
    }

    /// Rank of `dπ_p` on `T_p P`.
    pub fn projection_rank(&self, p: &Vector, fd: &FiniteDiff) -> usize {
        let sv = singular_values(&self.dpi(p, fd));
        let smax = sv.first().copied().unwrap_or(0.0);
        sv.iter().filter(|&&s| s > RANK_REL_TOL * smax.max(f64::MIN_POSITIVE)).count()
    }

    fn check_rank(&self, p: &Vector, fd: &FiniteDiff) -> Result<()> {
        let found = self.projection_rank(p, fd);
        let expected = self.base.intrinsic_dim();
        if found != expected {
            return Err(GeometryError::RankDeficient { expected, found });
        }
        Ok(())
    }

    pub fn vertical_projector(&self, p: &Vector, fd: &FiniteDiff) -> Result<Matrix> {
        check_membership(self.total.as_ref(), p)?;
        self.check_rank(p, fd)?;
        Ok(self.total.projector(p) - self.horizontal_projector_unchecked(p, fd))
    }

    pub fn horizontal_projector(&self, p: &Vector, fd: &FiniteDiff) -> Result<Matrix> {
        check_membership(self.total.as_ref(), p)?;
        self.check_rank(p, fd)?;
        Ok(self.horizontal_projector_unchecked(p, fd))
    }

    fn vertical_unchecked(&self, p: &Vector, fd: &FiniteDiff) -> Matrix {
        self.total.projector(p) - self.horizontal_projector_unchecked(p, fd)
    }

    /// Orthonormal bases of `H_p` and `V_p`.
    pub fn split_bases(&self, p: &Vector, fd: &FiniteDiff) -> Result<(Matrix, Matrix)> {
        let h = self.horizontal_projector(p, fd)?;
        let v = self.total.projector(p) - &h;
        Ok((range_basis(&h, self.base.intrinsic_dim()), range_basis(&v, self.fiber_dim)))
    }

    /// `𝓛_p w`: the horizontal vector with `dπ(𝓛_p w) = w`.
    pub fn horizontal_lift(&self, p: &Vector, w: &Vector, fd: &FiniteDiff) -> Result<Vector> {
        check_membership(self.total.as_ref(), p)?;
        self.check_rank(p, fd)?;
        Ok(self.lift_operator(p, fd) * w)
    }

    /// Basic field through the base vector `w`, evaluated at `q`.
    fn basic_field(&self, q: &Vector, w: &Vector, fd: &FiniteDiff) -> Vector {
        let pn = self.base.projector(&self.project(q));
        self.lift_operator(q, fd) * (pn * w)
    }

    /// `A(X, Y) = ½ pr_V [X̄, Ȳ]` for the basic extensions of the horizontal
    /// parts of `X` and `Y`.
    pub fn a_tensor(&self, p: &Vector, x: &Vector, y: &Vector, fd: &FiniteDiff) -> Result<Vector> {
        check_membership(self.total.as_ref(), p)?;
        self.check_rank(p, fd)?;
        Ok(self.a_unchecked(p, x, y, fd))
    }

    fn a_unchecked(&self, p: &Vector, x: &Vector, y: &Vector, fd: &FiniteDiff) -> Vector {
        let h = self.horizontal_projector_unchecked(p, fd);
        let dpi = self.dpi(p, fd);
        let xh = &h * x;
        let yh = &h * y;
        let wx = &dpi * x;
        let wy = &dpi * y;
        let total = self.total.as_ref();
        let dy = fd.along_vector(total, p, &xh, |q| self.basic_field(q, &wy, fd));
        let dx = fd.along_vector(total, p, &yh, |q| self.basic_field(q, &wx, fd));
        self.vertical_unchecked(p, fd) * (dy - dx) * 0.5
    }

    pub fn a_components(&self, p: &Vector, fd: &FiniteDiff) -> Result<AComponents> {
        let (hb, vb) = self.split_bases(p, fd)?;
        let k = hb.ncols();
        let zero = Vector::zeros(p.len());
        let mut values = vec![vec![zero; k]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                let v = self.a_unchecked(p, &hb.column(i).into_owned(), &hb.column(j).into_owned(), fd);
                values[j][i] = -&v;
                values[i][j] = v;
            }
        }
        Ok(AComponents { point: p.clone(), horizontal_basis: hb, vertical_basis: vb, values })
    }

    /// `A†_X U` with `X ↦ pr_H X`, `U ↦ pr_V U` applied first.
    pub fn a_dagger(&self, p: &Vector, x: &Vector, u: &Vector, fd: &FiniteDiff) -> Result<Vector> {
        let (hb, _) = self.split_bases(p, fd)?;
        let v = self.vertical_unchecked(p, fd);
        let u = v * u;
        let mut out = Vector::zeros(p.len());
        for h in hb.column_iter() {
            let h = h.into_owned();
            out += &h * u.dot(&self.a_unchecked(p, x, &h, fd));
        }
        Ok(out)
    }

    /// `sec_P(X, U) = |A†_X U|²` for orthogonal horizontal `X`, vertical `U`
    /// (normalized by `|X|² |U|²`).
    pub fn vertizontal_sec(&self, p: &Vector, x: &Vector, u: &Vector, fd: &FiniteDiff) -> Result<f64> {
        let d = self.a_dagger(p, x, u, fd)?;
        let scale = x.norm_squared() * u.norm_squared();
        if !(scale > 0.0) {
            return Err(GeometryError::DegeneratePlane { gram: scale });
        }
        Ok(d.norm_squared() / scale)
    }

    /// A point on the total space for sample `rng`.
    pub fn sample_point(&self, rng: &mut SampleRng) -> Vector {
        self.total.random_point(rng)
    }

    /// Smallest `σ_{dim V}(A_X)` over sampled points and unit horizontal `X`.
    pub fn fatness(&self, points: usize, directions: usize, seed: u64, fd: &FiniteDiff) -> Result<FatnessReport> {
        let per_point: Vec<Result<(f64, Vector, Vector)>> = (0..points)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(seed, i as u64);
                let p = self.sample_point(&mut rng);
                let comps = self.a_components(&p, fd)?;
                let hdim = comps.horizontal_basis.ncols();
                let mut best = (f64::INFINITY, Vector::zeros(p.len()));
                for _ in 0..directions {
                    let c = gaussian_vector(&mut rng, hdim);
                    let x = &comps.horizontal_basis * (&c / c.norm());
                    let sv = singular_values(&comps.a_x_matrix(&x));
                    let sigma = if self.fiber_dim == 0 {
                        f64::INFINITY
                    } else {
                        sv.get(self.fiber_dim - 1).copied().unwrap_or(0.0)
                    };
                    if sigma < best.0 {
                        best = (sigma, x);
                    }
                }
                Ok((best.0, p, best.1))
            })
            .collect();
        let mut worst = (f64::INFINITY, Vector::zeros(0), Vector::zeros(0));
        for r in per_point {
            let (s, p, x) = r?;
            if s < worst.0 {
                worst = (s, p, x);
            }
        }
        Ok(FatnessReport {
            min_sigma: worst.0,
            worst_point: worst.1.as_slice().to_vec(),
            worst_direction: worst.2.as_slice().to_vec(),
            fat: worst.0 > FAT_TOLERANCE,
            points,
            directions,
        })
    }

    /// Second fundamental form of the fiber through `p` inside `P`:
    /// `pr_H ∇_U V̄` for the extension `V̄(q) = pr_V(q) v`.
    pub fn fiber_second_fundamental_form(&self, p: &Vector, u: &Vector, v: &Vector, fd: &FiniteDiff) -> Result<Vector> {
        check_membership(self.total.as_ref(), p)?;
        self.check_rank(p, fd)?;
        let d = fd.along_vector(self.total.as_ref(), p, u, |q| self.vertical_unchecked(q, fd) * v);
        Ok(self.horizontal_projector_unchecked(p, fd) * d)
    }

    pub fn totally_geodesic_fibers_check(&self, points: usize, seed: u64, fd: &FiniteDiff) -> Result<FiberGeodesyReport> {
        let results: Vec<Result<(f64, Vector)>> = (0..points)
            .into_par_iter()
            .map(|i| {
                let p = self.sample_point(&mut rng_for(seed, i as u64));
                let (_, vb) = self.split_bases(&p, fd)?;
                let mut worst: f64 = 0.0;
                for a in vb.column_iter() {
                    for b in vb.column_iter() {
                        let ii = self.fiber_second_fundamental_form(&p, &a.into_owned(), &b.into_owned(), fd)?;
                        worst = worst.max(ii.norm());
                    }
                }
                Ok((worst, p))
            })
            .collect();
        let mut report = FiberGeodesyReport { max_norm: 0.0, worst_point: Vec::new(), points };
        for r in results {
            let (n, p) = r?;
            if n >= report.max_norm {
                report.max_norm = n;
                report.worst_point = p.as_slice().to_vec();
            }
        }
        Ok(report)
    }

    /// `max | |dπ h| - |h| |` over an orthonormal horizontal basis.
    pub fn submersion_residual(&self, p: &Vector, fd: &FiniteDiff) -> Result<f64> {
        let (hb, _) = self.split_bases(p, fd)?;
        let dpi = self.dpi(p, fd);
        Ok(hb
            .column_iter()
            .map(|h| ((&dpi * h).norm() - 1.0).abs())
            .fold(0.0, f64::max))
    }

    /// Vertical basis via the SVD null space of `dπ` restricted to `T_p P`.
    pub fn vertical_basis_svd(&self, p: &Vector, fd: &FiniteDiff) -> Result<Matrix> {
        check_membership(self.total.as_ref(), p)?;
        let tb = range_basis(&self.total.projector(p), self.total.intrinsic_dim());
        let restricted = self.dpi(p, fd) * &tb;
        let (_, null) = row_and_null_space(&restricted, RANK_REL_TOL);
        if null.ncols() != self.fiber_dim {
            return Err(GeometryError::RankDeficient {
                expected: self.total.intrinsic_dim() - self.fiber_dim,
                found: self.total.intrinsic_dim() - null.ncols(),
            });
        }
        Ok(tb * null)
    }

    pub fn random_horizontal_unit(&self, p: &Vector, rng: &mut SampleRng, fd: &FiniteDiff) -> Vector {
        let h = self.horizontal_projector_unchecked(p, fd) * random_unit_tangent(self.total.as_ref(), p, rng);
        let n = h.norm();
        h / n
    }

    pub fn random_vertical_unit(&self, p: &Vector, rng: &mut SampleRng, fd: &FiniteDiff) -> Vector {
        let v = self.vertical_unchecked(p, fd) * random_unit_tangent(self.total.as_ref(), p, rng);
        let n = v.norm();
        v / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_geometry::sectional_curvature;
    use crate::geometries::{trivial_bundle, warped_tube_bundle, HopfFibration, HopfFlavor, Sphere};

    fn hopf(flavor: HopfFlavor) -> RiemannianSubmersionBundle {
        HopfFibration::new(flavor).bundle()
    }

    fn trivial() -> RiemannianSubmersionBundle {
        trivial_bundle(Arc::new(Sphere::new(2, 0.5)), Arc::new(Sphere::unit(1)))
    }

    #[test]
    fn trivial_vertical_space_is_fiber_factor() {
        let b = trivial();
        let fd = FiniteDiff::default();
        let p = Vector::from_vec(vec![0.0, 0.0, 0.5, 1.0, 0.0]);
        let v = b.vertical_projector(&p, &fd).unwrap();
        let mut expect = Matrix::zeros(5, 5);
        expect[(4, 4)] = 1.0;
        assert!((v - expect).norm() < 1e-14);
        let w = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let lift = b.horizontal_lift(&p, &w, &fd).unwrap();
        assert!((lift - Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn complex_hopf_vertical_is_circle_generator() {
        let b = hopf(HopfFlavor::Complex);
        let fd = FiniteDiff::default();
        let p = b.sample_point(&mut rng_for(40, 0));
        let ip = Vector::from_vec(vec![-p[1], p[0], -p[3], p[2]]);
        let v = b.vertical_projector(&p, &fd).unwrap();
        assert!((&v * &ip - &ip).norm() < 1e-12);
        assert!((v.trace() - 1.0).abs() < 1e-12);
        let h = b.horizontal_projector(&p, &fd).unwrap();
        assert!((h.trace() + v.trace() - 3.0).abs() < 1e-12);
        let svd_basis = b.vertical_basis_svd(&p, &fd).unwrap();
        assert!((&v * &svd_basis - &svd_basis).norm() < 1e-10);
    }

    #[test]
    fn horizontal_lift_round_trip_and_isometry() {
        let fd = FiniteDiff::default();
        for flavor in [HopfFlavor::Complex, HopfFlavor::Quaternionic, HopfFlavor::Octonionic] {
            let b = hopf(flavor);
            let mut rng = rng_for(41, flavor.dim() as u64);
            let p = b.sample_point(&mut rng);
            let n = b.project(&p);
            let basis = range_basis(&b.base.projector(&n), b.base.intrinsic_dim());
            for w in basis.column_iter() {
                let w = w.into_owned();
                let lift = b.horizontal_lift(&p, &w, &fd).unwrap();
                assert!((b.dpi(&p, &fd) * &lift - &w).norm() < 1e-8);
                assert!((lift.norm() - w.norm()).abs() < 1e-6, "{flavor:?}");
            }
            assert!(b.submersion_residual(&p, &fd).unwrap() < 1e-6);
        }
    }

    #[test]
    fn a_tensor_trivial_and_antisymmetric() {
        let fd = FiniteDiff::default();
        let t = trivial();
        let mut rng = rng_for(42, 0);
        let p = t.sample_point(&mut rng);
        let x = t.random_horizontal_unit(&p, &mut rng, &fd);
        let y = t.random_horizontal_unit(&p, &mut rng, &fd);
        assert!(t.a_tensor(&p, &x, &y, &fd).unwrap().norm() < 1e-10);

        let h = hopf(HopfFlavor::Quaternionic);
        let p = h.sample_point(&mut rng);
        let x = h.random_horizontal_unit(&p, &mut rng, &fd);
        let y = h.random_horizontal_unit(&p, &mut rng, &fd);
        let axy = h.a_tensor(&p, &x, &y, &fd).unwrap();
        let ayx = h.a_tensor(&p, &y, &x, &fd).unwrap();
        assert!((&axy + ayx).norm() < 1e-4);
        // vertical-valued
        assert!((h.dpi(&p, &fd) * &axy).norm() < 1e-8);
        // vertical input contributes nothing
        let u = h.random_vertical_unit(&p, &mut rng, &fd);
        assert!((h.a_tensor(&p, &(&x + &u), &y, &fd).unwrap() - &axy).norm() < 1e-8);
    }

    #[test]
    fn complex_hopf_a_tensor_has_unit_norm() {
        let fd = FiniteDiff::default();
        let h = hopf(HopfFlavor::Complex);
        let p = h.sample_point(&mut rng_for(43, 0));
        let (hb, _) = h.split_bases(&p, &fd).unwrap();
        let a = h.a_tensor(&p, &hb.column(0).into_owned(), &hb.column(1).into_owned(), &fd).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn a_dagger_duality_and_norm() {
        let fd = FiniteDiff::default();
        let h = hopf(HopfFlavor::Complex);
        for i in 0..5 {
            let mut rng = rng_for(44, i);
            let p = h.sample_point(&mut rng);
            let x = h.random_horizontal_unit(&p, &mut rng, &fd);
            let u = h.random_vertical_unit(&p, &mut rng, &fd) * 1.7;
            let d = h.a_dagger(&p, &x, &u, &fd).unwrap();
            let (hb, _) = h.split_bases(&p, &fd).unwrap();
            for y in hb.column_iter() {
                let y = y.into_owned();
                let lhs = d.dot(&y);
                let rhs = u.dot(&h.a_tensor(&p, &x, &y, &fd).unwrap());
                assert!((lhs - rhs).abs() < 1e-6);
            }
            assert!((d.norm() - 1.7).abs() < 1e-6);
        }
        let t = trivial();
        let mut rng = rng_for(44, 99);
        let p = t.sample_point(&mut rng);
        let x = t.random_horizontal_unit(&p, &mut rng, &fd);
        let u = t.random_vertical_unit(&p, &mut rng, &fd);
        assert!(t.a_dagger(&p, &x, &u, &fd).unwrap().norm() < 1e-10);
    }

    #[test]
    fn vertizontal_curvature_matches_intrinsic() {
        let fd = FiniteDiff::default();
        for flavor in [HopfFlavor::Complex, HopfFlavor::Quaternionic] {
            let h = hopf(flavor);
            let mut rng = rng_for(45, flavor.dim() as u64);
            let p = h.sample_point(&mut rng);
            let x = h.random_horizontal_unit(&p, &mut rng, &fd);
            let u = h.random_vertical_unit(&p, &mut rng, &fd);
            let sec = h.vertizontal_sec(&p, &x, &u, &fd).unwrap();
            let direct = sectional_curvature(h.total.as_ref(), &p, &x, &u, &fd).unwrap();
            assert!((sec - 1.0).abs() < 1e-4);
            assert!((direct - sec).abs() < 1e-4);
        }
        let t = trivial();
        let mut rng = rng_for(45, 0);
        let p = t.sample_point(&mut rng);
        let x = t.random_horizontal_unit(&p, &mut rng, &fd);
        let u = t.random_vertical_unit(&p, &mut rng, &fd);
        assert!(t.vertizontal_sec(&p, &x, &u, &fd).unwrap().abs() < 1e-10);
    }

    #[test]
    fn fatness_reports() {
        let fd = FiniteDiff::default();
        let c = hopf(HopfFlavor::Complex).fatness(20, 10, 1, &fd).unwrap();
        assert!(c.fat && (c.min_sigma - 1.0).abs() < 1e-3);
        let q = hopf(HopfFlavor::Quaternionic).fatness(10, 10, 1, &fd).unwrap();
        assert!(q.fat, "{q:?}");
        let t = trivial().fatness(10, 10, 1, &fd).unwrap();
        assert!(!t.fat && t.min_sigma < 1e-10);
    }

    #[test]
    fn fiber_geodesy() {
        let fd = FiniteDiff::default();
        assert!(hopf(HopfFlavor::Complex).totally_geodesic_fibers_check(20, 2, &fd).unwrap().max_norm <= 1e-6);
        assert!(trivial().totally_geodesic_fibers_check(20, 2, &fd).unwrap().max_norm <= 1e-10);
        let broken = warped_tube_bundle(0.5).totally_geodesic_fibers_check(20, 2, &fd).unwrap();
        assert!(broken.max_norm > 0.1, "{broken:?}");
    }
}

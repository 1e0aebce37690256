//! Maps between embedded manifolds and the operators attached to their
//! graphs `Γ_f = {(x, f(x))} ⊂ M × N`.

use std::fmt;
use std::sync::Arc;

use crate::core_geometry::{check_membership, FiniteDiff, Manifold, ManifoldRef, MEMBERSHIP_TOL};
use crate::error::{GeometryError, Result};
use crate::linalg::{block_diag, concat, range_basis, spd_condition, spd_solve, split, Matrix, SampleRng, Vector};

pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// A smooth map `f: M → N` given through ambient coordinates.
pub trait SmoothMap: Send + Sync + fmt::Debug {
    fn source(&self) -> &ManifoldRef;
    fn target(&self) -> &ManifoldRef;
    fn apply(&self, x: &Vector) -> Vector;

    /// Closed-form ambient Jacobian `R^{dim source ambient} → R^{dim target ambient}`.
    /// Only its action on `T_x M` matters.
    fn jacobian(&self, _x: &Vector) -> Option<Matrix> {
        None
    }

    fn label(&self) -> String;
}

pub type MapRef = Arc<dyn SmoothMap>;

/// Ambient Jacobian, analytic if available, else finite differences of
/// `f` along retraction curves in the directions of a tangent basis.
pub fn ambient_jacobian(f: &dyn SmoothMap, x: &Vector, fd: &FiniteDiff) -> Matrix {
    if let Some(j) = f.jacobian(x) {
        return j;
    }
    let m = f.source().as_ref();
    let basis = range_basis(&m.projector(x), m.intrinsic_dim());
    let mut j = Matrix::zeros(f.target().ambient_dim(), m.ambient_dim());
    for b in basis.column_iter() {
        let b = b.into_owned();
        let col = fd.along_vector(m, x, &b, |y| f.apply(y));
        j += col * b.transpose();
    }
    j
}

/// `df_x = P_N(f(x)) · J(x) · P_M(x)` in ambient coordinates.
pub fn differential(f: &dyn SmoothMap, x: &Vector, fd: &FiniteDiff) -> Matrix {
    let pm = f.source().projector(x);
    let pn = f.target().projector(&f.apply(x));
    pn * ambient_jacobian(f, x, fd) * pm
}

/// Checks that `f(x)` lies on the target within the membership tolerance.
pub fn check_image(f: &dyn SmoothMap, x: &Vector) -> Result<()> {
    check_membership(f.source().as_ref(), x)?;
    let y = f.apply(x);
    check_membership(f.target().as_ref(), &y)
}

/// Metric dual of a linear map written in (not necessarily orthonormal)
/// bases with Gram matrices `gram_src`, `gram_dst`:
/// `g_src(A† w, v) = g_dst(w, A v)`, i.e. `A† = G_src⁻¹ Aᵀ G_dst`.
pub fn metric_dual(a: &Matrix, gram_src: &Matrix, gram_dst: &Matrix) -> Result<Matrix> {
    for g in [gram_src, gram_dst] {
        if g.nrows() > 0 {
            let condition = spd_condition(g);
            if !(condition <= GRAM_CONDITION_LIMIT) {
                return Err(GeometryError::IllConditioned { condition });
            }
        }
    }
    if gram_src.nrows() == 0 {
        return Ok(Matrix::zeros(0, a.nrows()));
    }
    spd_solve(gram_src, &(a.transpose() * gram_dst))
}

/// Graph operators materialized on orthonormal tangent bases at one point.
#[derive(Debug, Clone)]
pub struct GraphOperators {
    pub point: Vector,
    pub image: Vector,
    /// Orthonormal basis of `T_x M` (columns).
    pub basis_m: Matrix,
    /// Orthonormal basis of `T_{f(x)} N` (columns).
    pub basis_n: Matrix,
    /// `df` in basis coordinates (`dim N × dim M`).
    pub df: Matrix,
    /// `df†` in basis coordinates.
    pub df_dagger: Matrix,
    /// `O = (1 + df df†)⁻¹` in basis coordinates.
    pub o: Matrix,
}

impl GraphOperators {
    pub fn at(f: &dyn SmoothMap, x: &Vector, fd: &FiniteDiff) -> Result<Self> {
        check_image(f, x)?;
        let image = f.apply(x);
        let m = f.source();
        let n = f.target();
        let basis_m = range_basis(&m.projector(x), m.intrinsic_dim());
        let basis_n = range_basis(&n.projector(&image), n.intrinsic_dim());
        let df = basis_n.transpose() * differential(f, x, fd) * &basis_m;
        let gram_m = basis_m.transpose() * &basis_m;
        let gram_n = basis_n.transpose() * &basis_n;
        let df_dagger = metric_dual(&df, &gram_m, &gram_n)?;
        let dim_n = basis_n.ncols();
        let o = spd_solve(&(Matrix::identity(dim_n, dim_n) + &df * &df_dagger), &Matrix::identity(dim_n, dim_n))?;
        Ok(Self { point: x.clone(), image, basis_m, basis_n, df, df_dagger, o })
    }

    fn coords_m(&self, v: &Vector) -> Vector {
        self.basis_m.transpose() * v
    }
    fn coords_n(&self, v: &Vector) -> Vector {
        self.basis_n.transpose() * v
    }
    fn ambient_m(&self, c: &Vector) -> Vector {
        &self.basis_m * c
    }
    fn ambient_n(&self, c: &Vector) -> Vector {
        &self.basis_n * c
    }

    pub fn df_ambient(&self) -> Matrix {
        &self.basis_n * &self.df * self.basis_m.transpose()
    }

    pub fn df_dagger_ambient(&self) -> Matrix {
        &self.basis_m * &self.df_dagger * self.basis_n.transpose()
    }

    pub fn o_ambient(&self) -> Matrix {
        &self.basis_n * &self.o * self.basis_n.transpose()
    }

    pub fn apply_df(&self, v: &Vector) -> Vector {
        self.ambient_n(&(&self.df * self.coords_m(v)))
    }

    pub fn apply_df_dagger(&self, w: &Vector) -> Vector {
        self.ambient_m(&(&self.df_dagger * self.coords_n(w)))
    }

    pub fn apply_o(&self, w: &Vector) -> Vector {
        self.ambient_n(&(&self.o * self.coords_n(w)))
    }

    /// `Π(X, Y) = Y - df X`.
    pub fn pi(&self, x: &Vector, y: &Vector) -> Vector {
        y - self.apply_df(x)
    }

    /// `Ξ_N(Y) = (-df† Y, Y)`.
    pub fn xi_normal(&self, y: &Vector) -> (Vector, Vector) {
        (-self.apply_df_dagger(y), y.clone())
    }

    /// `Ξ(X, Y) = dF(X) + Ξ_N(Y) = (X - df† Y, df X + Y)`.
    pub fn xi(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        (x - self.apply_df_dagger(y), self.apply_df(x) + y)
    }

    /// Block inverse of `Ξ`:
    /// `X' = (1+df†df)⁻¹ X + df†(1+df df†)⁻¹ Y`,
    /// `Y' = -df(1+df†df)⁻¹ X + (1+df df†)⁻¹ Y`.
    pub fn xi_inverse(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        let cx = self.coords_m(x);
        let cy = self.coords_n(y);
        let dim_m = cx.len();
        let inner_m = Matrix::identity(dim_m, dim_m) + &self.df_dagger * &self.df;
        let sx = spd_solve(&inner_m, &Matrix::from_column_slice(dim_m, 1, cx.as_slice()))?.column(0).into_owned();
        let oy = &self.o * &cy;
        let out_x = &sx + &self.df_dagger * &oy;
        let out_y = -(&self.df * &sx) + oy;
        Ok((self.ambient_m(&out_x), self.ambient_n(&out_y)))
    }

    /// Orthogonal projection onto the normal space of the graph:
    /// `(X, Y) ↦ Ξ_N(O (Y - df X))`.
    pub fn normal_projection(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        let w = self.apply_o(&self.pi(x, y));
        self.xi_normal(&w)
    }
}

pub fn df_dagger(f: &dyn SmoothMap, x: &Vector, fd: &FiniteDiff) -> Result<Matrix> {
    Ok(GraphOperators::at(f, x, fd)?.df_dagger_ambient())
}

pub fn xi_inverse(f: &dyn SmoothMap, x: &Vector, v: &Vector, w: &Vector, fd: &FiniteDiff) -> Result<(Vector, Vector)> {
    GraphOperators::at(f, x, fd)?.xi_inverse(v, w)
}

pub fn normal_projection_graph(f: &dyn SmoothMap, x: &Vector, v: &Vector, w: &Vector, fd: &FiniteDiff) -> Result<(Vector, Vector)> {
    Ok(GraphOperators::at(f, x, fd)?.normal_projection(v, w))
}

/// `d²f(X, X') = ∇^N_{df X} df X' - df(∇^M_X X')`, with `X'` extended by
/// `y ↦ P_M(y) X'`. For that extension `∇^M_X X'` vanishes at `x`, so only
/// the tangent part of the derivative of `df_y P_M(y) X'` remains.
pub fn d2f(f: &dyn SmoothMap, x: &Vector, a: &Vector, b: &Vector, fd: &FiniteDiff) -> Result<Vector> {
    check_image(f, x)?;
    let m = f.source().as_ref();
    let deriv = fd.along_vector(m, x, a, |y| differential(f, y, fd) * (m.projector(y) * b));
    let pn = f.target().projector(&f.apply(x));
    Ok(pn * deriv)
}

/// `II_f(X, X') = Ξ_N(O d²f(X, X'))`, normal to the graph.
pub fn graph_second_fundamental_form(f: &dyn SmoothMap, x: &Vector, a: &Vector, b: &Vector, fd: &FiniteDiff) -> Result<(Vector, Vector)> {
    let ops = GraphOperators::at(f, x, fd)?;
    let second = d2f(f, x, a, b, fd)?;
    Ok(ops.xi_normal(&ops.apply_o(&second)))
}

/// The graph `Γ_f` as an embedded manifold of `R^{d_M + d_N}`.
#[derive(Debug, Clone)]
pub struct GraphOfMap {
    pub map: MapRef,
    pub fd: FiniteDiff,
}

impl GraphOfMap {
    pub fn new(map: MapRef, fd: FiniteDiff) -> Self {
        Self { map, fd }
    }

    pub fn lift(&self, x: &Vector) -> Vector {
        concat(x, &self.map.apply(x))
    }

    fn split(&self, v: &Vector) -> (Vector, Vector) {
        split(v, self.map.source().ambient_dim())
    }

    /// Tangent vector `dF(X) = (X, df X)`.
    pub fn d_graph(&self, x: &Vector, v: &Vector) -> Vector {
        concat(v, &(differential(self.map.as_ref(), x, &self.fd) * v))
    }
}

impl Manifold for GraphOfMap {
    fn ambient_dim(&self) -> usize {
        self.map.source().ambient_dim() + self.map.target().ambient_dim()
    }

    fn intrinsic_dim(&self) -> usize {
        self.map.source().intrinsic_dim()
    }

    fn projector(&self, z: &Vector) -> Matrix {
        let (x, _) = self.split(z);
        let m = self.map.source();
        let pm = m.projector(&x);
        let df = differential(self.map.as_ref(), &x, &self.fd);
        let dm = pm.nrows();
        let mut stacked = Matrix::zeros(self.ambient_dim(), dm);
        stacked.view_mut((0, 0), (dm, dm)).copy_from(&pm);
        stacked.view_mut((dm, 0), (df.nrows(), dm)).copy_from(&df);
        let gram = stacked.transpose() * &stacked + (Matrix::identity(dm, dm) - &pm);
        let inv = spd_solve(&gram, &stacked.transpose()).expect("graph Gram matrix is positive definite");
        &stacked * inv
    }

    fn retract(&self, z: &Vector, v: &Vector) -> Vector {
        let (x, _) = self.split(z);
        let (vx, _) = self.split(v);
        let moved = self.map.source().retract(&x, &vx);
        self.lift(&moved)
    }

    fn random_point(&self, rng: &mut SampleRng) -> Vector {
        self.lift(&self.map.source().random_point(rng))
    }

    fn label(&self) -> String {
        format!("graph({})", self.map.label())
    }
}

/// Projector of the product ambient tangent space `T_x M × T_y N`.
pub fn product_projector(m: &dyn Manifold, x: &Vector, n: &dyn Manifold, y: &Vector) -> Matrix {
    block_diag(&m.projector(x), &n.projector(y))
}

/// Image membership tolerance exposed for invariant suites.
pub const IMAGE_TOL: f64 = MEMBERSHIP_TOL;

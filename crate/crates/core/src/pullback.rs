//! The pull-back bundle `f*P = {(x, p) : f(x) = π(p)} ⊂ M × P` as an
//! embedded submanifold of `R^{d_M + d_P}`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::core_geometry::{check_membership, FiniteDiff, Manifold, ManifoldRef, ShapeData};
use crate::error::{GeometryError, Result};
use crate::graph_geometry::{differential, GraphOperators, MapRef};
use crate::linalg::{
    block_diag, concat, range_basis, rng_for, row_and_null_space, spd_solve, split, Matrix, SampleRng, Vector,
};
use crate::submersion::{AComponents, RiemannianSubmersionBundle, RANK_REL_TOL};

#[derive(Debug, Clone)]
pub struct PullbackBundle {
    pub map: MapRef,
    pub bundle: RiemannianSubmersionBundle,
    /// Used for Jacobians of maps without closed forms.
    pub fd: FiniteDiff,
}

impl PullbackBundle {
    pub fn new(map: MapRef, bundle: RiemannianSubmersionBundle) -> Result<Self> {
        let target = map.target();
        if target.ambient_dim() != bundle.base.ambient_dim() || target.intrinsic_dim() != bundle.base.intrinsic_dim() {
            return Err(GeometryError::DimensionMismatch(format!(
                "map target {} does not match bundle base {}",
                target.label(),
                bundle.base.label()
            )));
        }
        Ok(Self { map, bundle, fd: FiniteDiff::default() })
    }

    pub fn with_fd(mut self, fd: FiniteDiff) -> Self {
        self.fd = fd;
        self
    }

    pub fn base(&self) -> &ManifoldRef {
        self.map.source()
    }

    pub fn total(&self) -> &ManifoldRef {
        &self.bundle.total
    }

    pub fn dim_m(&self) -> usize {
        self.base().ambient_dim()
    }

    pub fn split(&self, z: &Vector) -> (Vector, Vector) {
        split(z, self.dim_m())
    }

    pub fn join(&self, x: &Vector, p: &Vector) -> Vector {
        concat(x, p)
    }

    /// `|f(x) - π(p)|`.
    pub fn constraint_residual(&self, z: &Vector) -> f64 {
        let (x, p) = self.split(z);
        (self.map.apply(&x) - self.bundle.project(&p)).norm()
    }

    /// Constraint operator `(X, E) ↦ df X - dπ E` in ambient coordinates.
    fn constraint(&self, x: &Vector, p: &Vector) -> Matrix {
        let df = differential(self.map.as_ref(), x, &self.fd);
        let dpi = self.bundle.dpi(p, &self.fd);
        let mut c = Matrix::zeros(df.nrows(), df.ncols() + dpi.ncols());
        c.view_mut((0, 0), df.shape()).copy_from(&df);
        c.view_mut((0, df.ncols()), dpi.shape()).copy_from(&(-dpi));
        c
    }

    /// Tangent projector of `M × P`.
    pub fn product_projector(&self, z: &Vector) -> Matrix {
        let (x, p) = self.split(z);
        block_diag(&self.base().projector(&x), &self.total().projector(&p))
    }

    /// Orthonormal basis of `T_{(x,p)} f*P` as the null space of the
    /// constraint operator restricted to `T_x M × T_p P`.
    pub fn tangent_basis_svd(&self, z: &Vector) -> Result<Matrix> {
        check_membership(self, z)?;
        let (x, p) = self.split(z);
        let tb = range_basis(&self.product_projector(z), self.base().intrinsic_dim() + self.total().intrinsic_dim());
        let (_, null) = row_and_null_space(&(self.constraint(&x, &p) * &tb), RANK_REL_TOL);
        let expected = self.intrinsic_dim();
        if null.ncols() != expected {
            return Err(GeometryError::RankDeficient { expected, found: null.ncols() });
        }
        Ok(tb * null)
    }

    /// `X̃ = (X, 𝓛_p df X)`.
    pub fn horizontal_lift(&self, z: &Vector, v: &Vector) -> Result<Vector> {
        check_membership(self, z)?;
        let (x, p) = self.split(z);
        let pm = self.base().projector(&x);
        let v = pm * v;
        let dfv = differential(self.map.as_ref(), &x, &self.fd) * &v;
        Ok(concat(&v, &(self.bundle.lift_operator(&p, &self.fd) * dfv)))
    }

    /// `(0, U)` for a vector `U` at `p`, projected to the vertical space.
    pub fn vertical_lift(&self, z: &Vector, u: &Vector) -> Result<Vector> {
        let (x, p) = self.split(z);
        let v = self.bundle.vertical_projector(&p, &self.fd)? * u;
        Ok(concat(&Vector::zeros(x.len()), &v))
    }

    /// `dπ̃ (X, E) = (X, dπ E)`, landing in `T Γ_f` or `ν Γ_f`.
    pub fn d_pi_tilde(&self, z: &Vector, v: &Vector) -> (Vector, Vector) {
        let (_, p) = self.split(z);
        let (a, b) = self.split(v);
        (a, self.bundle.dpi(&p, &self.fd) * b)
    }

    /// Inverse of `dπ̃` on normal vectors of the graph: `(a, w) ↦ (a, 𝓛_p w)`.
    pub fn d_pi_tilde_normal_inverse(&self, z: &Vector, a: &Vector, w: &Vector) -> Vector {
        let (_, p) = self.split(z);
        concat(a, &(self.bundle.lift_operator(&p, &self.fd) * w))
    }

    pub fn graph_operators(&self, z: &Vector) -> Result<GraphOperators> {
        let (x, _) = self.split(z);
        GraphOperators::at(self.map.as_ref(), &x, &self.fd)
    }
}

impl Manifold for PullbackBundle {
    fn ambient_dim(&self) -> usize {
        self.dim_m() + self.total().ambient_dim()
    }

    fn intrinsic_dim(&self) -> usize {
        self.base().intrinsic_dim() + self.bundle.fiber_dim
    }

    /// `P_T - Cᵀ (C Cᵀ)⁺ C` with `P_T` the product projector and `C` the
    /// constraint operator, whose range is `T_{f(x)} N`.
    fn projector(&self, z: &Vector) -> Matrix {
        let (x, p) = self.split(z);
        let c = self.constraint(&x, &p);
        let pn = self.map.target().projector(&self.map.apply(&x));
        let n = pn.nrows();
        let gram = &c * c.transpose() + (Matrix::identity(n, n) - pn);
        let solved = spd_solve(&gram, &c).expect("π is a submersion, so the constraint has full rank");
        self.product_projector(z) - c.transpose() * solved
    }

    fn retract(&self, z: &Vector, v: &Vector) -> Vector {
        let (x, p) = self.split(z);
        let (vx, vp) = self.split(v);
        let x2 = self.base().retract(&x, &vx);
        let p2 = self.total().retract(&p, &vp);
        let n = self.map.apply(&x2);
        let p3 = match self.bundle.fibers.fiber_project(&p2, &n) {
            Ok(q) => q,
            Err(_) => Vector::from_element(p2.len(), f64::NAN),
        };
        concat(&x2, &p3)
    }

    fn random_point(&self, rng: &mut SampleRng) -> Vector {
        let x = self.base().random_point(rng);
        let n = self.map.apply(&x);
        let p = self.total().random_point(rng);
        let p = self
            .bundle
            .fibers
            .fiber_project(&p, &n)
            .or_else(|_| self.bundle.fibers.fiber_point(&n))
            .expect("every base point has a fiber");
        concat(&x, &p)
    }

    fn label(&self) -> String {
        format!("pullback({}, {})", self.map.label(), self.bundle.name)
    }
}

/// `Λ(Y, Y') = -dπ(A†_{pr_H Y'}(pr_V Y) + A†_{pr_H Y}(pr_V Y'))`.
#[derive(Clone)]
pub struct LambdaTerm {
    a: Arc<AComponents>,
    dpi: Matrix,
}

impl fmt::Debug for LambdaTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LambdaTerm").field("point", &self.a.point).finish()
    }
}

impl LambdaTerm {
    pub fn at(bundle: &RiemannianSubmersionBundle, p: &Vector, fd: &FiniteDiff) -> Result<Self> {
        Ok(Self { a: Arc::new(bundle.a_components(p, fd)?), dpi: bundle.dpi(p, fd) })
    }

    fn from_parts(a: Arc<AComponents>, dpi: Matrix) -> Self {
        Self { a, dpi }
    }

    pub fn eval(&self, y: &Vector, y2: &Vector) -> Vector {
        let vb = &self.a.vertical_basis;
        let v = |w: &Vector| vb * (vb.transpose() * w);
        let sum = self.a.a_dagger(y2, &v(y)) + self.a.a_dagger(y, &v(y2));
        -(&self.dpi * sum)
    }

    pub fn components(&self) -> &AComponents {
        &self.a
    }
}

pub fn lambda_term(bundle: &RiemannianSubmersionBundle, p: &Vector, y: &Vector, y2: &Vector, fd: &FiniteDiff) -> Result<Vector> {
    Ok(LambdaTerm::at(bundle, p, fd)?.eval(y, y2))
}

/// Everything the second-fundamental-form and curvature formulas need at
/// one point of `f*P`, materialized on tangent bases so the results are
/// exactly multilinear.
#[derive(Debug, Clone)]
pub struct PullbackFrame {
    pub point: Vector,
    pub ops: GraphOperators,
    pub lambda: LambdaTerm,
    /// `∂_i (df · P_M)` along the orthonormal basis of `T_x M`.
    hessian_parts: Vec<Matrix>,
    pn: Matrix,
    pub shape_m: ShapeData,
    pub shape_p: ShapeData,
    lift: Matrix,
    dim_m: usize,
}

impl PullbackFrame {
    pub fn at(pb: &PullbackBundle, z: &Vector, fd: &FiniteDiff) -> Result<Self> {
        check_membership(pb, z)?;
        let (x, p) = pb.split(z);
        let ops = pb.graph_operators(z)?;
        let m = pb.base().as_ref();
        let f = pb.map.as_ref();
        let hessian_parts = ops
            .basis_m
            .column_iter()
            .map(|e| fd.along(m, &x, &e.into_owned(), |y| differential(f, y, &pb.fd) * m.projector(y)))
            .collect();
        let pn = pb.map.target().projector(&ops.image);
        let a = Arc::new(pb.bundle.a_components(&p, fd)?);
        let lambda = LambdaTerm::from_parts(a, pb.bundle.dpi(&p, fd));
        Ok(Self {
            point: z.clone(),
            ops,
            lambda,
            hessian_parts,
            pn,
            shape_m: ShapeData::at(m, &x, fd)?,
            shape_p: ShapeData::at(pb.total().as_ref(), &p, fd)?,
            lift: pb.bundle.lift_operator(&p, fd),
            dim_m: pb.dim_m(),
        })
    }

    pub fn split(&self, v: &Vector) -> (Vector, Vector) {
        split(v, self.dim_m)
    }

    pub fn lift(&self, w: &Vector) -> Vector {
        &self.lift * w
    }

    /// Hessian `d²f(X, X')` on `T_x M`.
    pub fn d2f(&self, a: &Vector, b: &Vector) -> Vector {
        let coeffs = self.ops.basis_m.transpose() * a;
        let mut out = Vector::zeros(self.pn.nrows());
        for (c, h) in coeffs.iter().zip(&self.hessian_parts) {
            out += h * b * *c;
        }
        &self.pn * out
    }

    /// `d²f(X, X') + Λ(Y, Y')` for `X̃ = (X, Y)`, `X̃' = (X', Y')`.
    pub fn w(&self, a: &Vector, b: &Vector) -> Vector {
        let (xa, ya) = self.split(a);
        let (xb, yb) = self.split(b);
        self.d2f(&xa, &xb) + self.lambda.eval(&ya, &yb)
    }

    /// `II(X̃, X̃') = (dπ̃|_ν)⁻¹ Ξ_N(O(d²f(X,X') + Λ(Y,Y')))`, normal to `f*P`
    /// inside `M × P`.
    pub fn second_fundamental_form(&self, a: &Vector, b: &Vector) -> Vector {
        let w = self.ops.apply_o(&self.w(a, b));
        let (na, nb) = self.ops.xi_normal(&w);
        concat(&na, &self.lift(&nb))
    }

    /// Curvature of `f*P` from the curvatures of `M`, `P` and the graph data:
    /// `R_M + R_P + <O w(A,D), w(B,C)> - <O w(A,C), w(B,D)>`.
    pub fn riemann(&self, a: &Vector, b: &Vector, c: &Vector, d: &Vector) -> f64 {
        let (xa, ya) = self.split(a);
        let (xb, yb) = self.split(b);
        let (xc, yc) = self.split(c);
        let (xd, yd) = self.split(d);
        let rm = self.shape_m.riemann(&xa, &xb, &xc, &xd);
        let rp = self.shape_p.riemann(&ya, &yb, &yc, &yd);
        let o = |v: &Vector| self.ops.apply_o(v);
        rm + rp + o(&self.w(a, d)).dot(&self.w(b, c)) - o(&self.w(a, c)).dot(&self.w(b, d))
    }
}

/// Second fundamental form of `f*P` in `M × P` from the graph formula.
pub fn pullback_second_fundamental_form(pb: &PullbackBundle, z: &Vector, a: &Vector, b: &Vector, fd: &FiniteDiff) -> Result<Vector> {
    Ok(PullbackFrame::at(pb, z, fd)?.second_fundamental_form(a, b))
}

/// The same quantity computed directly from the ambient geometry of `f*P`:
/// the ambient second fundamental form with its `M × P`-normal part removed.
pub fn direct_second_fundamental_form(pb: &PullbackBundle, shape: &ShapeData, a: &Vector, b: &Vector) -> Vector {
    pb.product_projector(&shape.point) * shape.second_fundamental_form(a, b)
}

/// Both evaluation paths of `R(A, B, C, D)` on `f*P`: `(direct, formula)`.
pub fn pullback_curvature(
    pb: &PullbackBundle,
    z: &Vector,
    a: &Vector,
    b: &Vector,
    c: &Vector,
    d: &Vector,
    fd: &FiniteDiff,
) -> Result<(f64, f64)> {
    let direct = ShapeData::at(pb, z, fd)?.riemann(a, b, c, d);
    let formula = PullbackFrame::at(pb, z, fd)?.riemann(a, b, c, d);
    Ok((direct, formula))
}

#[derive(Debug, Clone, Serialize)]
pub struct SubmersionCheckReport {
    /// `max | |dπ̃ X̃| - |X̃| |` over horizontal basis lifts.
    pub horizontal_residual: f64,
    /// `max |<n1,n2> - <dπ̃ n1, dπ̃ n2>|` over normal basis pairs.
    pub normal_isometry_residual: f64,
    /// `max |dπ̃ n - pr_ν dπ̃ n|`: images of normals are normal to the graph.
    pub normal_image_residual: f64,
    pub samples: usize,
}

impl SubmersionCheckReport {
    pub fn max_residual(&self) -> f64 {
        self.horizontal_residual.max(self.normal_isometry_residual).max(self.normal_image_residual)
    }
}

pub fn pullback_submersion_check(pb: &PullbackBundle, samples: usize, seed: u64) -> Result<SubmersionCheckReport> {
    let per: Vec<Result<(f64, f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let z = pb.random_point(&mut rng_for(seed, i as u64));
            let ops = pb.graph_operators(&z)?;
            let mut horizontal: f64 = 0.0;
            for e in ops.basis_m.column_iter() {
                let lift = pb.horizontal_lift(&z, &e.into_owned())?;
                let (a, b) = pb.d_pi_tilde(&z, &lift);
                horizontal = horizontal.max((concat(&a, &b).norm() - lift.norm()).abs());
            }
            let normal_proj = pb.product_projector(&z) - pb.projector(&z);
            let dim_n = pb.map.target().intrinsic_dim();
            let normals = range_basis(&normal_proj, dim_n);
            let images: Vec<(Vector, Vector)> =
                normals.column_iter().map(|n| pb.d_pi_tilde(&z, &n.into_owned())).collect();
            let mut isometry: f64 = 0.0;
            let mut image: f64 = 0.0;
            for (i, (a1, b1)) in images.iter().enumerate() {
                let (pa, pb_) = ops.normal_projection(a1, b1);
                image = image.max((concat(&pa, &pb_) - concat(a1, b1)).norm());
                for (j, (a2, b2)) in images.iter().enumerate() {
                    let lhs = normals.column(i).dot(&normals.column(j));
                    let rhs = a1.dot(a2) + b1.dot(b2);
                    isometry = isometry.max((lhs - rhs).abs());
                }
            }
            Ok((horizontal, isometry, image))
        })
        .collect();
    let mut report =
        SubmersionCheckReport { horizontal_residual: 0.0, normal_isometry_residual: 0.0, normal_image_residual: 0.0, samples };
    for r in per {
        let (h, i, n) = r?;
        report.horizontal_residual = report.horizontal_residual.max(h);
        report.normal_isometry_residual = report.normal_isometry_residual.max(i);
        report.normal_image_residual = report.normal_image_residual.max(n);
    }
    Ok(report)
}

/// A metric on `M` written as `g(X, Y) = <G X, Y>` against the induced one.
#[derive(Clone)]
pub struct MetricOperatorField(Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>);

impl fmt::Debug for MetricOperatorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MetricOperatorField")
    }
}

impl MetricOperatorField {
    /// The induced metric, `G = P_M`.
    pub fn induced(m: ManifoldRef) -> Self {
        Self(Arc::new(move |x| m.projector(x)))
    }

    /// `G(x)` as an ambient matrix; only its restriction to `T_x M` is used.
    pub fn from_fn(f: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, x: &Vector) -> Matrix {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReductionSample {
    pub point: Vec<f64>,
    pub min_eigenvalue: f64,
    pub reconstruction_residual: f64,
    pub kernel_residual: f64,
    /// Largest `ε` keeping `G - ε dfᵀdf` positive definite at this point.
    pub max_admissible_epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReduction {
    pub epsilon: f64,
    pub min_eigenvalue: f64,
    pub max_admissible_epsilon: f64,
    pub max_reconstruction_residual: f64,
    pub max_kernel_residual: f64,
    pub samples: Vec<MetricReductionSample>,
}

fn symmetric_eigen_min_max(a: &Matrix) -> (f64, f64) {
    if a.nrows() == 0 {
        return (f64::INFINITY, 0.0);
    }
    let ev = a.clone().symmetric_eigen().eigenvalues;
    (ev.min(), ev.max())
}

/// Metric-reduction identity at one point: `g'_M = g_M - ε f*g_N`, i.e.
/// `G' = G - ε dfᵀ df` in an orthonormal frame of the induced metric.
pub fn reduce_metric_at(map: &MapRef, g: &MetricOperatorField, epsilon: f64, x: &Vector, fd: &FiniteDiff) -> Result<MetricReductionSample> {
    if !(epsilon > 0.0) {
        return Err(GeometryError::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let ops = GraphOperators::at(map.as_ref(), x, fd)?;
    let b = &ops.basis_m;
    let gm = b.transpose() * g.eval(x) * b;
    let gm = (&gm + gm.transpose()) * 0.5;
    let dtd = ops.df.transpose() * &ops.df;
    let reduced = &gm - &dtd * epsilon;
    let (min_eigenvalue, _) = symmetric_eigen_min_max(&reduced);
    let (gmin, _) = symmetric_eigen_min_max(&gm);
    if !(gmin > 0.0) {
        return Err(GeometryError::InvalidParameter(format!("metric operator is not positive definite (min eigenvalue {gmin})")));
    }
    // generalized eigenproblem dfᵀdf v = λ G v via Cholesky of G
    let chol = gm.clone().cholesky().ok_or(GeometryError::IllConditioned { condition: f64::INFINITY })?;
    let l_inv = chol.l().try_inverse().ok_or(GeometryError::IllConditioned { condition: f64::INFINITY })?;
    let (_, lambda_max) = symmetric_eigen_min_max(&(&l_inv * &dtd * l_inv.transpose()));
    let max_admissible_epsilon = if lambda_max > 0.0 { 1.0 / lambda_max } else { f64::INFINITY };

    let gn_pull = &dtd;
    let reconstruction_residual = (&reduced + gn_pull * epsilon - &gm).amax();
    let (_, kernel) = row_and_null_space(&ops.df, RANK_REL_TOL);
    let kernel_residual = if kernel.ncols() == 0 {
        0.0
    } else {
        (kernel.transpose() * (&reduced - &gm)).amax()
    };
    Ok(MetricReductionSample {
        point: x.as_slice().to_vec(),
        min_eigenvalue,
        reconstruction_residual,
        kernel_residual,
        max_admissible_epsilon,
    })
}

/// Checks admissibility of `ε` over sampled points of `M`.
pub fn reduce_connection_metric(
    map: &MapRef,
    g: &MetricOperatorField,
    epsilon: f64,
    samples: usize,
    seed: u64,
    fd: &FiniteDiff,
) -> Result<MetricReduction> {
    let m = map.source().clone();
    let per: Vec<Result<MetricReductionSample>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = m.random_point(&mut rng_for(seed, i as u64));
            reduce_metric_at(map, g, epsilon, &x, fd)
        })
        .collect();
    let samples = per.into_iter().collect::<Result<Vec<_>>>()?;
    let min_eigenvalue = samples.iter().map(|s| s.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let max_admissible_epsilon = samples.iter().map(|s| s.max_admissible_epsilon).fold(f64::INFINITY, f64::min);
    if !(min_eigenvalue > 0.0) {
        return Err(GeometryError::InadmissibleEpsilon { epsilon, min_eigenvalue, max_admissible: max_admissible_epsilon });
    }
    Ok(MetricReduction {
        epsilon,
        min_eigenvalue,
        max_admissible_epsilon,
        max_reconstruction_residual: samples.iter().map(|s| s.reconstruction_residual).fold(0.0, f64::max),
        max_kernel_residual: samples.iter().map(|s| s.kernel_residual).fold(0.0, f64::max),
        samples,
    })
}

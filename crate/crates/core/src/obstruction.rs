//! Curvature obstruction for pull-back bundles of fat submersions.
//!
//! At a regular point `x` of `f` and `X ∈ ker df_x`, non-negative curvature
//! of `f*P` forces `A(𝓛 O d²f(X,X), 𝓛 df Z) = 0` for every `Z`. When the
//! obstruction vector is nonzero, the quadratic expansion
//! `t² R(X̃,Ũ,Ũ,X̃) + 2t R(X̃,Ũ,Z̃,X̃) + R(X̃,Z̃,Z̃,X̃)` with a vanishing leading
//! coefficient yields an explicit negatively curved plane.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core_geometry::{FiniteDiff, Manifold, ShapeData};
use crate::error::{GeometryError, Result};
use crate::graph_geometry::{d2f, differential, SmoothMap};
use crate::linalg::{concat, gaussian_vector, range_basis, rng_for, row_and_null_space, singular_values, Matrix, Vector};
use crate::pullback::{PullbackBundle, PullbackFrame};
use crate::submersion::RANK_REL_TOL;

pub const KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub obstruction: f64,
    pub level_set: f64,
    pub cross_term: f64,
    pub negativity: f64,
    pub r1: f64,
    pub r2: f64,
    pub rank: f64,
    pub fiber_geodesy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { obstruction: 1e-6, level_set: 1e-6, cross_term: 1e-4, negativity: 1e-6, r1: 1e-4, r2: 1e-3, rank: 1e-6, fiber_geodesy: 1e-6 }
    }
}

/// Splitting `T_x M = ker df_x ⊕ (ker df_x)^⊥`, orthonormal bases in ambient
/// coordinates.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    pub kernel: Matrix,
    pub complement: Matrix,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub regular: bool,
}

pub fn kernel_split(f: &dyn SmoothMap, x: &Vector, fd: &FiniteDiff) -> KernelSplit {
    let m = f.source();
    let basis = range_basis(&m.projector(x), m.intrinsic_dim());
    let df = differential(f, x, fd) * &basis;
    let (row, null) = row_and_null_space(&df, RANK_REL_TOL);
    let rank = row.ncols();
    KernelSplit {
        kernel: &basis * null,
        complement: &basis * row,
        singular_values: singular_values(&df),
        rank,
        regular: rank == f.target().intrinsic_dim(),
    }
}

fn kernel_projector(f: &dyn SmoothMap, y: &Vector, fd: &FiniteDiff) -> Matrix {
    let k = kernel_split(f, y, fd).kernel;
    &k * k.transpose()
}

/// Second fundamental form of the level set `f⁻¹(f(x))` at `x` in direction
/// `X`, computed as `pr_{(ker df)^⊥} D_X X̄` for `X̄(y) = K(y) X`, together
/// with the residual of `d²f(X,X) = -df(II(X,X))`.
pub fn level_set_second_fundamental_form(f: &dyn SmoothMap, x: &Vector, v: &Vector, fd: &FiniteDiff) -> Result<(Vector, f64)> {
    let split = kernel_split(f, x, fd);
    let kx = &split.kernel * (split.kernel.transpose() * v);
    if (&kx - v).norm() > KERNEL_TOL * v.norm().max(1.0) {
        return Err(GeometryError::NotInKernel { residual: (&kx - v).norm() });
    }
    let m = f.source().as_ref();
    let d = fd.along_vector(m, x, v, |y| kernel_projector(f, y, fd) * v);
    let ii = &split.complement * (split.complement.transpose() * d);
    let hess = d2f(f, x, v, v, fd)?;
    let residual = (hess + differential(f, x, fd) * &ii).norm();
    Ok((ii, residual))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NegativePlaneCertificate {
    pub point: Vec<f64>,
    /// `X̃ = (X, 0)`.
    pub x_tilde: Vec<f64>,
    /// `W̃ = t Ũ + Z̃`.
    pub w_tilde: Vec<f64>,
    pub u_tilde: Vec<f64>,
    pub z_tilde: Vec<f64>,
    pub t: f64,
    /// Directly computed sectional curvature of `span(X̃, W̃)`.
    pub sec_value: f64,
    /// Value predicted by the expansion with `R(X̃,Ũ,Ũ,X̃) = 0` and the
    /// cross term from the A-tensor formula.
    pub predicted: f64,
    pub relative_error: f64,
    pub cross_term: f64,
    pub cross_term_formula: f64,
    pub r_xz: f64,
    pub r_xu: f64,
}

/// Everything needed for the obstruction analysis at one point of `f*P`.
#[derive(Debug, Clone)]
pub struct ObstructionFrame {
    pub point: Vector,
    pub frame: PullbackFrame,
    pub shape: ShapeData,
    pub split: KernelSplit,
    dim_m: usize,
    fiber_dim: usize,
}

impl ObstructionFrame {
    pub fn at(pb: &PullbackBundle, z: &Vector, fd: &FiniteDiff) -> Result<Self> {
        let frame = PullbackFrame::at(pb, z, fd)?;
        let shape = ShapeData::at(pb, z, fd)?;
        let (x, _) = pb.split(z);
        let split = kernel_split(pb.map.as_ref(), &x, &pb.fd);
        Ok(Self { point: z.clone(), frame, shape, split, dim_m: pb.dim_m(), fiber_dim: pb.bundle.fiber_dim })
    }

    fn check_kernel(&self, v: &Vector) -> Result<()> {
        let residual = self.frame.ops.apply_df(v).norm();
        if residual > KERNEL_TOL * v.norm().max(1.0) {
            return Err(GeometryError::NotInKernel { residual });
        }
        Ok(())
    }

    fn a(&self, x: &Vector, y: &Vector) -> Vector {
        self.frame.lambda.components().a(x, y)
    }

    /// `𝓛 O d²f(X, X)`.
    pub fn lifted_hessian(&self, v: &Vector) -> Vector {
        self.frame.lift(&self.frame.ops.apply_o(&self.frame.d2f(v, v)))
    }

    /// `(X, 0)`, `(0, pr_V U)` and `(Z, 𝓛 df Z)`.
    pub fn x_tilde(&self, v: &Vector) -> Vector {
        concat(v, &Vector::zeros(self.point.len() - self.dim_m))
    }

    pub fn u_tilde(&self, u: &Vector) -> Vector {
        let vb = &self.frame.lambda.components().vertical_basis;
        concat(&Vector::zeros(self.dim_m), &(vb * (vb.transpose() * u)))
    }

    pub fn z_tilde(&self, z: &Vector) -> Vector {
        concat(z, &self.frame.lift(&self.frame.ops.apply_df(z)))
    }

    /// `A(𝓛 O d²f(X,X), 𝓛 df Z)`, a vertical vector at `p`.
    pub fn obstruction_vector(&self, v: &Vector, z: &Vector) -> Result<Vector> {
        self.check_kernel(v)?;
        Ok(self.a(&self.lifted_hessian(v), &self.frame.lift(&self.frame.ops.apply_df(z))))
    }

    /// Operator norm of `Z ↦ A(𝓛 O d²f(X,X), 𝓛 df Z)` on `(ker df)^⊥`.
    pub fn obstruction_norm(&self, v: &Vector) -> Result<f64> {
        self.check_kernel(v)?;
        let vb = &self.frame.lambda.components().vertical_basis;
        let comp = &self.split.complement;
        if comp.ncols() == 0 || vb.ncols() == 0 {
            return Ok(0.0);
        }
        let mut m = Matrix::zeros(vb.ncols(), comp.ncols());
        for (j, z) in comp.column_iter().enumerate() {
            let ob = self.obstruction_vector(v, &z.into_owned())?;
            m.set_column(j, &(vb.transpose() * ob));
        }
        Ok(singular_values(&m).first().copied().unwrap_or(0.0))
    }

    /// `|R(Ũ, X̃, X̃, Ũ)|`, computed directly on `f*P`.
    pub fn vertizontal_flat_residual(&self, v: &Vector, u: &Vector) -> Result<f64> {
        self.check_kernel(v)?;
        let xt = self.x_tilde(v);
        let ut = self.u_tilde(u);
        Ok(self.shape.riemann(&ut, &xt, &xt, &ut).abs())
    }

    /// `(R(Ũ, X̃, X̃, Z̃), -<A(𝓛 df Z, 𝓛 O d²f(X,X)), U>)`.
    pub fn cross_term(&self, v: &Vector, u: &Vector, z: &Vector) -> Result<(f64, f64)> {
        self.check_kernel(v)?;
        let xt = self.x_tilde(v);
        let ut = self.u_tilde(u);
        let zt = self.z_tilde(z);
        let direct = self.shape.riemann(&ut, &xt, &xt, &zt);
        let (_, uv) = self.frame.split(&ut);
        let formula = -self.a(&self.frame.lift(&self.frame.ops.apply_df(z)), &self.lifted_hessian(v)).dot(&uv);
        Ok((direct, formula))
    }

    /// Rank of `Y ↦ A(𝓛 O d²f(X,X), 𝓛 Y)` on `T_{f(x)} N`.
    pub fn xi_map_rank(&self, v: &Vector, tol: f64) -> usize {
        let comps = self.frame.lambda.components();
        let vb = &comps.vertical_basis;
        let bn = &self.frame.ops.basis_n;
        let h = self.lifted_hessian(v);
        let mut m = Matrix::zeros(vb.ncols(), bn.ncols());
        for (j, y) in bn.column_iter().enumerate() {
            m.set_column(j, &(vb.transpose() * self.a(&h, &self.frame.lift(&y.into_owned()))));
        }
        singular_values(&m).iter().filter(|&&s| s > tol).count().min(self.fiber_dim)
    }

    /// Builds the plane `span(X̃, tŨ + Z̃)` from the strongest obstruction
    /// direction. Returns `None` when the cross term is below `tol.cross_term`
    /// or the directly computed curvature is not negative.
    pub fn negative_plane(&self, v: &Vector, tol: &Tolerances) -> Result<Option<NegativePlaneCertificate>> {
        self.check_kernel(v)?;
        let mut best: Option<(f64, Vector, Vector)> = None;
        for z in self.split.complement.column_iter() {
            let z = z.into_owned();
            let ob = self.obstruction_vector(v, &z)?;
            let n = ob.norm();
            if best.as_ref().map_or(true, |b| n > b.0) {
                best = Some((n, z, ob));
            }
        }
        let Some((norm, z, ob)) = best else { return Ok(None) };
        if norm == 0.0 {
            return Ok(None);
        }
        let u = &ob / norm;
        let xt = self.x_tilde(v);
        let ut = self.u_tilde(&u);
        let zt = self.z_tilde(&z);
        let c = self.shape.riemann(&xt, &ut, &zt, &xt);
        if c.abs() <= tol.cross_term {
            return Ok(None);
        }
        let (_, formula) = self.cross_term(v, &u, &z)?;
        let r_xz = self.shape.riemann(&xt, &zt, &zt, &xt);
        let r_xu = self.shape.riemann(&xt, &ut, &ut, &xt);
        let t = -c.signum() * (r_xz + 1.0) / (2.0 * c.abs());
        let w = &ut * t + &zt;
        let gram = xt.norm_squared() * w.norm_squared() - xt.dot(&w).powi(2);
        let sec_value = self.shape.sectional_curvature(&xt, &w)?;
        let predicted = (2.0 * t * formula + r_xz) / gram;
        if !(sec_value < -tol.negativity) {
            return Ok(None);
        }
        Ok(Some(NegativePlaneCertificate {
            point: self.point.as_slice().to_vec(),
            x_tilde: xt.as_slice().to_vec(),
            w_tilde: w.as_slice().to_vec(),
            u_tilde: ut.as_slice().to_vec(),
            z_tilde: zt.as_slice().to_vec(),
            t,
            sec_value,
            predicted,
            relative_error: ((predicted - sec_value) / sec_value).abs(),
            cross_term: c,
            cross_term_formula: formula,
            r_xz,
            r_xu,
        }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionSample {
    pub index: usize,
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub obstruction_norm: f64,
    pub xi_rank: usize,
    pub hessian_norm: f64,
    pub level_set_ii_norm: f64,
    pub level_set_residual: f64,
    pub r1_residual: f64,
    pub r2_direct: f64,
    pub r2_formula: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankProfile {
    pub min_rank: usize,
    pub max_rank: usize,
    pub histogram: BTreeMap<usize, usize>,
    /// Points where the rank drops below its maximum, at most ten.
    pub singular_witnesses: Vec<Vec<f64>>,
    pub points: usize,
}

/// Rank of `df` at random points and on the coordinate-hyperplane slices
/// `{x_k = 0}` of the source, where singular sets of the built-in maps sit.
pub fn rank_profile(f: &dyn SmoothMap, samples: usize, seed: u64, fd: &FiniteDiff) -> RankProfile {
    let m = f.source().clone();
    let d = m.ambient_dim();
    let points: Vec<Vector> = (0..samples)
        .map(|i| m.random_point(&mut rng_for(seed, i as u64)))
        .chain((0..samples).map(|i| {
            let mut rng = rng_for(seed ^ 0x5eed_51ce, i as u64);
            let mut g = gaussian_vector(&mut rng, d);
            g[i % d] = 0.0;
            m.retract(&g, &Vector::zeros(d))
        }))
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .collect();
    let ranks: Vec<usize> = points.par_iter().map(|x| kernel_split(f, x, fd).rank).collect();
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    let mut histogram = BTreeMap::new();
    let mut witnesses = Vec::new();
    for (x, &r) in points.iter().zip(&ranks) {
        *histogram.entry(r).or_insert(0) += 1;
        if r < max_rank && witnesses.len() < 10 {
            witnesses.push(x.as_slice().to_vec());
        }
    }
    RankProfile {
        min_rank: ranks.iter().copied().min().unwrap_or(0),
        max_rank,
        histogram,
        singular_witnesses: witnesses,
        points: points.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Consistent,
    Violated,
    /// Obstructions above tolerance without a verified negative plane.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "CONSISTENT",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReportSettings {
    pub samples: usize,
    pub directions: usize,
    pub seed: u64,
    pub fd: FiniteDiff,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    pub verdict: Verdict,
    pub fat: bool,
    pub fatness_sigma: f64,
    pub fiber_geodesy: f64,
    pub regular_points: usize,
    pub singular_points: usize,
    pub max_obstruction_norm: f64,
    pub max_level_set_ii: f64,
    pub max_level_set_residual: f64,
    pub max_r1_residual: f64,
    pub max_r2_mismatch: f64,
    /// Sample with the largest obstruction norm.
    pub worst: Option<ObstructionSample>,
    pub certificates: Vec<NegativePlaneCertificate>,
    pub certificate_count: usize,
    pub samples: Vec<ObstructionSample>,
}

struct PointOutcome {
    samples: Vec<ObstructionSample>,
    regular: bool,
    certificate: Option<NegativePlaneCertificate>,
}

fn evaluate_point(pb: &PullbackBundle, index: usize, s: &ReportSettings) -> Result<PointOutcome> {
    let mut rng = rng_for(s.seed, index as u64);
    let z = pb.random_point(&mut rng);
    let of = ObstructionFrame::at(pb, &z, &s.fd)?;
    if !of.split.regular || of.split.kernel.ncols() == 0 {
        return Ok(PointOutcome { samples: Vec::new(), regular: of.split.regular, certificate: None });
    }
    let (x, p) = pb.split(&z);
    let kdim = of.split.kernel.ncols();
    let mut samples = Vec::with_capacity(s.directions);
    for _ in 0..s.directions {
        let c = gaussian_vector(&mut rng, kdim);
        let v = &of.split.kernel * (&c / c.norm());
        let u = pb.bundle.random_vertical_unit(&p, &mut rng, &s.fd);
        let zc = if of.split.complement.ncols() > 0 {
            let c = gaussian_vector(&mut rng, of.split.complement.ncols());
            &of.split.complement * (&c / c.norm())
        } else {
            Vector::zeros(x.len())
        };
        let (ii, level_set_residual) = level_set_second_fundamental_form(pb.map.as_ref(), &x, &v, &s.fd)?;
        let (r2_direct, r2_formula) = of.cross_term(&v, &u, &zc)?;
        samples.push(ObstructionSample {
            index,
            point: z.as_slice().to_vec(),
            direction: v.as_slice().to_vec(),
            obstruction_norm: of.obstruction_norm(&v)?,
            xi_rank: of.xi_map_rank(&v, s.tolerances.rank),
            hessian_norm: of.frame.d2f(&v, &v).norm(),
            level_set_ii_norm: ii.norm(),
            level_set_residual,
            r1_residual: of.vertizontal_flat_residual(&v, &u)?,
            r2_direct,
            r2_formula,
        });
    }
    let worst = samples
        .iter()
        .max_by(|a, b| a.obstruction_norm.total_cmp(&b.obstruction_norm))
        .expect("at least one direction");
    let certificate = if worst.obstruction_norm > s.tolerances.obstruction {
        let v = Vector::from_column_slice(&worst.direction);
        of.negative_plane(&v, &s.tolerances)?
    } else {
        None
    };
    Ok(PointOutcome { samples, regular: true, certificate })
}

/// Aggregates fatness of `π`, obstruction norms, level-set geodesy and
/// negative-plane certificates into a verdict.
pub fn theorem_report(pb: &PullbackBundle, s: &ReportSettings) -> Result<ObstructionReport> {
    let fatness = pb.bundle.fatness(s.samples, s.directions, s.seed, &s.fd)?;
    let fiber = pb.bundle.totally_geodesic_fibers_check(s.samples.min(50), s.seed, &s.fd)?;
    let outcomes: Vec<Result<PointOutcome>> = (0..s.samples).into_par_iter().map(|i| evaluate_point(pb, i, s)).collect();
    let mut report = ObstructionReport {
        verdict: Verdict::Consistent,
        fat: fatness.fat,
        fatness_sigma: fatness.min_sigma,
        fiber_geodesy: fiber.max_norm,
        regular_points: 0,
        singular_points: 0,
        max_obstruction_norm: 0.0,
        max_level_set_ii: 0.0,
        max_level_set_residual: 0.0,
        max_r1_residual: 0.0,
        max_r2_mismatch: 0.0,
        worst: None,
        certificates: Vec::new(),
        certificate_count: 0,
        samples: Vec::new(),
    };
    for outcome in outcomes {
        let o = outcome?;
        if o.regular {
            report.regular_points += 1;
        } else {
            report.singular_points += 1;
        }
        if let Some(c) = o.certificate {
            report.certificate_count += 1;
            if report.certificates.len() < 5 {
                report.certificates.push(c);
            }
        }
        report.samples.extend(o.samples);
    }
    for smp in &report.samples {
        report.max_obstruction_norm = report.max_obstruction_norm.max(smp.obstruction_norm);
        report.max_level_set_ii = report.max_level_set_ii.max(smp.level_set_ii_norm);
        report.max_level_set_residual = report.max_level_set_residual.max(smp.level_set_residual);
        report.max_r1_residual = report.max_r1_residual.max(smp.r1_residual);
        report.max_r2_mismatch = report.max_r2_mismatch.max((smp.r2_direct - smp.r2_formula).abs());
        if report.worst.as_ref().map_or(true, |w| smp.obstruction_norm > w.obstruction_norm) {
            report.worst = Some(smp.clone());
        }
    }
    // Without totally geodesic fibers the vertizontal curvature identity
    // behind the certificate no longer holds.
    report.verdict = if report.fiber_geodesy > s.tolerances.fiber_geodesy {
        Verdict::Inconclusive
    } else if report.certificate_count > 0 {
        Verdict::Violated
    } else if report.max_obstruction_norm <= s.tolerances.obstruction {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    };
    Ok(report)
}

//! The `validate`, `check` and `curvature` commands.

use std::time::Instant;

use rayon::prelude::*;

use super::report::{CheckRecord, CurvatureTable, RunReport, Status};
use super::scenario::{Scenario, ScenarioConfig};
use crate::core_geometry::{random_tangent, random_unit_tangent, sectional_curvature, Manifold, ShapeData};
use crate::error::{GeometryError, Result};
use crate::linalg::{concat, gaussian_vector, range_basis, rng_for, Matrix, Vector};
use crate::obstruction::{level_set_second_fundamental_form, rank_profile, theorem_report, ObstructionFrame, ReportSettings, Verdict};
use crate::pullback::{direct_second_fundamental_form, pullback_submersion_check, reduce_connection_metric, MetricOperatorField, PullbackFrame};

/// Caps the global rayon pool by `SUBMERSION_LAB_THREADS` when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var("SUBMERSION_LAB_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn projector_defect(p: &Matrix, dim: usize) -> f64 {
    let idem = (p * p - p).amax();
    let sym = (p - p.transpose()).amax();
    let trace = (p.trace() - dim as f64).abs() * 1e-2;
    idem.max(sym).max(trace)
}

const POINT_CHECKS: [&str; 15] = [
    "core.projector.base",
    "core.projector.total",
    "core.projector.pullback",
    "core.riemann_symmetries",
    "graph.normal_projection",
    "graph.xi_inverse",
    "submersion.riemannian",
    "submersion.a_dagger_duality",
    "submersion.gray_oneill",
    "pullback.retraction_membership",
    "pullback.second_fundamental_form",
    "pullback.curvature_paths",
    "obstruction.r1",
    "obstruction.r2",
    "obstruction.level_set_identity",
];

fn point_tolerances(cfg: &ScenarioConfig) -> [f64; 15] {
    let t = &cfg.tolerances;
    [
        t.projector,
        t.projector,
        t.projector,
        t.riemann_symmetry,
        t.normal_projection,
        t.xi_inverse,
        t.submersion,
        t.a_dagger_duality,
        t.gray_oneill,
        t.membership,
        t.second_fundamental_form,
        t.curvature_paths,
        t.r1,
        t.r2,
        t.level_set_identity,
    ]
}

/// Residuals of every pointwise identity at sample `index`.
fn validate_point(s: &Scenario, index: usize) -> Result<(Vector, [f64; 15])> {
    let pb = &s.pullback;
    let fd = s.config.fd();
    let mut rng = rng_for(s.config.seed, index as u64);
    let z = pb.random_point(&mut rng);
    let (x, p) = pb.split(&z);
    let m = pb.base().as_ref();
    let total = pb.total().as_ref();
    let bundle = &pb.bundle;
    let mut v = [0.0; 15];

    v[0] = projector_defect(&m.projector(&x), m.intrinsic_dim());
    v[1] = projector_defect(&total.projector(&p), total.intrinsic_dim());
    v[2] = projector_defect(&pb.projector(&z), pb.intrinsic_dim());

    let shape = ShapeData::at(pb, &z, &fd)?;
    let t: Vec<Vector> = (0..4).map(|_| random_unit_tangent(pb, &z, &mut rng)).collect();
    let r = |a: usize, b: usize, c: usize, d: usize| shape.riemann(&t[a], &t[b], &t[c], &t[d]);
    let base = r(0, 1, 2, 3);
    v[3] = [
        (base + r(1, 0, 2, 3)).abs(),
        (base + r(0, 1, 3, 2)).abs(),
        (base - r(2, 3, 0, 1)).abs(),
        (base + r(1, 2, 0, 3) + r(2, 0, 1, 3)).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let ops = pb.graph_operators(&z)?;
    let n = pb.map.target();
    let dim_m = ops.basis_m.ncols();
    let mut graph_tangent = Matrix::zeros(x.len() + ops.image.len(), dim_m);
    for (i, e) in ops.basis_m.column_iter().enumerate() {
        let e = e.into_owned();
        graph_tangent.set_column(i, &concat(&e, &ops.apply_df(&e)));
    }
    let q = if dim_m > 0 { graph_tangent.qr().q() } else { graph_tangent };
    let vx = random_tangent(m, &x, &mut rng);
    let wy = random_tangent(n.as_ref(), &ops.image, &mut rng);
    let joint = concat(&vx, &wy);
    let brute = &joint - &q * (q.transpose() * &joint);
    let (na, nb) = ops.normal_projection(&vx, &wy);
    v[4] = (concat(&na, &nb) - brute).norm();
    let (xa, xb) = ops.xi(&vx, &wy);
    let (ia, ib) = ops.xi_inverse(&xa, &xb)?;
    v[5] = (concat(&ia, &ib) - joint).norm();

    v[6] = bundle.submersion_residual(&p, &fd)?;
    let comps = bundle.a_components(&p, &fd)?;
    if comps.horizontal_basis.ncols() > 0 && comps.vertical_basis.ncols() > 0 {
        let h = bundle.random_horizontal_unit(&p, &mut rng, &fd);
        let u = bundle.random_vertical_unit(&p, &mut rng, &fd);
        let dag = bundle.a_dagger(&p, &h, &u, &fd)?;
        v[7] = comps
            .horizontal_basis
            .column_iter()
            .map(|y| {
                let y = y.into_owned();
                (dag.dot(&y) - u.dot(&bundle.a_tensor(&p, &h, &y, &fd).unwrap_or_else(|_| Vector::zeros(p.len())))).abs()
            })
            .fold(0.0, f64::max);
        let sec = bundle.vertizontal_sec(&p, &h, &u, &fd)?;
        v[8] = (sec - sectional_curvature(total, &p, &h, &u, &fd)?).abs();
    }

    let step = random_unit_tangent(pb, &z, &mut rng) * 1e-2;
    v[9] = pb.constraint_residual(&pb.retract(&z, &step));

    let frame = PullbackFrame::at(pb, &z, &fd)?;
    let formula = frame.second_fundamental_form(&t[0], &t[1]);
    let direct = direct_second_fundamental_form(pb, &shape, &t[0], &t[1]);
    let (fa, fb) = pb.d_pi_tilde(&z, &formula);
    let (da, db) = pb.d_pi_tilde(&z, &direct);
    v[10] = (concat(&fa, &fb) - concat(&da, &db)).norm();
    v[11] = (frame.riemann(&t[0], &t[1], &t[2], &t[3]) - base).abs();

    let of = ObstructionFrame::at(pb, &z, &fd)?;
    if of.split.regular && of.split.kernel.ncols() > 0 && bundle.fiber_dim > 0 {
        let c = gaussian_vector(&mut rng, of.split.kernel.ncols());
        let xk = &of.split.kernel * (&c / c.norm());
        let u = bundle.random_vertical_unit(&p, &mut rng, &fd);
        v[12] = of.vertizontal_flat_residual(&xk, &u)?;
        let zc = if of.split.complement.ncols() > 0 {
            let c = gaussian_vector(&mut rng, of.split.complement.ncols());
            &of.split.complement * (&c / c.norm())
        } else {
            Vector::zeros(x.len())
        };
        let (d, f) = of.cross_term(&xk, &u, &zc)?;
        v[13] = (d - f).abs();
        v[14] = level_set_second_fundamental_form(pb.map.as_ref(), &x, &xk, &fd)?.1;
    }
    Ok((z, v))
}

fn metric_check(s: &Scenario, report: &mut RunReport) -> bool {
    let cfg = &s.config;
    let map = &s.pullback.map;
    let g = MetricOperatorField::induced(map.source().clone());
    match reduce_connection_metric(map, &g, cfg.epsilon, cfg.samples, cfg.seed, &cfg.fd()) {
        Ok(r) => {
            let worst = r
                .samples
                .iter()
                .min_by(|a, b| a.min_eigenvalue.total_cmp(&b.min_eigenvalue))
                .map(|w| w.point.clone())
                .unwrap_or_default();
            report.checks.push(
                CheckRecord::info("pullback.metric_reduction.min_eigenvalue", r.min_eigenvalue)
                    .with_witness(worst)
                    .with_detail(format!("max admissible epsilon {}", r.max_admissible_epsilon)),
            );
            report.checks.push(CheckRecord::bound(
                "pullback.metric_reduction.reconstruction",
                r.max_reconstruction_residual,
                cfg.tolerances.reconstruction,
            ));
            report.checks.push(CheckRecord::bound(
                "pullback.metric_reduction.kernel_agreement",
                r.max_kernel_residual,
                cfg.tolerances.kernel_metric,
            ));
            true
        }
        Err(GeometryError::InadmissibleEpsilon { epsilon, min_eigenvalue, max_admissible }) => {
            report.checks.push(CheckRecord {
                name: "pullback.metric_reduction.admissibility".into(),
                status: Status::Fail,
                value: min_eigenvalue,
                tolerance: Some(0.0),
                witness: None,
                detail: Some(format!("epsilon {epsilon} is inadmissible; max admissible epsilon {max_admissible}")),
            });
            report.verdict = Some("ERROR".into());
            report.exit_code = 1;
            false
        }
        Err(e) => {
            report.checks.push(CheckRecord::info("pullback.metric_reduction", f64::NAN).with_detail(e.to_string()));
            report.checks.last_mut().expect("just pushed").status = Status::Fail;
            report.verdict = Some("ERROR".into());
            report.exit_code = 1;
            false
        }
    }
}

/// Runs the full invariant suite.
pub fn cmd_validate(config: &ScenarioConfig) -> Result<RunReport> {
    let start = Instant::now();
    let s = Scenario::build(config.clone())?;
    let cfg = &s.config;
    let fd = cfg.fd();
    let mut report = RunReport::new(cfg, "validate");

    let per: Vec<Result<(Vector, [f64; 15])>> = (0..cfg.samples).into_par_iter().map(|i| validate_point(&s, i)).collect();
    let mut worst: Vec<(f64, Vector)> = vec![(0.0, Vector::zeros(0)); 15];
    for r in per {
        let (z, v) = r?;
        for (k, val) in v.iter().enumerate() {
            if !(*val <= worst[k].0) {
                worst[k] = (*val, z.clone());
            }
        }
    }
    let tols = point_tolerances(cfg);
    for (k, name) in POINT_CHECKS.iter().enumerate() {
        report.checks.push(CheckRecord::bound(*name, worst[k].0, tols[k]).with_witness(worst[k].1.as_slice().to_vec()));
    }

    let bundle = &s.pullback.bundle;
    let fibers = bundle.totally_geodesic_fibers_check(cfg.samples, cfg.seed, &fd)?;
    report.checks.push(
        CheckRecord::bound("submersion.fiber_geodesy", fibers.max_norm, cfg.tolerances.fiber_geodesy).with_witness(fibers.worst_point),
    );
    let fat = bundle.fatness(cfg.samples, cfg.directions, cfg.seed, &fd)?;
    report.checks.push(
        CheckRecord::info("submersion.fatness", fat.min_sigma)
            .with_witness(fat.worst_point)
            .with_detail(if fat.fat { "fat" } else { "not fat" }),
    );
    let sub = pullback_submersion_check(&s.pullback, cfg.samples, cfg.seed)?;
    report.checks.push(CheckRecord::bound("pullback.submersion", sub.max_residual(), cfg.tolerances.submersion));
    let admissible = metric_check(&s, &mut report);

    report.exit_code = if admissible && report.all_pass() { 0 } else { 1 };
    report.verdict = Some(if report.exit_code == 0 { "PASS" } else { "FAIL" }.into());
    report.wall_clock_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

/// Obstruction analysis with a verdict: exit 0 consistent, 2 violated,
/// 1 inadmissible metric or inconclusive.
pub fn cmd_check(config: &ScenarioConfig) -> Result<RunReport> {
    let start = Instant::now();
    let s = Scenario::build(config.clone())?;
    let cfg = &s.config;
    let fd = cfg.fd();
    let mut report = RunReport::new(cfg, "check");
    if !metric_check(&s, &mut report) {
        report.wall_clock_ms = start.elapsed().as_millis() as u64;
        return Ok(report);
    }
    let tol = cfg.tolerances;
    let settings = ReportSettings {
        samples: cfg.samples,
        directions: cfg.directions,
        seed: cfg.seed,
        fd,
        tolerances: tol.obstruction(),
    };
    let r = theorem_report(&s.pullback, &settings)?;
    let worst_point = r.worst.as_ref().map(|w| w.point.clone()).unwrap_or_default();
    let worst_dir = r.worst.as_ref().map(|w| w.direction.clone()).unwrap_or_default();
    report.checks.push(
        CheckRecord::info("submersion.fatness", r.fatness_sigma).with_detail(if r.fat { "fat" } else { "not fat" }),
    );
    report.checks.push(CheckRecord::bound("submersion.fiber_geodesy", r.fiber_geodesy, tol.fiber_geodesy));
    let profile = rank_profile(s.pullback.map.as_ref(), cfg.samples, cfg.seed, &fd);
    report.checks.push(
        CheckRecord::info("obstruction.rank_profile.min_rank", profile.min_rank as f64)
            .with_witness(profile.singular_witnesses.first().cloned().unwrap_or_default())
            .with_detail(format!("histogram {:?}", profile.histogram)),
    );
    report.checks.push(CheckRecord::info("obstruction.regular_points", r.regular_points as f64));
    report.checks.push(CheckRecord::info("obstruction.singular_points", r.singular_points as f64));
    report.checks.push(
        CheckRecord::bound("obstruction.max_norm", r.max_obstruction_norm, tol.obstruction)
            .with_witness(worst_point)
            .with_detail(format!("direction {worst_dir:?}")),
    );
    report.checks.push(CheckRecord::bound("obstruction.level_set_ii", r.max_level_set_ii, tol.level_set));
    report.checks.push(CheckRecord::bound("obstruction.level_set_identity", r.max_level_set_residual, tol.level_set_identity));
    report.checks.push(CheckRecord::bound("obstruction.r1", r.max_r1_residual, tol.r1));
    report.checks.push(CheckRecord::bound("obstruction.r2", r.max_r2_mismatch, tol.r2));
    report.checks.push(CheckRecord::info("obstruction.certificate_count", r.certificate_count as f64));
    report.certificates = r.certificates;
    report.verdict = Some(r.verdict.as_str().into());
    report.exit_code = match r.verdict {
        Verdict::Consistent => 0,
        Verdict::Violated => 2,
        Verdict::Inconclusive => 1,
    };
    report.wall_clock_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

/// Sampled sectional curvatures of `f*P`.
pub fn cmd_curvature(config: &ScenarioConfig) -> Result<RunReport> {
    let start = Instant::now();
    let s = Scenario::build(config.clone())?;
    let cfg = &s.config;
    let fd = cfg.fd();
    let pb = &s.pullback;
    let per: Vec<Result<Vec<(f64, Vector, Vector, Vector)>>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(cfg.seed, i as u64);
            let z = pb.random_point(&mut rng);
            let shape = ShapeData::at(pb, &z, &fd)?;
            let basis = range_basis(&shape.projector, pb.intrinsic_dim());
            let mut out = Vec::with_capacity(cfg.directions);
            for _ in 0..cfg.directions {
                let a = &basis * gaussian_vector(&mut rng, basis.ncols());
                let b = &basis * gaussian_vector(&mut rng, basis.ncols());
                out.push((shape.sectional_curvature(&a, &b)?, z.clone(), a, b));
            }
            Ok(out)
        })
        .collect();
    let mut values = Vec::new();
    for r in per {
        values.extend(r?);
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.0).collect();
    sorted.sort_by(f64::total_cmp);
    let quantile = |q: f64| sorted[((q * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)];
    let worst = values.iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("at least one plane");
    let table = CurvatureTable {
        count: sorted.len(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        quantiles: [0.05, 0.25, 0.5, 0.75, 0.95].iter().map(|&q| (q, quantile(q))).collect(),
        worst_point: worst.1.as_slice().to_vec(),
        worst_plane: [worst.2.as_slice().to_vec(), worst.3.as_slice().to_vec()],
    };
    let mut report = RunReport::new(cfg, "curvature");
    report.checks.push(CheckRecord::info("curvature.min", table.min).with_witness(table.worst_point.clone()));
    report.checks.push(CheckRecord::info("curvature.max", table.max));
    report.curvature = Some(table);
    report.wall_clock_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

use std::sync::Arc;

use proptest::prelude::*;
use submersion_lab::core_geometry::{random_tangent, random_unit_tangent, FiniteDiff, ManifoldRef, ShapeData};
use submersion_lab::geometries::{
    chebyshev, conjugate, multiply, trivial_bundle, DivisionAlgebra, HopfFibration, HopfFlavor, ProductManifold, Sphere, HOPF_BASE_RADIUS,
};
use submersion_lab::linalg::{gaussian_vector, rng_for, Vector};
use submersion_lab::pullback::PullbackBundle;
use submersion_lab::submersion::FiberChart;

fn flavor(i: u8) -> HopfFlavor {
    match i % 3 {
        0 => HopfFlavor::Complex,
        1 => HopfFlavor::Quaternionic,
        _ => HopfFlavor::Octonionic,
    }
}

fn algebra(i: u8) -> DivisionAlgebra {
    match i % 3 {
        0 => DivisionAlgebra::Complex,
        1 => DivisionAlgebra::Quaternion,
        _ => DivisionAlgebra::Octonion,
    }
}

fn spaces(i: u8) -> ManifoldRef {
    match i % 3 {
        0 => Arc::new(Sphere::new(3, 0.7)),
        1 => Arc::new(ProductManifold::new(Arc::new(Sphere::unit(2)), Arc::new(Sphere::new(2, 2.0)))),
        _ => Arc::new(
            PullbackBundle::new(
                HopfFibration::new(HopfFlavor::Complex).projection_map(),
                HopfFibration::new(HopfFlavor::Complex).bundle(),
            )
            .unwrap(),
        ),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projectors_are_orthogonal_idempotents(which in 0u8..3, seed in any::<u64>()) {
        let m = spaces(which);
        let x = m.random_point(&mut rng_for(seed, 0));
        let p = m.projector(&x);
        prop_assert!((&p * &p - &p).amax() < 1e-10);
        prop_assert!((&p - p.transpose()).amax() < 1e-10);
        prop_assert!((p.trace() - m.intrinsic_dim() as f64).abs() < 1e-8);
    }

    #[test]
    fn retraction_stays_on_the_manifold(which in 0u8..3, seed in any::<u64>(), scale in 0.0f64..0.3) {
        let m = spaces(which);
        let mut rng = rng_for(seed, 1);
        let x = m.random_point(&mut rng);
        let v = random_unit_tangent(m.as_ref(), &x, &mut rng) * scale;
        let y = m.retract(&x, &v);
        let q = m.retract(&y, &Vector::zeros(y.len()));
        prop_assert!((q - &y).norm() < 1e-8);
        prop_assert!((m.retract(&x, &Vector::zeros(x.len())) - &x).norm() < 1e-12);
    }

    #[test]
    fn riemann_tensor_symmetries(which in 0u8..3, seed in any::<u64>()) {
        let m = spaces(which);
        let mut rng = rng_for(seed, 2);
        let x = m.random_point(&mut rng);
        let s = ShapeData::at(m.as_ref(), &x, &FiniteDiff::default()).unwrap();
        let t: Vec<Vector> = (0..4).map(|_| random_unit_tangent(m.as_ref(), &x, &mut rng)).collect();
        let r = |a: usize, b: usize, c: usize, d: usize| s.riemann(&t[a], &t[b], &t[c], &t[d]);
        let base = r(0, 1, 2, 3);
        prop_assert!((base + r(1, 0, 2, 3)).abs() < 1e-8);
        prop_assert!((base + r(0, 1, 3, 2)).abs() < 1e-8);
        prop_assert!((base - r(2, 3, 0, 1)).abs() < 1e-8);
        prop_assert!((base + r(1, 2, 0, 3) + r(2, 0, 1, 3)).abs() < 1e-8);
    }

    #[test]
    fn normed_algebras_multiply_norms(which in 0u8..3, seed in any::<u64>()) {
        let alg = algebra(which);
        let mut rng = rng_for(seed, 3);
        let x = gaussian_vector(&mut rng, alg.dim());
        let y = gaussian_vector(&mut rng, alg.dim());
        let xy = Vector::from_vec(multiply(x.as_slice(), y.as_slice()));
        prop_assert!((xy.norm() - x.norm() * y.norm()).abs() < 1e-10 * (1.0 + x.norm() * y.norm()));
        let xbar = Vector::from_vec(conjugate(x.as_slice()));
        let xxbar = multiply(x.as_slice(), xbar.as_slice());
        prop_assert!((xxbar[0] - x.norm_squared()).abs() < 1e-10 * (1.0 + x.norm_squared()));
        prop_assert!(xxbar[1..].iter().all(|c| c.abs() < 1e-10 * (1.0 + x.norm_squared())));
    }

    #[test]
    fn hopf_fibers_cover_the_base(which in 0u8..3, seed in any::<u64>()) {
        let h = HopfFibration::new(flavor(which));
        let mut rng = rng_for(seed, 4);
        let n = h.base().random_point(&mut rng);
        prop_assert!((n.norm() - HOPF_BASE_RADIUS).abs() < 1e-12);
        let p = h.chart().fiber_point(&n).unwrap();
        prop_assert!((p.norm() - 1.0).abs() < 1e-10);
        prop_assert!((h.project(&p) - &n).norm() < 1e-10);
        let q = h.base().random_point(&mut rng);
        let moved = h.chart().fiber_project(&p, &q);
        if let Ok(moved) = moved {
            prop_assert!((h.project(&moved) - &q).norm() < 1e-8);
        }
    }

    #[test]
    fn horizontal_lifts_are_isometric(which in 0u8..3, seed in any::<u64>()) {
        let fd = FiniteDiff::default();
        let bundle = HopfFibration::new(flavor(which)).bundle();
        let mut rng = rng_for(seed, 5);
        let p = bundle.sample_point(&mut rng);
        let w = random_tangent(bundle.base.as_ref(), &bundle.project(&p), &mut rng);
        let lift = bundle.horizontal_lift(&p, &w, &fd).unwrap();
        prop_assert!((lift.norm() - w.norm()).abs() < 1e-9 * (1.0 + w.norm()));
        prop_assert!((bundle.dpi(&p, &fd) * &lift - &w).norm() < 1e-9 * (1.0 + w.norm()));
    }

    #[test]
    fn a_tensor_is_alternating_and_vertical(seed in any::<u64>()) {
        let fd = FiniteDiff::default();
        let bundle = HopfFibration::new(HopfFlavor::Quaternionic).bundle();
        let mut rng = rng_for(seed, 6);
        let p = bundle.sample_point(&mut rng);
        let x = bundle.random_horizontal_unit(&p, &mut rng, &fd);
        let y = bundle.random_horizontal_unit(&p, &mut rng, &fd);
        let axy = bundle.a_tensor(&p, &x, &y, &fd).unwrap();
        let ayx = bundle.a_tensor(&p, &y, &x, &fd).unwrap();
        prop_assert!((&axy + &ayx).norm() < 1e-8);
        prop_assert!((bundle.dpi(&p, &fd) * &axy).norm() < 1e-8);
    }

    #[test]
    fn chebyshev_matches_trigonometric_form(k in 0usize..12, theta in 0.01f64..3.13) {
        let c = theta.cos();
        let (t, _, u, _) = chebyshev(k, c);
        let kt = k as f64 * theta;
        prop_assert!((t - kt.cos()).abs() < 1e-10);
        if k > 0 {
            prop_assert!((u - kt.sin() / theta.sin()).abs() < 1e-8 * (1.0 + u.abs()));
        }
    }
}

#[test]
fn trivial_bundles_have_flat_vertizontal_planes() {
    let fd = FiniteDiff::default();
    let b = trivial_bundle(Arc::new(Sphere::unit(2)), Arc::new(Sphere::unit(2)));
    for i in 0..10 {
        let mut rng = rng_for(8, i);
        let p = b.sample_point(&mut rng);
        let x = b.random_horizontal_unit(&p, &mut rng, &fd);
        let u = b.random_vertical_unit(&p, &mut rng, &fd);
        assert!(b.vertizontal_sec(&p, &x, &u, &fd).unwrap().abs() < 1e-10);
    }
}

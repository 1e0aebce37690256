//! Scenario configuration and its translation into geometric objects.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{parse, Expr};
use crate::core_geometry::{FiniteDiff, ManifoldRef};
use crate::error::{GeometryError, Result};
use crate::geometries::{
    compose, reference_point, trivial_bundle, warped_tube_bundle, ConstantMap, Euclidean, GeodesicKFold, HopfFibration,
    HopfFlavor, IdentityMap, PerturbationDiffeo, Sphere, HOPF_BASE_RADIUS,
};
use crate::graph_geometry::MapRef;
use crate::linalg::unit_vector;
use crate::obstruction::Tolerances;
use crate::pullback::PullbackBundle;
use crate::submersion::RiemannianSubmersionBundle;

fn default_epsilon() -> f64 {
    0.1
}
fn default_samples() -> usize {
    200
}
fn default_fd_step() -> f64 {
    1e-4
}
fn default_directions() -> usize {
    20
}

/// Named tolerances; every field can be overridden in `[tolerances]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub obstruction: f64,
    pub level_set: f64,
    pub cross_term: f64,
    pub negativity: f64,
    pub r1: f64,
    pub r2: f64,
    pub rank: f64,
    pub projector: f64,
    pub riemann_symmetry: f64,
    pub normal_projection: f64,
    pub xi_inverse: f64,
    pub submersion: f64,
    pub fiber_geodesy: f64,
    pub a_dagger_duality: f64,
    pub gray_oneill: f64,
    pub membership: f64,
    pub second_fundamental_form: f64,
    pub curvature_paths: f64,
    pub reconstruction: f64,
    pub kernel_metric: f64,
    pub level_set_identity: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            obstruction: t.obstruction,
            level_set: t.level_set,
            cross_term: t.cross_term,
            negativity: t.negativity,
            r1: t.r1,
            r2: t.r2,
            rank: t.rank,
            projector: 1e-10,
            riemann_symmetry: 1e-8,
            normal_projection: 1e-8,
            xi_inverse: 1e-10,
            submersion: 1e-6,
            fiber_geodesy: 1e-6,
            a_dagger_duality: 1e-6,
            gray_oneill: 1e-4,
            membership: 1e-8,
            second_fundamental_form: 1e-4,
            curvature_paths: 1e-3,
            reconstruction: 1e-10,
            kernel_metric: 1e-12,
            level_set_identity: 1e-4,
        }
    }
}

impl ToleranceConfig {
    pub fn obstruction(&self) -> Tolerances {
        Tolerances {
            obstruction: self.obstruction,
            level_set: self.level_set,
            cross_term: self.cross_term,
            negativity: self.negativity,
            r1: self.r1,
            r2: self.r2,
            rank: self.rank,
            fiber_geodesy: self.fiber_geodesy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub bundle: String,
    pub base_map: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GeometryError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            GeometryError::Config(msg) => GeometryError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn fd(&self) -> FiniteDiff {
        FiniteDiff::with_step(self.fd_step)
    }
}

/// Geometry of a space named in an expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceSpec {
    Sphere { dim: usize, radius: f64 },
    Euclidean(usize),
}

impl SpaceSpec {
    pub fn build(self) -> ManifoldRef {
        match self {
            SpaceSpec::Sphere { dim, radius } => Arc::new(Sphere::new(dim, radius)),
            SpaceSpec::Euclidean(n) => Arc::new(Euclidean::new(n)),
        }
    }

    fn parse(e: &Expr) -> Result<Self> {
        let bad = || GeometryError::Config(format!("bundle: cannot read space `{e}`"));
        let nums: Vec<f64> = e.args().iter().map(|a| a.as_number().ok_or_else(bad)).collect::<Result<_>>()?;
        match (e.name(), nums.as_slice()) {
            (Some("sphere"), [d]) => Ok(SpaceSpec::Sphere { dim: to_usize(*d).ok_or_else(bad)?, radius: 1.0 }),
            (Some("sphere"), [d, r]) if *r > 0.0 => Ok(SpaceSpec::Sphere { dim: to_usize(*d).ok_or_else(bad)?, radius: *r }),
            (Some("euclidean"), [n]) => Ok(SpaceSpec::Euclidean(to_usize(*n).ok_or_else(bad)?)),
            _ => Err(bad()),
        }
    }
}

fn to_usize(v: f64) -> Option<usize> {
    (v >= 1.0 && v.fract() == 0.0 && v < 1e6).then_some(v as usize)
}

/// A bundle expression resolved into a submersion and its base geometry.
pub fn build_bundle(src: &str) -> Result<(RiemannianSubmersionBundle, SpaceSpec)> {
    let e = parse(src).map_err(|m| GeometryError::Config(format!("bundle: {m}")))?;
    let hopf = |flavor: HopfFlavor| {
        (HopfFibration::new(flavor).bundle(), SpaceSpec::Sphere { dim: flavor.dim(), radius: HOPF_BASE_RADIUS })
    };
    match (e.name(), e.args()) {
        (Some("hopf_complex"), []) => Ok(hopf(HopfFlavor::Complex)),
        (Some("hopf_quaternionic"), []) => Ok(hopf(HopfFlavor::Quaternionic)),
        (Some("hopf_octonionic"), []) => Ok(hopf(HopfFlavor::Octonionic)),
        (Some("trivial"), [base, fiber]) => {
            let base = SpaceSpec::parse(base)?;
            let fiber = SpaceSpec::parse(fiber)?;
            Ok((trivial_bundle(base.build(), fiber.build()), base))
        }
        (Some("warped_tube"), [slope]) => {
            let slope = slope
                .as_number()
                .ok_or_else(|| GeometryError::Config("bundle: warped_tube expects a number".into()))?;
            Ok((warped_tube_bundle(slope), SpaceSpec::Euclidean(1)))
        }
        _ => Err(GeometryError::Config(format!(
            "bundle: unknown bundle `{e}` (expected hopf_complex, hopf_quaternionic, hopf_octonionic, trivial(space, space) or warped_tube(slope))"
        ))),
    }
}

fn map_error(msg: String) -> GeometryError {
    GeometryError::Config(format!("base_map: {msg}"))
}

/// Resolves a map expression whose target is `target`. Returns the map and
/// the geometry of its source.
pub fn resolve_map(e: &Expr, target: SpaceSpec, target_ref: ManifoldRef) -> Result<(MapRef, SpaceSpec)> {
    let number = |i: usize| e.args().get(i).and_then(Expr::as_number).ok_or_else(|| map_error(format!("`{e}` expects numeric argument {}", i + 1)));
    let sphere = |what: &str| match target {
        SpaceSpec::Sphere { dim, radius } => Ok((dim, radius)),
        _ => Err(map_error(format!("`{what}` needs a sphere as target"))),
    };
    match e.name().unwrap_or_default() {
        "hopf" if e.args().is_empty() => {
            let (dim, radius) = sphere("hopf")?;
            let flavor = HopfFlavor::from_base_dim(dim)
                .filter(|_| (radius - HOPF_BASE_RADIUS).abs() < 1e-12)
                .ok_or_else(|| map_error(format!("no Hopf map onto a {dim}-sphere of radius {radius}")))?;
            let h = HopfFibration::new(flavor);
            Ok((h.projection_map(), SpaceSpec::Sphere { dim: 2 * flavor.dim() - 1, radius: 1.0 }))
        }
        "geodesic_fold" => {
            let (dim, radius) = sphere("geodesic_fold")?;
            let k = to_usize(number(0)?).ok_or_else(|| map_error("geodesic_fold expects a positive integer".into()))?;
            let source: ManifoldRef = Arc::new(Sphere::unit(dim));
            let pole = unit_vector(dim + 1, dim);
            let map = GeodesicKFold::new(source, target_ref, k, pole, radius).map_err(|err| map_error(err.to_string()))?;
            Ok((Arc::new(map), SpaceSpec::Sphere { dim, radius: 1.0 }))
        }
        "perturbed" => {
            let (dim, radius) = sphere("perturbed")?;
            let delta = number(0)?;
            let axis = number(1)?;
            let axis = to_usize(axis)
                .filter(|a| *a <= dim + 1)
                .ok_or_else(|| map_error(format!("perturbed axis must be an integer in 1..={}", dim + 1)))?;
            let map = PerturbationDiffeo::new(target_ref, radius, delta, unit_vector(dim + 1, axis - 1))
                .map_err(|err| map_error(err.to_string()))?;
            Ok((Arc::new(map), target))
        }
        "identity" if e.args().is_empty() => Ok((Arc::new(IdentityMap::new(target_ref)), target)),
        "constant" => {
            let source = match e.args() {
                [] => target,
                [s] => SpaceSpec::parse(s).map_err(|_| map_error(format!("cannot read source space in `{e}`")))?,
                _ => return Err(map_error("constant takes at most one argument".into())),
            };
            let value = reference_point(target_ref.as_ref());
            Ok((Arc::new(ConstantMap::new(source.build(), target_ref, value)), source))
        }
        "compose" => {
            let [outer, inner] = e.args() else {
                return Err(map_error("compose expects two maps".into()));
            };
            let (outer_map, mid) = resolve_map(outer, target, target_ref)?;
            let (inner_map, source) = resolve_map(inner, mid, outer_map.source().clone())?;
            Ok((compose(outer_map, inner_map).map_err(|err| map_error(err.to_string()))?, source))
        }
        _ => Err(map_error(format!(
            "unknown map `{e}` (expected hopf, geodesic_fold(k), perturbed(delta, axis), identity, constant or compose(f, g))"
        ))),
    }
}

/// A configured pull-back bundle ready for evaluation.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub pullback: PullbackBundle,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        if !(config.fd_step > 0.0) {
            return Err(GeometryError::Config(format!("fd_step: must be positive, got {}", config.fd_step)));
        }
        if !(config.epsilon > 0.0) {
            return Err(GeometryError::Config(format!("epsilon: must be positive, got {}", config.epsilon)));
        }
        if config.samples == 0 || config.directions == 0 {
            return Err(GeometryError::Config("samples and directions must be positive".into()));
        }
        let (bundle, base) = build_bundle(&config.bundle)?;
        let e = parse(&config.base_map).map_err(map_error)?;
        let (map, _) = resolve_map(&e, base, bundle.base.clone())?;
        let pullback = PullbackBundle::new(map, bundle).map_err(|err| map_error(err.to_string()))?.with_fd(config.fd());
        Ok(Self { config, pullback })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_geometry::Manifold;

    fn config(bundle: &str, map: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(&format!("name = \"t\"\nbundle = \"{bundle}\"\nbase_map = \"{map}\"\n")).unwrap()
    }

    #[test]
    fn defaults_and_overrides() {
        let c = ScenarioConfig::from_toml("name = \"a\"\nbundle = \"hopf_complex\"\nbase_map = \"hopf\"\n[tolerances]\nr1 = 0.5\n").unwrap();
        assert_eq!((c.samples, c.directions, c.seed, c.fd_step, c.epsilon), (200, 20, 0, 1e-4, 0.1));
        assert_eq!(c.tolerances.r1, 0.5);
        assert_eq!(c.tolerances.r2, 1e-3);
    }

    #[test]
    fn config_errors_name_the_field() {
        let err = ScenarioConfig::from_toml("name = \"a\"\nbundle = \"hopf_complex\"\nbase_map = \"hopf\"\nsamples = \"many\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("samples") && err.contains("line 4"), "{err}");
        let err = ScenarioConfig::from_toml("name = \"a\"\nbundle = \"x\"\n").unwrap_err().to_string();
        assert!(err.contains("base_map"), "{err}");
        let err = ScenarioConfig::from_toml("name = \"a\"\nbundle = \"x\"\nbase_map = \"y\"\nextra = 1\n").unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn builds_scenarios() {
        let s = Scenario::build(config("hopf_complex", "compose(hopf, perturbed(0.3, 1))")).unwrap();
        assert_eq!(s.pullback.intrinsic_dim(), 4);
        let s = Scenario::build(config("hopf_quaternionic", "hopf")).unwrap();
        assert_eq!(s.pullback.ambient_dim(), 16);
        let s = Scenario::build(config("hopf_complex", "geodesic_fold(2)")).unwrap();
        assert_eq!(s.pullback.intrinsic_dim(), 3);
        let s = Scenario::build(config("trivial(sphere(2, 0.5), sphere(1, 1))", "constant(sphere(3, 1))")).unwrap();
        assert_eq!(s.pullback.intrinsic_dim(), 4);
        let s = Scenario::build(config("trivial(euclidean(2), euclidean(1))", "identity")).unwrap();
        assert_eq!(s.pullback.intrinsic_dim(), 3);
        let s = Scenario::build(config("warped_tube(0.5)", "identity")).unwrap();
        assert_eq!(s.pullback.intrinsic_dim(), 2);
        let s = Scenario::build(config("hopf_complex", "compose(geodesic_fold(2), compose(geodesic_fold(3), perturbed(0.2, 2)))")).unwrap();
        assert_eq!(s.pullback.base().ambient_dim(), 3);
    }

    #[test]
    fn rejects_bad_expressions() {
        for (b, m) in [
            ("hopf_complex", "hopf(1)"),
            ("hopf_complex", "perturbed(1.5, 1)"),
            ("hopf_complex", "perturbed(0.3, 7)"),
            ("trivial(euclidean(2), euclidean(1))", "hopf"),
            ("hopf_sedenion", "hopf"),
            ("hopf_complex", "compose(hopf)"),
        ] {
            let err = Scenario::build(config(b, m)).unwrap_err().to_string();
            assert!(err.contains("base_map") || err.contains("bundle"), "{err}");
        }
    }
}

//! Scenario files: a seeded recipe for a random scene plus the controller
//! configuration to run on it.
//!
//! A scenario does not store landmark coordinates. It stores the seed and
//! the sampling regions, and `build_scenario` redraws the same scene
//! bit-for-bit every time: landmarks uniform in `region`, home uniform in
//! `home_region`, redrawn (up to 100 attempts) until the scene validates.
//! Starts are either listed explicitly or realized as a grid spanning the
//! region at fractions 0.1 .. 0.9 per axis, so `{"grid": [3, 3]}` gives
//! the nine-point layout the simulation studies use.
//!
//! The schema is versioned and strict: `format` must be
//! "homing-scenario/1" and unknown fields are rejected. `params` is one
//! flat object holding integrator settings and, for the unicycle, the
//! sliding gains. Scenario builds default `boundary_layer` to 0.02 rad
//! (the library default is 0, pure switching); a scenario that wants pure
//! switching says so explicitly.

use nalgebra::SVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::HomingError;
use crate::geometry::{AxisBox, Point, Scene, MIN_LANDMARK_DISTANCE};
use crate::holonomic::IntegratorParams;
use crate::reshaping::{from_tag, Reshaping};
use crate::unicycle::UnicycleParams;

pub const SCENARIO_FORMAT: &str = "homing-scenario/1";
/// Generator identifier recorded in artifacts; scenario reproduction
/// depends on the exact algorithm, not just the seed.
pub const RNG_ALGORITHM: &str = "chacha12";
const GENERATION_ATTEMPTS: usize = 100;
/// Scenario-level default for the sliding boundary layer, in radians.
pub const SCENARIO_BOUNDARY_LAYER: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Holonomic,
    Unicycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartsSpec {
    Grid { grid: Vec<usize> },
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub format: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_landmarks")]
    pub n_landmarks: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Landmark sampling box; default unit square (cube).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    /// Home sampling box; default the lower-left quadrant (octant) of the
    /// unit region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_region: Option<RegionSpec>,
    #[serde(default = "default_reshaping")]
    pub reshaping: String,
    #[serde(default = "default_controller")]
    pub controller: ControllerKind,
    /// Flat object: integrator fields, plus sliding gains for the
    /// unicycle. Unknown keys are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<StartsSpec>,
    /// Initial headings in radians, unicycle only; default four compass
    /// directions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headings: Option<Vec<f64>>,
}

fn default_n_landmarks() -> usize {
    10
}
fn default_dim() -> usize {
    2
}
fn default_reshaping() -> String {
    "cosine".into()
}
fn default_controller() -> ControllerKind {
    ControllerKind::Holonomic
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            format: SCENARIO_FORMAT.into(),
            seed: 0,
            n_landmarks: default_n_landmarks(),
            dim: default_dim(),
            region: None,
            home_region: None,
            reshaping: default_reshaping(),
            controller: default_controller(),
            params: None,
            starts: None,
            headings: None,
        }
    }
}

const INTEGRATOR_KEYS: [&str; 6] = [
    "dt",
    "t_max",
    "stop_grad_norm",
    "stop_dist",
    "method",
    "record_every",
];
const SLIDING_KEYS: [&str; 7] = [
    "rho",
    "k_theta",
    "k_nu",
    "nu_max",
    "omega_max",
    "g_stop",
    "boundary_layer",
];

/// Split the flat params object into integrator settings and, for the
/// unicycle, sliding gains. Keys outside the two vocabularies fail.
fn split_params(
    params: &Option<Value>,
    controller: ControllerKind,
) -> Result<(IntegratorParams, Option<UnicycleParams>), HomingError> {
    let mut integ_map = serde_json::Map::new();
    let mut sliding_map = serde_json::Map::new();
    if let Some(value) = params {
        let map = value.as_object().ok_or_else(|| {
            HomingError::Validation("params must be a JSON object".into())
        })?;
        for (key, v) in map {
            if INTEGRATOR_KEYS.contains(&key.as_str()) {
                integ_map.insert(key.clone(), v.clone());
            } else if SLIDING_KEYS.contains(&key.as_str()) {
                if controller != ControllerKind::Unicycle {
                    return Err(HomingError::Validation(format!(
                        "param `{key}` only applies to the unicycle controller"
                    )));
                }
                sliding_map.insert(key.clone(), v.clone());
            } else {
                return Err(HomingError::Validation(format!("unknown param `{key}`")));
            }
        }
    }
    let integ: IntegratorParams = serde_json::from_value(Value::Object(integ_map))?;
    integ.validate()?;
    let sliding = match controller {
        ControllerKind::Holonomic => None,
        ControllerKind::Unicycle => {
            sliding_map
                .entry("boundary_layer")
                .or_insert(SCENARIO_BOUNDARY_LAYER.into());
            let p: UnicycleParams = serde_json::from_value(Value::Object(sliding_map))?;
            p.validate()?;
            Some(p)
        }
    };
    Ok((integ, sliding))
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), HomingError> {
        if self.format != SCENARIO_FORMAT {
            return Err(HomingError::Validation(format!(
                "unsupported scenario format {:?}, expected {SCENARIO_FORMAT:?}",
                self.format
            )));
        }
        if self.n_landmarks < 2 {
            return Err(HomingError::Validation(
                "n_landmarks must be at least 2".into(),
            ));
        }
        if self.dim != 2 && self.dim != 3 {
            return Err(HomingError::Validation("dim must be 2 or 3".into()));
        }
        if from_tag(&self.reshaping).is_none() {
            return Err(HomingError::Validation(format!(
                "unknown reshaping {:?}",
                self.reshaping
            )));
        }
        match self.controller {
            ControllerKind::Unicycle => {
                if self.dim != 2 {
                    return Err(HomingError::Validation(
                        "the unicycle controller is planar; dim must be 2".into(),
                    ));
                }
                if matches!(&self.headings, Some(h) if h.is_empty()) {
                    return Err(HomingError::Validation(
                        "headings must not be empty for the unicycle".into(),
                    ));
                }
            }
            ControllerKind::Holonomic => {
                if self.headings.is_some() {
                    return Err(HomingError::Validation(
                        "headings only apply to the unicycle controller".into(),
                    ));
                }
            }
        }
        split_params(&self.params, self.controller)?;
        Ok(())
    }
}

/// A scenario realized into concrete geometry and run settings.
#[derive(Debug, Clone)]
pub struct ScenarioRealization<const D: usize> {
    pub scene: Scene<D>,
    pub starts: Vec<Point<D>>,
    /// Empty for the holonomic controller.
    pub headings: Vec<f64>,
    pub rf: &'static dyn Reshaping,
    pub integ: IntegratorParams,
    pub unicycle: Option<UnicycleParams>,
}

#[derive(Debug, Clone)]
pub enum BuiltScenario {
    D2(ScenarioRealization<2>),
    D3(ScenarioRealization<3>),
}

fn region_box<const D: usize>(
    spec: &Option<RegionSpec>,
    default: AxisBox<D>,
    what: &str,
) -> Result<AxisBox<D>, HomingError> {
    match spec {
        None => Ok(default),
        Some(r) => {
            let min = point_from_slice::<D>(&r.min, what)?;
            let max = point_from_slice::<D>(&r.max, what)?;
            AxisBox::new(min, max)
        }
    }
}

fn point_from_slice<const D: usize>(v: &[f64], what: &str) -> Result<Point<D>, HomingError> {
    if v.len() != D {
        return Err(HomingError::Validation(format!(
            "{what}: expected {D} coordinates, got {}",
            v.len()
        )));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(HomingError::Validation(format!(
            "{what}: coordinates must be finite"
        )));
    }
    let mut p = Point::<D>::zeros();
    for (k, c) in v.iter().enumerate() {
        p[k] = *c;
    }
    Ok(p)
}

fn uniform_point<const D: usize, G: Rng>(rng: &mut G, region: &AxisBox<D>) -> Point<D> {
    let mut p = Point::<D>::zeros();
    // fixed per-axis draw order, part of the reproducibility contract
    for k in 0..D {
        p[k] = rng.gen_range(region.min[k]..region.max[k]);
    }
    p
}

fn pairwise_separated<const D: usize>(landmarks: &[Point<D>]) -> bool {
    for (i, a) in landmarks.iter().enumerate() {
        for b in &landmarks[i + 1..] {
            if (a - b).norm() <= MIN_LANDMARK_DISTANCE {
                return false;
            }
        }
    }
    true
}

/// Draw a scene from the seeded generator, redrawing on degenerate
/// geometry. The draw order (landmarks axis by axis, then home) is fixed.
pub fn generate_scene<const D: usize, G: Rng>(
    rng: &mut G,
    n_landmarks: usize,
    region: &AxisBox<D>,
    home_region: &AxisBox<D>,
) -> Result<Scene<D>, HomingError> {
    let mut reason = String::new();
    for _ in 0..GENERATION_ATTEMPTS {
        let landmarks: Vec<Point<D>> = (0..n_landmarks)
            .map(|_| uniform_point(rng, region))
            .collect();
        let home = uniform_point(rng, home_region);
        if !pairwise_separated(&landmarks) {
            reason = "landmarks too close together".into();
            continue;
        }
        match Scene::new(landmarks, home) {
            Ok(scene) => return Ok(scene),
            Err(e) => reason = e.to_string(),
        }
    }
    Err(HomingError::DegenerateScenario {
        attempts: GENERATION_ATTEMPTS,
        reason,
    })
}

fn grid_fraction(n: usize, k: usize) -> f64 {
    if n == 1 {
        0.5
    } else {
        0.1 + 0.8 * k as f64 / (n - 1) as f64
    }
}

fn grid_points<const D: usize>(
    region: &AxisBox<D>,
    counts: &[usize],
) -> Result<Vec<Point<D>>, HomingError> {
    if counts.len() != D {
        return Err(HomingError::Validation(format!(
            "grid spec needs {D} counts, got {}",
            counts.len()
        )));
    }
    if counts.iter().any(|n| *n == 0) {
        return Err(HomingError::Validation("grid counts must be positive".into()));
    }
    let total: usize = counts.iter().product();
    let mut points = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut p = Point::<D>::zeros();
        // lexicographic, axis 0 slowest: the run order is part of the
        // deterministic export contract
        for axis in 0..D {
            let stride: usize = counts[axis + 1..].iter().product();
            let k = rem / stride;
            rem %= stride;
            p[axis] =
                region.min[axis] + grid_fraction(counts[axis], k) * (region.max[axis] - region.min[axis]);
        }
        points.push(p);
    }
    Ok(points)
}

pub const DEFAULT_HEADINGS: [f64; 4] = [
    0.0,
    std::f64::consts::FRAC_PI_2,
    std::f64::consts::PI,
    -std::f64::consts::FRAC_PI_2,
];

fn realize<const D: usize>(spec: &ScenarioSpec) -> Result<ScenarioRealization<D>, HomingError> {
    let unit = AxisBox::new(Point::<D>::zeros(), SVector::repeat(1.0)).unwrap();
    let quadrant = AxisBox::new(Point::<D>::zeros(), SVector::repeat(0.5)).unwrap();
    let region = region_box(&spec.region, unit, "region")?;
    let home_region = region_box(&spec.home_region, quadrant, "home_region")?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let scene = generate_scene(&mut rng, spec.n_landmarks, &region, &home_region)?;
    let starts = match &spec.starts {
        None => grid_points(&region, &[3; D])?,
        Some(StartsSpec::Grid { grid }) => grid_points(&region, grid)?,
        Some(StartsSpec::Explicit(list)) => list
            .iter()
            .map(|p| point_from_slice::<D>(p, "start"))
            .collect::<Result<_, _>>()?,
    };
    let headings = match spec.controller {
        ControllerKind::Holonomic => Vec::new(),
        ControllerKind::Unicycle => spec
            .headings
            .clone()
            .unwrap_or_else(|| DEFAULT_HEADINGS.to_vec()),
    };
    let (integ, unicycle) = split_params(&spec.params, spec.controller)?;
    let rf = from_tag(&spec.reshaping)
        .ok_or_else(|| HomingError::Validation(format!("unknown reshaping {:?}", spec.reshaping)))?;
    Ok(ScenarioRealization {
        scene,
        starts,
        headings,
        rf,
        integ,
        unicycle,
    })
}

pub fn build_scenario(spec: &ScenarioSpec) -> Result<BuiltScenario, HomingError> {
    spec.validate()?;
    match spec.dim {
        2 => Ok(BuiltScenario::D2(realize::<2>(spec)?)),
        3 => Ok(BuiltScenario::D3(realize::<3>(spec)?)),
        _ => unreachable!("validate checked dim"),
    }
}

pub fn parse_spec(json: &str) -> Result<ScenarioSpec, HomingError> {
    let spec: ScenarioSpec = serde_json::from_str(json)?;
    Ok(spec)
}

pub fn read_spec(path: &std::path::Path) -> Result<ScenarioSpec, HomingError> {
    parse_spec(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn minimal(extra: &str) -> String {
        format!("{{\"format\": \"homing-scenario/1\"{extra}}}")
    }

    #[test]
    fn defaults_fill_a_minimal_spec() {
        let spec = parse_spec(&minimal("")).unwrap();
        assert_eq!(spec, ScenarioSpec::default());
        let built = build_scenario(&spec).unwrap();
        match built {
            BuiltScenario::D2(r) => {
                assert_eq!(r.scene.len(), 10);
                assert_eq!(r.starts.len(), 9);
                assert!(r.headings.is_empty());
                assert!(r.unicycle.is_none());
                // home in the lower-left quadrant
                assert!(r.scene.home().iter().all(|c| (0.0..0.5).contains(c)));
                assert_relative_eq!(r.starts[0], Point::<2>::new(0.1, 0.1));
                assert_relative_eq!(r.starts[8], Point::<2>::new(0.9, 0.9));
                // axis 0 slowest
                assert_relative_eq!(r.starts[1], Point::<2>::new(0.1, 0.5));
            }
            BuiltScenario::D3(_) => panic!("expected a planar build"),
        }
    }

    #[test]
    fn same_seed_rebuilds_the_same_scene_bit_for_bit() {
        let spec = ScenarioSpec {
            seed: 42,
            ..ScenarioSpec::default()
        };
        let (a, b) = (build_scenario(&spec).unwrap(), build_scenario(&spec).unwrap());
        match (a, b) {
            (BuiltScenario::D2(a), BuiltScenario::D2(b)) => {
                assert_eq!(a.scene.landmarks(), b.scene.landmarks());
                assert_eq!(a.scene.home(), b.scene.home());
                assert_eq!(a.starts, b.starts);
            }
            _ => panic!("expected planar builds"),
        }

        let other = ScenarioSpec {
            seed: 43,
            ..ScenarioSpec::default()
        };
        match (build_scenario(&spec).unwrap(), build_scenario(&other).unwrap()) {
            (BuiltScenario::D2(a), BuiltScenario::D2(b)) => {
                assert_ne!(a.scene.landmarks(), b.scene.landmarks());
            }
            _ => panic!("expected planar builds"),
        }
    }

    #[test]
    fn rejects_bad_specs() {
        // unknown top-level field
        assert!(parse_spec(&minimal(", \"tmax\": 3")).is_err());
        // wrong format tag
        assert!(parse_spec("{\"format\": \"homing-scenario/2\"}")
            .unwrap()
            .validate()
            .is_err());
        // too few landmarks
        let spec = parse_spec(&minimal(", \"n_landmarks\": 1")).unwrap();
        assert!(matches!(spec.validate(), Err(HomingError::Validation(_))));
        // sliding gain on the holonomic controller
        let spec = parse_spec(&minimal(", \"params\": {\"rho\": 10.0}")).unwrap();
        assert!(spec.validate().is_err());
        // unknown param key
        let spec = parse_spec(&minimal(", \"params\": {\"step\": 0.1}")).unwrap();
        assert!(spec.validate().is_err());
        // headings on the holonomic controller
        let spec = parse_spec(&minimal(", \"headings\": [0.0]")).unwrap();
        assert!(spec.validate().is_err());
        // unicycle in 3d
        let spec =
            parse_spec(&minimal(", \"controller\": \"unicycle\", \"dim\": 3")).unwrap();
        assert!(spec.validate().is_err());
        // bad reshaping tag
        let spec = parse_spec(&minimal(", \"reshaping\": \"linear\"")).unwrap();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn params_split_and_scenario_boundary_layer_default() {
        let spec = parse_spec(&minimal(
            ", \"controller\": \"unicycle\", \"params\": {\"dt\": 0.002, \"rho\": 10.0}",
        ))
        .unwrap();
        let built = build_scenario(&spec).unwrap();
        match built {
            BuiltScenario::D2(r) => {
                assert_eq!(r.integ.dt, 0.002);
                let u = r.unicycle.unwrap();
                assert_eq!(u.rho, 10.0);
                assert_eq!(u.boundary_layer, SCENARIO_BOUNDARY_LAYER);
                assert_eq!(r.headings, DEFAULT_HEADINGS.to_vec());
            }
            BuiltScenario::D3(_) => panic!("expected a planar build"),
        }

        // explicit boundary_layer wins over the scenario default
        let spec = parse_spec(&minimal(
            ", \"controller\": \"unicycle\", \"params\": {\"boundary_layer\": 0.0}",
        ))
        .unwrap();
        match build_scenario(&spec).unwrap() {
            BuiltScenario::D2(r) => assert_eq!(r.unicycle.unwrap().boundary_layer, 0.0),
            BuiltScenario::D3(_) => panic!("expected a planar build"),
        }
    }

    #[test]
    fn explicit_starts_and_custom_regions() {
        let spec = parse_spec(&minimal(
            ", \"region\": {\"min\": [-1.0, -1.0], \"max\": [1.0, 1.0]}, \
              \"home_region\": {\"min\": [-0.2, -0.2], \"max\": [0.2, 0.2]}, \
              \"starts\": [[0.5, 0.5], [-0.5, 0.25]]",
        ))
        .unwrap();
        match build_scenario(&spec).unwrap() {
            BuiltScenario::D2(r) => {
                assert_eq!(r.starts.len(), 2);
                assert_relative_eq!(r.starts[1], Point::<2>::new(-0.5, 0.25));
                assert!(r
                    .scene
                    .landmarks()
                    .iter()
                    .all(|l| l.amax() <= 1.0));
                assert!(r.scene.home().amax() <= 0.2);
            }
            BuiltScenario::D3(_) => panic!("expected a planar build"),
        }

        // empty explicit starts: a valid scenario with nothing to run
        let spec = parse_spec(&minimal(", \"starts\": []")).unwrap();
        match build_scenario(&spec).unwrap() {
            BuiltScenario::D2(r) => assert!(r.starts.is_empty()),
            BuiltScenario::D3(_) => panic!("expected a planar build"),
        }
    }

    #[test]
    fn three_dimensional_build() {
        let spec = parse_spec(&minimal(", \"dim\": 3, \"n_landmarks\": 6")).unwrap();
        match build_scenario(&spec).unwrap() {
            BuiltScenario::D3(r) => {
                assert_eq!(r.scene.len(), 6);
                assert_eq!(r.starts.len(), 27);
            }
            BuiltScenario::D2(_) => panic!("expected a 3d build"),
        }
    }

    #[test]
    fn grid_spec_shapes() {
        let region = AxisBox::new(Point::<2>::zeros(), Point::<2>::new(2.0, 4.0)).unwrap();
        let pts = grid_points(&region, &[2, 3]).unwrap();
        assert_eq!(pts.len(), 6);
        assert_relative_eq!(pts[0], Point::<2>::new(0.2, 0.4));
        assert_relative_eq!(pts[5], Point::<2>::new(1.8, 3.6));
        assert!(grid_points(&region, &[3]).is_err());
        assert!(grid_points(&region, &[0, 3]).is_err());
    }
}

//! Scene geometry: positions, bearing vectors, ranges, projectors, and the
//! non-degeneracy test every controller relies on.
//!
//! A scene is a list of landmark positions plus the home (goal) position.
//! Controllers never read positions directly; they act on unit bearing
//! vectors measured at the current pose and remembered at home. Dimension is
//! a const generic with `D` either 2 or 3.

use nalgebra::{SMatrix, SVector, Unit};

use crate::error::HomingError;

/// Position in meters, `D` in {2, 3}.
pub type Point<const D: usize> = SVector<f64, D>;

/// Unit bearing vector; `nalgebra::Unit` maintains the norm invariant.
pub type UnitVector<const D: usize> = Unit<SVector<f64, D>>;

/// Below this robot-to-landmark distance bearings are undefined and
/// operations fail instead of returning garbage.
pub const MIN_LANDMARK_DISTANCE: f64 = 1e-9;

/// Threshold on the pairwise Gram determinant 1 - (b_i . b_j)^2 used by the
/// collinearity test.
pub const COLLINEARITY_EPS: f64 = 1e-9;

/// Inner product of two unit vectors, clamped to [-1, 1]. Floating-point dot
/// products of unit vectors can exceed 1 by ~1e-16, which would poison acos.
pub fn cosine_alignment<const D: usize>(a: &UnitVector<D>, b: &UnitVector<D>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0)
}

/// Distance from `x` to `landmark`.
pub fn range<const D: usize>(x: &Point<D>, landmark: &Point<D>) -> f64 {
    (landmark - x).norm()
}

/// Unit vector pointing from `x` toward `landmark`.
pub fn bearing<const D: usize>(
    x: &Point<D>,
    landmark: &Point<D>,
) -> Result<UnitVector<D>, HomingError> {
    let offset = landmark - x;
    let distance = offset.norm();
    if !(distance > MIN_LANDMARK_DISTANCE) {
        return Err(HomingError::LandmarkCollision {
            index: 0,
            distance,
            min_distance: MIN_LANDMARK_DISTANCE,
        });
    }
    Ok(Unit::new_unchecked(offset / distance))
}

/// Projector onto the subspace orthogonal to `v`: P = I - v v^T.
pub fn orthogonal_projector<const D: usize>(v: &UnitVector<D>) -> SMatrix<f64, D, D> {
    SMatrix::<f64, D, D>::identity() - v.as_ref() * v.as_ref().transpose()
}

/// True when the bearings seen from `home` determine `home` uniquely: at
/// least two landmarks whose home bearings are not all collinear.
pub fn check_nondegenerate<const D: usize>(landmarks: &[Point<D>], home: &Point<D>) -> bool {
    if landmarks.len() < 2 {
        return false;
    }
    let mut bearings = Vec::with_capacity(landmarks.len());
    for landmark in landmarks {
        match bearing(home, landmark) {
            Ok(b) => bearings.push(b),
            Err(_) => return false,
        }
    }
    for i in 0..bearings.len() {
        for j in (i + 1)..bearings.len() {
            let c = cosine_alignment(&bearings[i], &bearings[j]);
            if 1.0 - c * c > COLLINEARITY_EPS {
                return true;
            }
        }
    }
    false
}

/// Bearings index-aligned with the landmark list they were measured from.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingSet<const D: usize> {
    bearings: Vec<UnitVector<D>>,
}

impl<const D: usize> BearingSet<D> {
    pub fn new(bearings: Vec<UnitVector<D>>) -> Self {
        Self { bearings }
    }

    pub fn len(&self) -> usize {
        self.bearings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bearings.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, UnitVector<D>> {
        self.bearings.iter()
    }

    pub fn as_slice(&self) -> &[UnitVector<D>] {
        &self.bearings
    }
}

impl<const D: usize> std::ops::Index<usize> for BearingSet<D> {
    type Output = UnitVector<D>;

    fn index(&self, i: usize) -> &UnitVector<D> {
        &self.bearings[i]
    }
}

/// Landmark positions plus the home position. Construction validates the
/// invariants every controller assumes: N >= 2, finite coordinates, all
/// landmarks separated from home, and a non-degenerate bearing geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene<const D: usize> {
    landmarks: Vec<Point<D>>,
    home: Point<D>,
}

impl<const D: usize> Scene<D> {
    pub fn new(landmarks: Vec<Point<D>>, home: Point<D>) -> Result<Self, HomingError> {
        if landmarks.len() < 2 {
            return Err(HomingError::Validation(format!(
                "scene needs at least 2 landmarks, got {}",
                landmarks.len()
            )));
        }
        if !home.iter().all(|v| v.is_finite()) {
            return Err(HomingError::Validation("home has non-finite coordinates".into()));
        }
        for (i, landmark) in landmarks.iter().enumerate() {
            if !landmark.iter().all(|v| v.is_finite()) {
                return Err(HomingError::Validation(format!(
                    "landmark {i} has non-finite coordinates"
                )));
            }
            let d = range(&home, landmark);
            if !(d > MIN_LANDMARK_DISTANCE) {
                return Err(HomingError::LandmarkCollision {
                    index: i,
                    distance: d,
                    min_distance: MIN_LANDMARK_DISTANCE,
                });
            }
        }
        if !check_nondegenerate(&landmarks, &home) {
            return Err(HomingError::Validation(
                "degenerate scene: home bearings are collinear, home is not uniquely determined"
                    .into(),
            ));
        }
        Ok(Self { landmarks, home })
    }

    pub fn landmarks(&self) -> &[Point<D>] {
        &self.landmarks
    }

    pub fn home(&self) -> &Point<D> {
        &self.home
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn dim(&self) -> usize {
        D
    }

    /// Bearings of every landmark as seen from home.
    pub fn home_bearings(&self) -> BearingSet<D> {
        // Separation was validated at construction, so this cannot fail.
        bearings_from(&self.landmarks, &self.home).expect("scene invariant")
    }

    /// Bearings of every landmark as seen from `x`.
    pub fn bearings_at(&self, x: &Point<D>) -> Result<BearingSet<D>, HomingError> {
        bearings_from(&self.landmarks, x)
    }

    /// Distances from `x` to every landmark.
    pub fn ranges_at(&self, x: &Point<D>) -> Vec<f64> {
        self.landmarks.iter().map(|l| range(x, l)).collect()
    }

    /// Largest pairwise distance among landmarks and home; the natural
    /// length scale of the scene.
    pub fn extent(&self) -> f64 {
        let mut points: Vec<&Point<D>> = self.landmarks.iter().collect();
        points.push(&self.home);
        let mut extent = 0.0_f64;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                extent = extent.max((points[i] - points[j]).norm());
            }
        }
        extent
    }
}

/// Bearings of every landmark as seen from `x`, with the landmark index
/// recorded on failure.
pub fn bearings_from<const D: usize>(
    landmarks: &[Point<D>],
    x: &Point<D>,
) -> Result<BearingSet<D>, HomingError> {
    let mut bearings = Vec::with_capacity(landmarks.len());
    for (i, landmark) in landmarks.iter().enumerate() {
        let b = bearing(x, landmark).map_err(|e| match e {
            HomingError::LandmarkCollision {
                distance,
                min_distance,
                ..
            } => HomingError::LandmarkCollision {
                index: i,
                distance,
                min_distance,
            },
            other => other,
        })?;
        bearings.push(b);
    }
    Ok(BearingSet::new(bearings))
}

/// Axis-aligned box used for sampling regions and heat-map extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBox<const D: usize> {
    pub min: Point<D>,
    pub max: Point<D>,
}

impl<const D: usize> AxisBox<D> {
    pub fn new(min: Point<D>, max: Point<D>) -> Result<Self, HomingError> {
        let finite = min.iter().chain(max.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(HomingError::Validation("box bounds must be finite".into()));
        }
        if (0..D).any(|k| min[k] >= max[k]) {
            return Err(HomingError::Validation(format!(
                "box min {min:?} must be strictly below max {max:?} on every axis"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn contains(&self, p: &Point<D>) -> bool {
        (0..D).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

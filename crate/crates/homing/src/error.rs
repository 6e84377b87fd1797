//! Crate-wide error type.

use thiserror::Error;

/// Failures surfaced by geometry, controllers, sensitivity, and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomingError {
    /// Evaluation point coincides with a landmark; bearings are undefined there.
    #[error("position within {min_distance:e} m of landmark {index} (distance {distance:e} m)")]
    LandmarkCollision {
        index: usize,
        distance: f64,
        min_distance: f64,
    },

    /// Cosine input outside [-1, 1] by more than the clamp tolerance.
    #[error("cosine alignment {value} lies outside [-1, 1]")]
    DomainError { value: f64 },

    /// Gradient magnitude too small to define a heading or coupling terms.
    #[error("gradient magnitude {magnitude:e} too small to define a direction")]
    DegenerateGradient { magnitude: f64 },

    /// Sensitivity Jacobian is singular or numerically close to singular.
    #[error("sensitivity Jacobian not invertible (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },

    /// A descent run failed to converge.
    #[error("descent did not converge: {context}")]
    NonConvergence { context: String },

    /// Scenario generation exhausted its retry budget.
    #[error("no valid scene after {attempts} attempts: {reason}")]
    DegenerateScenario { attempts: usize, reason: String },

    /// Invalid scene, scenario, or parameter input.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("json error: {0}")]
    Json(String),
}

impl From<std::io::Error> for HomingError {
    fn from(err: std::io::Error) -> Self {
        HomingError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for HomingError {
    fn from(err: serde_json::Error) -> Self {
        HomingError::Json(err.to_string())
    }
}

//! Bearing-only visual homing: steer a robot back to a home pose using
//! nothing but unit directions to known landmarks, as seen now and as they
//! were stored at home.
//!
//! The central object is the cost phi(x) = sum_i d_i * f(beta_gi . beta_i),
//! whose gradient is computable from bearings alone even though the cost
//! itself needs ranges. [`cost::gradient`] is that control law;
//! [`holonomic`] integrates it directly and [`unicycle`] tracks its
//! direction with a sliding-mode heading law. [`sensitivity`] propagates
//! stored-bearing noise to the home equilibrium, [`scenario`] and
//! [`experiment`] reproduce seeded randomized studies, and [`verify`]
//! audits the analytic derivatives against finite differences.
//!
//! ```
//! use homing::{integrate_gradient_flow, Cosine, IntegratorParams, Scene};
//! use nalgebra::Vector2;
//!
//! let scene = Scene::new(
//!     vec![
//!         Vector2::new(0.0, 0.0),
//!         Vector2::new(1.0, 0.2),
//!         Vector2::new(0.4, 1.0),
//!     ],
//!     Vector2::new(0.3, 0.4),
//! )?;
//! let traj = integrate_gradient_flow(
//!     &scene,
//!     &Vector2::new(0.9, 0.9),
//!     &Cosine,
//!     &IntegratorParams::default(),
//! )?;
//! assert!((traj.final_sample().x - scene.home()).norm() < 1e-3);
//! # Ok::<(), homing::HomingError>(())
//! ```

pub mod cost;
pub mod error;
pub mod experiment;
pub mod export;
pub mod geometry;
pub mod holonomic;
pub mod reshaping;
pub mod scenario;
pub mod sensitivity;
pub mod unicycle;
pub mod verify;

pub use cost::{cost, gradient, gradient_alternate, gradient_differential};
pub use error::HomingError;
pub use geometry::{AxisBox, BearingSet, Point, Scene, UnitVector};
pub use holonomic::{
    control, integrate_flow, integrate_gradient_flow, IntegratorParams, Method, Termination,
    Trajectory,
};
pub use reshaping::{from_tag, AngleSquared, Cosine, Reshaping};
pub use scenario::{build_scenario, BuiltScenario, ControllerKind, ScenarioSpec};
pub use sensitivity::{
    monte_carlo_home_scatter, sensitivity_at, sensitivity_heatmap, MonteCarloParams, NoiseModel,
};
pub use unicycle::{command, simulate_unicycle, UnicycleParams, UnicycleTrajectory};

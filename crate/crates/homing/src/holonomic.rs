//! Gradient-descent control for the single-integrator robot and the closed
//! loop gradient-flow simulation.
//!
//! The control is u = -grad phi, computable from bearings alone. The
//! simulator integrates it with a fixed step (euler or rk4) and records the
//! cost and gradient norm alongside each sample.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::cost::gradient;
use crate::error::HomingError;
use crate::geometry::{bearings_from, cosine_alignment, range, BearingSet, Point, Scene};
use crate::reshaping::Reshaping;

/// Fixed-step integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Rk4,
}

/// Why a simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Gradient norm fell below the stop threshold.
    GradTol,
    /// Time budget exhausted.
    TMax,
    /// A step ran into a landmark; the step was rejected and the run ended.
    Error,
}

/// Fixed-step integrator configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorParams {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_stop_grad_norm")]
    pub stop_grad_norm: f64,
    /// Convergence bookkeeping only: runs never stop on it, summaries
    /// compare the final distance to home against it.
    #[serde(default)]
    pub stop_dist: Option<f64>,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Keep every k-th sample (the final sample is always kept). 1 records
    /// the full trajectory.
    #[serde(default = "default_record_every")]
    pub record_every: u64,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_t_max() -> f64 {
    200.0
}
fn default_stop_grad_norm() -> f64 {
    1e-8
}
fn default_method() -> Method {
    Method::Rk4
}
fn default_record_every() -> u64 {
    1
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_max: default_t_max(),
            stop_grad_norm: default_stop_grad_norm(),
            stop_dist: None,
            method: default_method(),
            record_every: default_record_every(),
        }
    }
}

impl IntegratorParams {
    pub fn validate(&self) -> Result<(), HomingError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(HomingError::Validation("dt must be positive".into()));
        }
        if !(self.t_max >= self.dt) {
            return Err(HomingError::Validation("t_max must be at least dt".into()));
        }
        if !(self.stop_grad_norm > 0.0) {
            return Err(HomingError::Validation(
                "stop_grad_norm must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One recorded integration sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample<const D: usize> {
    pub t: f64,
    pub x: Point<D>,
    pub u: SVector<f64, D>,
    pub phi: f64,
    pub grad_norm: f64,
}

/// Recorded gradient-flow run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    pub samples: Vec<TrajectorySample<D>>,
    pub terminated_by: Termination,
}

impl<const D: usize> Trajectory<D> {
    pub fn final_sample(&self) -> &TrajectorySample<D> {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

/// u = -grad phi from bearings alone.
pub fn control<const D: usize, R: Reshaping + ?Sized>(
    current: &BearingSet<D>,
    home: &BearingSet<D>,
    rf: &R,
) -> SVector<f64, D> {
    -gradient(current, home, rf).grad
}

struct FlowEval<const D: usize> {
    u: SVector<f64, D>,
    phi: f64,
    grad_norm: f64,
}

fn flow_eval<const D: usize, R: Reshaping + ?Sized>(
    landmarks: &[Point<D>],
    home: &BearingSet<D>,
    x: &Point<D>,
    rf: &R,
) -> Result<FlowEval<D>, HomingError> {
    let current = bearings_from(landmarks, x)?;
    let grad = gradient(&current, home, rf).grad;
    let mut phi = 0.0;
    for (i, landmark) in landmarks.iter().enumerate() {
        let c = cosine_alignment(&home[i], &current[i]);
        phi += range(x, landmark) * rf.eval(c).f;
    }
    Ok(FlowEval {
        u: -grad,
        phi,
        grad_norm: grad.norm(),
    })
}

fn flow_field<const D: usize, R: Reshaping + ?Sized>(
    landmarks: &[Point<D>],
    home: &BearingSet<D>,
    x: &Point<D>,
    rf: &R,
) -> Result<SVector<f64, D>, HomingError> {
    let current = bearings_from(landmarks, x)?;
    Ok(-gradient(&current, home, rf).grad)
}

fn advance<const D: usize, R: Reshaping + ?Sized>(
    landmarks: &[Point<D>],
    home: &BearingSet<D>,
    x: &Point<D>,
    u: &SVector<f64, D>,
    rf: &R,
    params: &IntegratorParams,
) -> Result<Point<D>, HomingError> {
    let dt = params.dt;
    match params.method {
        Method::Euler => Ok(x + dt * u),
        Method::Rk4 => {
            let k1 = *u;
            let k2 = flow_field(landmarks, home, &(x + 0.5 * dt * k1), rf)?;
            let k3 = flow_field(landmarks, home, &(x + 0.5 * dt * k2), rf)?;
            let k4 = flow_field(landmarks, home, &(x + dt * k3), rf)?;
            Ok(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        }
    }
}

/// Integrate x' = -grad phi from `x0` until the gradient norm falls below
/// the stop threshold, the time budget runs out, or a step hits a landmark.
pub fn integrate_gradient_flow<const D: usize, R: Reshaping + ?Sized>(
    scene: &Scene<D>,
    x0: &Point<D>,
    rf: &R,
    params: &IntegratorParams,
) -> Result<Trajectory<D>, HomingError> {
    integrate_flow(scene.landmarks(), &scene.home_bearings(), x0, rf, params)
}

/// Same loop over raw landmarks and an explicit home-bearing set; the set
/// does not have to be consistent with any reachable home position, which
/// is what Monte-Carlo re-minimization under perturbed bearings needs.
pub fn integrate_flow<const D: usize, R: Reshaping + ?Sized>(
    landmarks: &[Point<D>],
    home_bearings: &BearingSet<D>,
    x0: &Point<D>,
    rf: &R,
    params: &IntegratorParams,
) -> Result<Trajectory<D>, HomingError> {
    params.validate()?;
    let stride = params.record_every.max(1);
    let mut samples = Vec::new();
    let mut x = *x0;
    // a collision at the start point is the caller's error
    let mut eval = flow_eval(landmarks, home_bearings, &x, rf)?;
    let mut step: u64 = 0;
    let terminated_by = loop {
        let t = step as f64 * params.dt;
        let stop_grad = eval.grad_norm < params.stop_grad_norm;
        let stop_time = !stop_grad && t + 0.5 * params.dt >= params.t_max;
        let recorded = step % stride == 0 || stop_grad || stop_time;
        if recorded {
            samples.push(TrajectorySample {
                t,
                x,
                u: eval.u,
                phi: eval.phi,
                grad_norm: eval.grad_norm,
            });
        }
        if stop_grad {
            break Termination::GradTol;
        }
        if stop_time {
            break Termination::TMax;
        }
        // reject the step if it lands (or evaluates a stage) at a landmark
        let next = advance(landmarks, home_bearings, &x, &eval.u, rf, params)
            .and_then(|next| Ok((flow_eval(landmarks, home_bearings, &next, rf)?, next)));
        match next {
            Ok((next_eval, next_x)) => {
                eval = next_eval;
                x = next_x;
                step += 1;
            }
            Err(_) => {
                if !recorded {
                    samples.push(TrajectorySample {
                        t,
                        x,
                        u: eval.u,
                        phi: eval.phi,
                        grad_norm: eval.grad_norm,
                    });
                }
                break Termination::Error;
            }
        }
    };
    Ok(Trajectory {
        samples,
        terminated_by,
    })
}

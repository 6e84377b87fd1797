//! Sliding-mode heading control for a unicycle robot (planar only).
//!
//! The desired velocity is g = k_nu * (-grad phi). The forward speed is the
//! projection of g onto the heading, so the robot backs up when facing away
//! from g. The turn rate chases theta_d = atan2(g_y, g_x) whose drift is
//!
//!   theta_d' = k_nu * sum_i d_i^-1 * a_i,
//!   a_i = g' S H_i xdot / |g|^2,   S = [[0, 1], [-1, 0]],
//!
//! with H_i the bearing-only coupling matrices and d_i the unknown ranges.
//! Splitting the a_i by sign bounds the drift without ranges: as long as
//! rho >= k_nu / min_i d_i, the switching law
//!
//!   omega = rho * sum_{a_i > 0} a_i + k_theta    (theta_e <= 0)
//!   omega = rho * sum_{a_i < 0} a_i - k_theta    (theta_e > 0)
//!
//! pushes the heading error toward zero at rate k_theta or better. An
//! optional boundary layer trades the k_theta term for a proportional one
//! near theta_e = 0 to limit chattering, and actuator saturation scales nu
//! and omega by a common factor, which preserves the direction field.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::cost::{coupling_matrices, gradient};
use crate::error::HomingError;
use crate::geometry::{bearings_from, cosine_alignment, range, BearingSet, Point, Scene};
use crate::holonomic::{IntegratorParams, Termination};
use crate::reshaping::Reshaping;

/// Below this gradient magnitude theta_d is meaningless; command zero.
pub const GRAD_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnicycleParams {
    /// Assumed upper bound on the inverse landmark ranges; each sample
    /// records whether max_i 1/d_i < rho actually held.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_k_theta")]
    pub k_theta: f64,
    #[serde(default = "default_k_nu")]
    pub k_nu: f64,
    #[serde(default = "default_nu_max")]
    pub nu_max: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    /// Stop threshold on |g|, the desired-velocity magnitude.
    #[serde(default = "default_g_stop")]
    pub g_stop: f64,
    /// Half-width of the proportional band around theta_e = 0; zero keeps
    /// the pure switching law.
    #[serde(default)]
    pub boundary_layer: f64,
}

fn default_rho() -> f64 {
    20.0
}
fn default_k_theta() -> f64 {
    2.0
}
fn default_k_nu() -> f64 {
    1.0
}
fn default_nu_max() -> f64 {
    5.0
}
fn default_omega_max() -> f64 {
    5.0
}
fn default_g_stop() -> f64 {
    1e-8
}

impl Default for UnicycleParams {
    fn default() -> Self {
        Self {
            rho: default_rho(),
            k_theta: default_k_theta(),
            k_nu: default_k_nu(),
            nu_max: default_nu_max(),
            omega_max: default_omega_max(),
            g_stop: default_g_stop(),
            boundary_layer: 0.0,
        }
    }
}

impl UnicycleParams {
    pub fn validate(&self) -> Result<(), HomingError> {
        for (name, v) in [
            ("rho", self.rho),
            ("k_theta", self.k_theta),
            ("k_nu", self.k_nu),
            ("nu_max", self.nu_max),
            ("omega_max", self.omega_max),
            ("g_stop", self.g_stop),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HomingError::Validation(format!("{name} must be positive")));
            }
        }
        if !(self.boundary_layer >= 0.0 && self.boundary_layer.is_finite()) {
            return Err(HomingError::Validation(
                "boundary_layer must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One unicycle command, with the diagnostics the tests and exporters need.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleCommand {
    pub nu: f64,
    pub omega: f64,
    pub theta_d: f64,
    /// theta - theta_d wrapped into [-pi, pi).
    pub theta_e: f64,
    /// Common saturation factor applied to nu and omega (1 = unsaturated).
    pub scale: f64,
    /// The per-landmark drift terms a_i.
    pub coupling: Vec<f64>,
    /// Gradient too small to define a heading; the command is zero.
    pub degenerate: bool,
}

/// Wrap an angle difference into [-pi, pi).
pub fn wrap_angle_error(e: f64) -> f64 {
    (e + PI).rem_euclid(2.0 * PI) - PI
}

/// Wrap a heading into (-pi, pi].
pub fn wrap_heading(theta: f64) -> f64 {
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

/// Compute the sliding-mode command from bearings and the heading alone.
pub fn command<R: Reshaping + ?Sized>(
    current: &BearingSet<2>,
    home: &BearingSet<2>,
    theta: f64,
    rf: &R,
    params: &UnicycleParams,
) -> UnicycleCommand {
    let g = -params.k_nu * gradient(current, home, rf).grad;
    let g_sq = g.norm_squared();
    if g_sq.sqrt() < GRAD_EPS {
        return UnicycleCommand {
            nu: 0.0,
            omega: 0.0,
            theta_d: 0.0,
            theta_e: 0.0,
            scale: 1.0,
            coupling: vec![0.0; current.len()],
            degenerate: true,
        };
    }
    let theta_d = g.y.atan2(g.x);
    let theta_e = wrap_angle_error(theta - theta_d);
    let heading = Vector2::new(theta.cos(), theta.sin());
    let nu_raw = heading.dot(&g);

    // a_i = g' S H_i xdot / |g|^2 with xdot the commanded velocity
    let xdot = nu_raw * heading;
    let s_g = Vector2::new(-g.y, g.x); // S' g, so a_i = (S' g) . (H_i xdot)
    let coupling: Vec<f64> = coupling_matrices(current, home, rf)
        .iter()
        .map(|h| s_g.dot(&(h * xdot)) / g_sq)
        .collect();

    let drift_bound: f64 = if theta_e <= 0.0 {
        coupling.iter().filter(|a| **a > 0.0).sum()
    } else {
        coupling.iter().filter(|a| **a < 0.0).sum()
    };
    let bl = params.boundary_layer;
    let reach = if bl > 0.0 && theta_e.abs() < bl {
        -params.k_theta * theta_e / bl
    } else if theta_e <= 0.0 {
        params.k_theta
    } else {
        -params.k_theta
    };
    let omega_raw = params.rho * drift_bound + reach;

    let mut scale: f64 = 1.0;
    if nu_raw.abs() > params.nu_max {
        scale = scale.min(params.nu_max / nu_raw.abs());
    }
    if omega_raw.abs() > params.omega_max {
        scale = scale.min(params.omega_max / omega_raw.abs());
    }
    UnicycleCommand {
        nu: scale * nu_raw,
        omega: scale * omega_raw,
        theta_d,
        theta_e,
        scale,
        coupling,
        degenerate: false,
    }
}

/// One recorded unicycle sample; the command is the one applied over the
/// step starting at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleSample {
    pub t: f64,
    pub x: Point<2>,
    pub theta: f64,
    pub nu: f64,
    pub omega: f64,
    pub theta_e: f64,
    pub phi: f64,
    pub grad_norm: f64,
    /// Whether max_i 1/d_i < rho held here; the sliding analysis needs it.
    pub rho_bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleTrajectory {
    pub samples: Vec<UnicycleSample>,
    pub terminated_by: Termination,
}

impl UnicycleTrajectory {
    pub fn final_sample(&self) -> &UnicycleSample {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

struct StepEval {
    cmd: UnicycleCommand,
    phi: f64,
    grad_norm: f64,
    rho_bound_ok: bool,
}

fn step_eval<R: Reshaping + ?Sized>(
    landmarks: &[Point<2>],
    home: &BearingSet<2>,
    x: &Point<2>,
    theta: f64,
    rf: &R,
    params: &UnicycleParams,
) -> Result<StepEval, HomingError> {
    let current = bearings_from(landmarks, x)?;
    let grad = gradient(&current, home, rf).grad;
    let cmd = command(&current, home, theta, rf, params);
    let mut phi = 0.0;
    let mut min_range = f64::INFINITY;
    for (i, landmark) in landmarks.iter().enumerate() {
        let c = cosine_alignment(&home[i], &current[i]);
        let d = range(x, landmark);
        phi += d * rf.eval(c).f;
        min_range = min_range.min(d);
    }
    Ok(StepEval {
        cmd,
        phi,
        grad_norm: grad.norm(),
        rho_bound_ok: min_range > 1.0 / params.rho,
    })
}

/// Drive the unicycle from (`x0`, `theta0`) under the sliding-mode law.
///
/// The switching makes the right-hand side discontinuous, so the loop is a
/// plain euler step regardless of the configured method; `record_every`,
/// `dt` and `t_max` apply as in the gradient flow, but the stop test is
/// |g| < g_stop from the sliding params, not `stop_grad_norm`.
pub fn simulate_unicycle<R: Reshaping + ?Sized>(
    scene: &Scene<2>,
    x0: &Point<2>,
    theta0: f64,
    rf: &R,
    params: &UnicycleParams,
    integ: &IntegratorParams,
) -> Result<UnicycleTrajectory, HomingError> {
    params.validate()?;
    integ.validate()?;
    let landmarks = scene.landmarks();
    let home = scene.home_bearings();
    let stride = integ.record_every.max(1);
    let mut samples = Vec::new();
    let mut x = *x0;
    let mut theta = wrap_heading(theta0);
    let mut eval = step_eval(landmarks, &home, &x, theta, rf, params)?;
    let mut step: u64 = 0;
    let terminated_by = loop {
        let t = step as f64 * integ.dt;
        let stop_grad = params.k_nu * eval.grad_norm < params.g_stop;
        let stop_time = !stop_grad && t + 0.5 * integ.dt >= integ.t_max;
        let recorded = step % stride == 0 || stop_grad || stop_time;
        if recorded {
            samples.push(UnicycleSample {
                t,
                x,
                theta,
                nu: eval.cmd.nu,
                omega: eval.cmd.omega,
                theta_e: eval.cmd.theta_e,
                phi: eval.phi,
                grad_norm: eval.grad_norm,
                rho_bound_ok: eval.rho_bound_ok,
            });
        }
        if stop_grad {
            break Termination::GradTol;
        }
        if stop_time {
            break Termination::TMax;
        }
        let next_x =
            x + integ.dt * eval.cmd.nu * Vector2::new(theta.cos(), theta.sin());
        let next_theta = wrap_heading(theta + integ.dt * eval.cmd.omega);
        match step_eval(landmarks, &home, &next_x, next_theta, rf, params) {
            Ok(next_eval) => {
                eval = next_eval;
                x = next_x;
                theta = next_theta;
                step += 1;
            }
            Err(_) => {
                if !recorded {
                    samples.push(UnicycleSample {
                        t,
                        x,
                        theta,
                        nu: eval.cmd.nu,
                        omega: eval.cmd.omega,
                        theta_e: eval.cmd.theta_e,
                        phi: eval.phi,
                        grad_norm: eval.grad_norm,
                        rho_bound_ok: eval.rho_bound_ok,
                    });
                }
                break Termination::Error;
            }
        }
    };
    Ok(UnicycleTrajectory {
        samples,
        terminated_by,
    })
}

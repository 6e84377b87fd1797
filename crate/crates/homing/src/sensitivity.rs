//! Sensitivity of the homing equilibrium to errors in the stored bearings.
//!
//! Treat a point x as a candidate home: its own bearings are the stored
//! set, so the gradient vanishes there by construction. Perturbing stored
//! bearing i by db_i moves the equilibrium by
//!
//!   dx = -J_x^-1 * sum_i J_i db_i
//!
//! where J_x is the position Jacobian of the gradient and J_i the Jacobian
//! with respect to the stored bearing (the identity at the candidate home).
//! For independent zero-mean bearing noise with covariance sigma^2 N_i this
//! gives the equilibrium covariance
//!
//!   Cov = sigma^2 * J_x^-1 (sum_i J_i N_i J_i') J_x^-T,
//!
//! with N_i either the tangent projector (noise orthogonal to the bearing,
//! the physical model) or the identity. Everything here is per unit
//! sigma^2; scale by the actual variance at the call site.

use nalgebra::{SMatrix, SVector, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::bearing_jacobian;
use crate::error::HomingError;
use crate::geometry::{orthogonal_projector, AxisBox, BearingSet, Point, Scene};
use crate::holonomic::{integrate_flow, IntegratorParams, Method, Termination};
use crate::reshaping::Reshaping;

/// Frobenius condition numbers beyond this are reported as singular.
pub const KAPPA_MAX: f64 = 1e12;

/// Default landmark mask radius for heatmaps, as a fraction of the region
/// diagonal.
pub const DEFAULT_MASK_FRACTION: f64 = 0.02;

/// Stored-bearing noise model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// Noise tangent to the unit sphere at the bearing.
    #[default]
    Projected,
    /// Full-dimensional noise, kept for comparison.
    Isotropic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport<const D: usize> {
    /// Position Jacobian of the gradient at the candidate home.
    pub jacobian: SMatrix<f64, D, D>,
    /// Equilibrium covariance per unit bearing variance.
    pub covariance: SMatrix<f64, D, D>,
    pub trace: f64,
    /// Frobenius condition number of the Jacobian.
    pub condition: f64,
}

/// Equilibrium sensitivity with `x` as the candidate home.
pub fn sensitivity_at<const D: usize, R: Reshaping + ?Sized>(
    scene: &Scene<D>,
    x: &Point<D>,
    rf: &R,
    noise: NoiseModel,
) -> Result<SensitivityReport<D>, HomingError> {
    let bearings = scene.bearings_at(x)?;
    let jacobian = crate::cost::gradient_differential(scene, x, &bearings, rf)?.matrix;
    let inverse = jacobian
        .try_inverse()
        .ok_or(HomingError::SingularJacobian {
            condition: f64::INFINITY,
        })?;
    let condition = jacobian.norm() * inverse.norm();
    if !(condition <= KAPPA_MAX) {
        return Err(HomingError::SingularJacobian { condition });
    }
    let mut forcing = SMatrix::<f64, D, D>::zeros();
    for b in bearings.iter() {
        // stored == current at a candidate home, so j is the identity;
        // keep the general factor, it costs nothing
        let j = bearing_jacobian(b, b, rf);
        let n = match noise {
            NoiseModel::Projected => orthogonal_projector(b),
            NoiseModel::Isotropic => SMatrix::<f64, D, D>::identity(),
        };
        forcing += j * n * j.transpose();
    }
    let covariance = inverse * forcing * inverse.transpose();
    Ok(SensitivityReport {
        jacobian,
        covariance,
        trace: covariance.trace(),
        condition,
    })
}

/// log10 equilibrium-covariance trace over a grid of candidate homes.
/// Masked cells (landmark within `mask_radius`, or a singular Jacobian)
/// hold NaN. Values are row-major, index `j * nx + i` for cell centers
/// `(min + (i + 1/2) wx, min + (j + 1/2) wy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub region: AxisBox<2>,
    pub nx: usize,
    pub ny: usize,
    pub reshaping: String,
    pub noise: NoiseModel,
    pub mask_radius: f64,
    pub values: Vec<f64>,
    pub masked: usize,
}

impl Heatmap {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.nx && j < self.ny);
        self.values[j * self.nx + i]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point<2> {
        let wx = (self.region.max.x - self.region.min.x) / self.nx as f64;
        let wy = (self.region.max.y - self.region.min.y) / self.ny as f64;
        Point::<2>::new(
            self.region.min.x + (i as f64 + 0.5) * wx,
            self.region.min.y + (j as f64 + 0.5) * wy,
        )
    }
}

pub fn sensitivity_heatmap<R: Reshaping + ?Sized + Sync>(
    scene: &Scene<2>,
    region: &AxisBox<2>,
    nx: usize,
    ny: usize,
    mask_radius: f64,
    rf: &R,
    noise: NoiseModel,
) -> Result<Heatmap, HomingError> {
    if nx == 0 || ny == 0 {
        return Err(HomingError::Validation(
            "heatmap resolution must be positive".into(),
        ));
    }
    if !(mask_radius >= 0.0 && mask_radius.is_finite()) {
        return Err(HomingError::Validation(
            "mask_radius must be nonnegative".into(),
        ));
    }
    let mut map = Heatmap {
        region: *region,
        nx,
        ny,
        reshaping: rf.tag().to_string(),
        noise,
        mask_radius,
        values: Vec::new(),
        masked: 0,
    };
    let values: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let center = map.cell_center(k % nx, k / nx);
            let near_landmark = scene
                .landmarks()
                .iter()
                .any(|l| (l - center).norm() <= mask_radius);
            if near_landmark {
                return f64::NAN;
            }
            match sensitivity_at(scene, &center, rf, noise) {
                Ok(report) if report.trace > 0.0 => report.trace.log10(),
                _ => f64::NAN,
            }
        })
        .collect();
    map.masked = values.iter().filter(|v| v.is_nan()).count();
    map.values = values;
    Ok(map)
}

/// Monte-Carlo check of the covariance prediction: perturb the stored
/// bearings, re-minimize by gradient flow from a small start box around
/// home, and compare the scatter of the shifted equilibria against the
/// prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloParams {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Flow settings for re-minimization; None picks a step from the local
    /// gradient stiffness.
    #[serde(default)]
    pub integ: Option<IntegratorParams>,
}

fn default_trials() -> usize {
    200
}
fn default_sigma() -> f64 {
    1e-3
}

impl Default for MonteCarloParams {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            sigma: default_sigma(),
            seed: 0,
            integ: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport<const D: usize> {
    pub sample_covariance: SMatrix<f64, D, D>,
    /// sigma^2 times the per-unit prediction.
    pub predicted: SMatrix<f64, D, D>,
    /// Sample trace over predicted trace; 1 when both vanish.
    pub trace_ratio: f64,
    pub mean_offset: SVector<f64, D>,
    /// Largest equilibrium displacement seen across trials.
    pub max_offset: f64,
    pub trials: usize,
}

/// Half-width of the re-minimization start box, as a fraction of the scene
/// extent. Each trial flows from the box center (home) and its corners and
/// keeps the lowest-cost converged endpoint, so a single stalled start
/// cannot pass off a premature stop as the minimizer.
pub const MC_START_FRACTION: f64 = 0.02;

fn restart_points<const D: usize>(home: &Point<D>, h: f64) -> Vec<Point<D>> {
    let mut starts = vec![*home];
    for mask in 0..(1_usize << D) {
        let mut p = *home;
        for k in 0..D {
            p[k] += if mask & (1 << k) != 0 { h } else { -h };
        }
        starts.push(p);
    }
    starts
}

/// Step size from the gradient stiffness at home: the Jacobian eigenvalues
/// are bounded by sum_i 1/d_i, and the explicit schemes are stable well
/// below 2 over that.
fn auto_flow_params<const D: usize>(scene: &Scene<D>) -> IntegratorParams {
    let stiffness: f64 = scene.ranges_at(scene.home()).iter().map(|d| 1.0 / d).sum();
    IntegratorParams {
        dt: (1.2 / stiffness).clamp(1e-3, 0.05),
        t_max: 100.0,
        stop_grad_norm: 1e-8,
        stop_dist: None,
        method: Method::Rk4,
        record_every: u64::MAX,
    }
}

fn perturb_bearings<const D: usize, G: Rng>(
    home: &BearingSet<D>,
    sigma: f64,
    noise: NoiseModel,
    rng: &mut G,
) -> BearingSet<D> {
    if sigma == 0.0 {
        return home.clone();
    }
    let perturbed = home
        .iter()
        .map(|b| {
            let z = SVector::<f64, D>::from_fn(|_, _| rng.sample(StandardNormal));
            let n = match noise {
                NoiseModel::Projected => z - b.as_ref() * b.dot(&z),
                NoiseModel::Isotropic => z,
            };
            Unit::new_normalize(b.as_ref() + sigma * n)
        })
        .collect();
    BearingSet::new(perturbed)
}

pub fn monte_carlo_home_scatter<const D: usize, R: Reshaping + ?Sized + Sync>(
    scene: &Scene<D>,
    rf: &R,
    noise: NoiseModel,
    params: &MonteCarloParams,
) -> Result<MonteCarloReport<D>, HomingError> {
    if params.trials < 2 {
        return Err(HomingError::Validation(
            "monte-carlo needs at least 2 trials".into(),
        ));
    }
    if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
        return Err(HomingError::Validation("sigma must be nonnegative".into()));
    }
    let report = sensitivity_at(scene, scene.home(), rf, noise)?;
    let integ = params.integ.unwrap_or_else(|| auto_flow_params(scene));
    integ.validate()?;
    if params.sigma == 0.0 {
        // unperturbed stored bearings place the minimizer at home exactly;
        // a numerical search would only add rounding-level scatter
        return Ok(MonteCarloReport {
            sample_covariance: SMatrix::zeros(),
            predicted: SMatrix::zeros(),
            trace_ratio: 1.0,
            mean_offset: SVector::zeros(),
            max_offset: 0.0,
            trials: params.trials,
        });
    }
    let home_bearings = scene.home_bearings();

    let starts = restart_points(scene.home(), MC_START_FRACTION * scene.extent());

    // one RNG stream per trial keeps the draw deterministic under rayon
    let endpoints: Vec<Option<Point<D>>> = (0..params.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
            rng.set_stream(trial as u64);
            let stored = perturb_bearings(&home_bearings, params.sigma, noise, &mut rng);
            let mut best: Option<(f64, Point<D>)> = None;
            for start in &starts {
                let Ok(traj) = integrate_flow(scene.landmarks(), &stored, start, rf, &integ)
                else {
                    continue;
                };
                if traj.terminated_by != Termination::GradTol {
                    continue;
                }
                let end = traj.final_sample();
                // strict comparison: ties keep the earlier start, and the
                // center start comes first
                if best.is_none_or(|(phi, _)| end.phi < phi) {
                    best = Some((end.phi, end.x));
                }
            }
            best.map(|(_, x)| x)
        })
        .collect();

    let failed = endpoints.iter().filter(|e| e.is_none()).count();
    if failed > 0 {
        return Err(HomingError::NonConvergence {
            context: format!(
                "{failed} of {} monte-carlo trials failed to re-minimize",
                params.trials
            ),
        });
    }
    let converged: Vec<&Point<D>> = endpoints.iter().flatten().collect();

    let n = converged.len() as f64;
    let mean: Point<D> = converged.iter().map(|x| **x).sum::<Point<D>>() / n;
    let mut sample_covariance = SMatrix::<f64, D, D>::zeros();
    let mut max_offset = 0.0_f64;
    for x in &converged {
        let d = **x - mean;
        sample_covariance += d * d.transpose();
        max_offset = max_offset.max((**x - scene.home()).norm());
    }
    sample_covariance /= n - 1.0;

    let predicted = params.sigma * params.sigma * report.covariance;
    let (st, pt) = (sample_covariance.trace(), predicted.trace());
    let trace_ratio = if pt == 0.0 && st == 0.0 { 1.0 } else { st / pt };
    Ok(MonteCarloReport {
        sample_covariance,
        predicted,
        trace_ratio,
        mean_offset: mean - scene.home(),
        max_offset,
        trials: params.trials,
    })
}

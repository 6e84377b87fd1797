//! Batch experiment driver: realize a scenario, run every (start, heading)
//! combination, and collect per-run summaries. Failures are recorded in
//! their run slot and never abort sibling runs.

use rayon::prelude::*;

use crate::error::HomingError;
use crate::geometry::Point;
use crate::holonomic::{integrate_gradient_flow, Termination, Trajectory};
use crate::scenario::{build_scenario, BuiltScenario, ControllerKind, ScenarioRealization, ScenarioSpec};
use crate::unicycle::{simulate_unicycle, UnicycleTrajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// NaN when the run failed outright.
    pub final_distance: f64,
    pub steps: usize,
    pub terminated_by: String,
    /// Unicycle only: samples where max_i 1/d_i < rho did not hold.
    pub rho_bound_violations: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Holonomic2(Trajectory<2>),
    Holonomic3(Trajectory<3>),
    Unicycle(UnicycleTrajectory),
    Failed(HomingError),
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub index: usize,
    pub start: Vec<f64>,
    pub heading: Option<f64>,
    pub outcome: RunOutcome,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub spec: ScenarioSpec,
    pub landmarks: Vec<Vec<f64>>,
    pub home: Vec<f64>,
    pub runs: Vec<RunRecord>,
}

fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::GradTol => "grad_tol",
        Termination::TMax => "t_max",
        Termination::Error => "error",
    }
}

fn steps_of(t_final: f64, dt: f64) -> usize {
    (t_final / dt).round() as usize
}

fn failed_record(index: usize, start: Vec<f64>, heading: Option<f64>, e: HomingError) -> RunRecord {
    RunRecord {
        index,
        start,
        heading,
        summary: RunSummary {
            final_distance: f64::NAN,
            steps: 0,
            terminated_by: format!("failed: {e}"),
            rho_bound_violations: None,
        },
        outcome: RunOutcome::Failed(e),
    }
}

fn run_holonomic<const D: usize>(
    r: &ScenarioRealization<D>,
    wrap: fn(Trajectory<D>) -> RunOutcome,
) -> Vec<RunRecord> {
    r.starts
        .par_iter()
        .enumerate()
        .map(|(index, start)| {
            let coords = start.iter().copied().collect();
            match integrate_gradient_flow(&r.scene, start, r.rf, &r.integ) {
                Err(e) => failed_record(index, coords, None, e),
                Ok(traj) => {
                    let end = traj.final_sample();
                    let summary = RunSummary {
                        final_distance: (end.x - r.scene.home()).norm(),
                        steps: steps_of(end.t, r.integ.dt),
                        terminated_by: termination_label(traj.terminated_by).into(),
                        rho_bound_violations: None,
                    };
                    RunRecord {
                        index,
                        start: coords,
                        heading: None,
                        outcome: wrap(traj),
                        summary,
                    }
                }
            }
        })
        .collect()
}

fn run_unicycle(r: &ScenarioRealization<2>) -> Vec<RunRecord> {
    let params = r.unicycle.expect("unicycle realization carries sliding params");
    let combos: Vec<(usize, Point<2>, f64)> = r
        .starts
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            r.headings
                .iter()
                .enumerate()
                .map(move |(hi, h)| (si * r.headings.len() + hi, *s, *h))
        })
        .collect();
    combos
        .into_par_iter()
        .map(|(index, start, heading)| {
            let coords = start.iter().copied().collect();
            match simulate_unicycle(&r.scene, &start, heading, r.rf, &params, &r.integ) {
                Err(e) => failed_record(index, coords, Some(heading), e),
                Ok(traj) => {
                    let end = traj.final_sample();
                    let summary = RunSummary {
                        final_distance: (end.x - r.scene.home()).norm(),
                        steps: steps_of(end.t, r.integ.dt),
                        terminated_by: termination_label(traj.terminated_by).into(),
                        rho_bound_violations: Some(
                            traj.samples.iter().filter(|s| !s.rho_bound_ok).count(),
                        ),
                    };
                    RunRecord {
                        index,
                        start: coords,
                        heading: Some(heading),
                        outcome: RunOutcome::Unicycle(traj),
                        summary,
                    }
                }
            }
        })
        .collect()
}

pub fn run_built(built: &BuiltScenario, controller: ControllerKind) -> Vec<RunRecord> {
    match (built, controller) {
        (BuiltScenario::D2(r), ControllerKind::Holonomic) => {
            run_holonomic(r, RunOutcome::Holonomic2)
        }
        (BuiltScenario::D3(r), ControllerKind::Holonomic) => {
            run_holonomic(r, RunOutcome::Holonomic3)
        }
        (BuiltScenario::D2(r), ControllerKind::Unicycle) => run_unicycle(r),
        (BuiltScenario::D3(_), ControllerKind::Unicycle) => {
            unreachable!("scenario validation rejects a 3d unicycle")
        }
    }
}

pub fn run_experiment(spec: &ScenarioSpec) -> Result<RunArtifact, HomingError> {
    let built = build_scenario(spec)?;
    let (landmarks, home) = match &built {
        BuiltScenario::D2(r) => (
            r.scene.landmarks().iter().map(|l| l.iter().copied().collect()).collect(),
            r.scene.home().iter().copied().collect(),
        ),
        BuiltScenario::D3(r) => (
            r.scene.landmarks().iter().map(|l| l.iter().copied().collect()).collect(),
            r.scene.home().iter().copied().collect(),
        ),
    };
    let runs = run_built(&built, spec.controller);
    Ok(RunArtifact {
        spec: spec.clone(),
        landmarks,
        home,
        runs,
    })
}

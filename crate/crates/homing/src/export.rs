//! File exports. Trajectory CSVs share one column layout across both
//! robot models:
//!
//!   t, x, y[, z], theta, nu, omega | ux, uy[, uz], phi, grad_norm
//!   [, theta_e, rho_ok]
//!
//! where theta is empty for the holonomic model and the two trailing
//! columns exist only for the unicycle. Floats carry 17 significant
//! digits so re-runs can be compared byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::HomingError;
use crate::experiment::{RunArtifact, RunOutcome};
use crate::holonomic::Trajectory;
use crate::scenario::{BuiltScenario, RNG_ALGORITHM};
use crate::sensitivity::Heatmap;
use crate::unicycle::UnicycleTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn holonomic_columns<const D: usize>() -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(AXES[..D].iter().map(|a| a.to_string()));
    cols.push("theta".into());
    cols.extend(AXES[..D].iter().map(|a| format!("u{a}")));
    cols.push("phi".into());
    cols.push("grad_norm".into());
    cols
}

const UNICYCLE_COLUMNS: [&str; 10] = [
    "t", "x", "y", "theta", "nu", "omega", "phi", "grad_norm", "theta_e", "rho_ok",
];

pub fn holonomic_csv<const D: usize>(traj: &Trajectory<D>) -> String {
    let mut out = holonomic_columns::<D>().join(",");
    out.push('\n');
    for s in &traj.samples {
        let _ = write!(out, "{}", fmt(s.t));
        for k in 0..D {
            let _ = write!(out, ",{}", fmt(s.x[k]));
        }
        out.push(','); // theta stays empty for the holonomic model
        for k in 0..D {
            let _ = write!(out, ",{}", fmt(s.u[k]));
        }
        let _ = writeln!(out, ",{},{}", fmt(s.phi), fmt(s.grad_norm));
    }
    out
}

pub fn unicycle_csv(traj: &UnicycleTrajectory) -> String {
    let mut out = UNICYCLE_COLUMNS.join(",");
    out.push('\n');
    for s in &traj.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt(s.t),
            fmt(s.x.x),
            fmt(s.x.y),
            fmt(s.theta),
            fmt(s.nu),
            fmt(s.omega),
            fmt(s.phi),
            fmt(s.grad_norm),
            fmt(s.theta_e),
            u8::from(s.rho_bound_ok)
        );
    }
    out
}

pub fn holonomic_json<const D: usize>(traj: &Trajectory<D>) -> Value {
    let data: Vec<Value> = traj
        .samples
        .iter()
        .map(|s| {
            let mut row = vec![json!(s.t)];
            row.extend((0..D).map(|k| json!(s.x[k])));
            row.push(Value::Null);
            row.extend((0..D).map(|k| json!(s.u[k])));
            row.push(json!(s.phi));
            row.push(json!(s.grad_norm));
            Value::Array(row)
        })
        .collect();
    json!({ "columns": holonomic_columns::<D>(), "data": data })
}

pub fn unicycle_json(traj: &UnicycleTrajectory) -> Value {
    let data: Vec<Value> = traj
        .samples
        .iter()
        .map(|s| {
            json!([
                s.t,
                s.x.x,
                s.x.y,
                s.theta,
                s.nu,
                s.omega,
                s.phi,
                s.grad_norm,
                s.theta_e,
                u8::from(s.rho_bound_ok)
            ])
        })
        .collect();
    json!({ "columns": UNICYCLE_COLUMNS, "data": data })
}

fn run_file_body(outcome: &RunOutcome, format: ExportFormat) -> Option<String> {
    match (outcome, format) {
        (RunOutcome::Failed(_), _) => None,
        (RunOutcome::Holonomic2(t), ExportFormat::Csv) => Some(holonomic_csv(t)),
        (RunOutcome::Holonomic3(t), ExportFormat::Csv) => Some(holonomic_csv(t)),
        (RunOutcome::Unicycle(t), ExportFormat::Csv) => Some(unicycle_csv(t)),
        (RunOutcome::Holonomic2(t), ExportFormat::Json) => {
            Some(format!("{:#}\n", holonomic_json(t)))
        }
        (RunOutcome::Holonomic3(t), ExportFormat::Json) => {
            Some(format!("{:#}\n", holonomic_json(t)))
        }
        (RunOutcome::Unicycle(t), ExportFormat::Json) => Some(format!("{:#}\n", unicycle_json(t))),
    }
}

pub fn run_artifact_summary(artifact: &RunArtifact, files: &[Option<String>]) -> Value {
    assert_eq!(files.len(), artifact.runs.len());
    let runs: Vec<Value> = artifact
        .runs
        .iter()
        .zip(files)
        .map(|(run, file)| {
            json!({
                "index": run.index,
                "start": run.start,
                "heading": run.heading,
                "file": file,
                "final_distance": run.summary.final_distance,
                "steps": run.summary.steps,
                "terminated_by": run.summary.terminated_by,
                "rho_bound_violations": run.summary.rho_bound_violations,
            })
        })
        .collect();
    json!({
        "format": "homing-run/1",
        "rng": RNG_ALGORITHM,
        "scenario": artifact.spec,
        "scene": { "landmarks": artifact.landmarks, "home": artifact.home },
        "runs": runs,
    })
}

/// Write one trajectory file per successful run plus summary.json; returns
/// the paths written. Runs execute in parallel elsewhere, files are written
/// here in run order only.
pub fn write_run_artifact(
    artifact: &RunArtifact,
    dir: &Path,
    format: ExportFormat,
) -> Result<Vec<PathBuf>, HomingError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut files = Vec::with_capacity(artifact.runs.len());
    for run in &artifact.runs {
        match run_file_body(&run.outcome, format) {
            None => files.push(None),
            Some(body) => {
                let name = format!("run_{:03}.{}", run.index, format.extension());
                let path = dir.join(&name);
                fs::write(&path, body)?;
                written.push(path);
                files.push(Some(name));
            }
        }
    }
    let summary = run_artifact_summary(artifact, &files);
    let path = dir.join("summary.json");
    fs::write(&path, format!("{summary:#}\n"))?;
    written.push(path);
    Ok(written)
}

/// Grid rows from y-min upward, "nan" marking masked cells.
pub fn heatmap_csv(map: &Heatmap) -> String {
    let mut out = String::new();
    for j in 0..map.ny {
        for i in 0..map.nx {
            if i > 0 {
                out.push(',');
            }
            let v = map.value(i, j);
            if v.is_nan() {
                out.push_str("nan");
            } else {
                out.push_str(&fmt(v));
            }
        }
        out.push('\n');
    }
    out
}

pub fn heatmap_json(map: &Heatmap) -> Value {
    json!({
        "format": "homing-heatmap/1",
        "region": {
            "min": [map.region.min.x, map.region.min.y],
            "max": [map.region.max.x, map.region.max.y],
        },
        "resolution": [map.nx, map.ny],
        "reshaping": map.reshaping,
        "noise": map.noise,
        "epsilon_mask": map.mask_radius,
        // NaN serializes as null, which is the masked marker here
        "values": map.values,
        "masked": map.masked,
    })
}

pub fn write_heatmap(
    map: &Heatmap,
    dir: &Path,
    format: ExportFormat,
) -> Result<Vec<PathBuf>, HomingError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ExportFormat::Csv => {
            let values = dir.join("heatmap.csv");
            fs::write(&values, heatmap_csv(map))?;
            written.push(values);
        }
        ExportFormat::Json => {}
    }
    let meta = dir.join("heatmap.json");
    fs::write(&meta, format!("{:#}\n", heatmap_json(map)))?;
    written.push(meta);
    Ok(written)
}

/// Geometry block for the `scenario` subcommand and artifact metadata.
pub fn scenario_geometry_json(built: &BuiltScenario) -> Value {
    fn block<const D: usize>(r: &crate::scenario::ScenarioRealization<D>) -> Value {
        let landmarks: Vec<Vec<f64>> = r
            .scene
            .landmarks()
            .iter()
            .map(|l| l.iter().copied().collect())
            .collect();
        let home: Vec<f64> = r.scene.home().iter().copied().collect();
        let starts: Vec<Vec<f64>> = r.starts.iter().map(|s| s.iter().copied().collect()).collect();
        json!({
            "rng": RNG_ALGORITHM,
            "landmarks": landmarks,
            "home": home,
            "starts": starts,
            "headings": r.headings,
            "reshaping": r.rf.tag(),
        })
    }
    match built {
        BuiltScenario::D2(r) => block(r),
        BuiltScenario::D3(r) => block(r),
    }
}

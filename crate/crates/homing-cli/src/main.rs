//! Command-line front end: batch simulation runs, sensitivity maps,
//! numerical self-audits, and scenario generation.
//!
//! Exit codes: 0 success, 2 invalid input or scenario, 3 simulation or
//! export failure, 4 failed verification.

use std::env;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use homing::export::{
    heatmap_json, run_artifact_summary, scenario_geometry_json, write_heatmap,
    write_run_artifact, ExportFormat,
};
use homing::experiment::{run_experiment, RunOutcome};
use homing::reshaping::{verify_assumption, AngleSquared, Cosine};
use homing::scenario::{
    build_scenario, read_spec, BuiltScenario, ScenarioRealization, ScenarioSpec, RNG_ALGORITHM,
};
use homing::sensitivity::{
    monte_carlo_home_scatter, sensitivity_at, sensitivity_heatmap, MonteCarloParams, NoiseModel,
    DEFAULT_MASK_FRACTION,
};
use homing::verify::{verify_equivalence, verify_gradients};
use homing::{AxisBox, HomingError, Point};

#[derive(Parser)]
#[command(name = "homing", version, about = "Bearing-only homing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArgs {
    /// Scenario file (JSON); built-in defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,

    /// Replace the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OutArgs {
    /// Directory for exported files; without it only the report is printed.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// File format for trajectories and grids.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Copy, Clone, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Json => ExportFormat::Json,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum NoiseArg {
    /// Noise confined to the tangent plane of each bearing.
    Projected,
    /// Full-dimensional noise before renormalization.
    Isotropic,
}

impl From<NoiseArg> for NoiseModel {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Projected => NoiseModel::Projected,
            NoiseArg::Isotropic => NoiseModel::Isotropic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured controller from every start (and heading).
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutArgs,
    },

    /// Map equilibrium sensitivity over a grid of candidate home points.
    Heatmap {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutArgs,

        /// Grid cells along x.
        #[arg(long, default_value_t = 60)]
        nx: usize,

        /// Grid cells along y.
        #[arg(long, default_value_t = 60)]
        ny: usize,

        /// Landmark mask radius; default is 0.02 of the grid diagonal.
        #[arg(long)]
        mask: Option<f64>,

        /// Padding around the landmark bounding box, as a fraction of its
        /// diagonal.
        #[arg(long, default_value_t = 0.5)]
        margin: f64,

        /// Bearing noise model.
        #[arg(long, value_enum, default_value_t = NoiseArg::Projected)]
        noise: NoiseArg,
    },

    /// Audit gradients against finite differences, check the reshaping
    /// admissibility conditions, and compare the two gradient forms.
    Verify {
        /// Seed for the randomized audit cases.
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Number of finite-difference audit cases.
        #[arg(long, default_value_t = 100)]
        cases: usize,

        /// Number of gradient-form comparison pairs.
        #[arg(long, default_value_t = 1000)]
        pairs: usize,

        /// Grid size for the admissibility audit on [-1, 1].
        #[arg(long, default_value_t = 10001)]
        grid: usize,

        /// Directory to write verify.json into.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },

    /// Generate the scenario geometry and print it.
    Scenario {
        #[command(flatten)]
        spec: SpecArgs,

        /// Directory to write scenario.json into.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },

    /// Monte-Carlo check of the predicted home covariance under bearing
    /// noise.
    SensitivityMc {
        #[command(flatten)]
        spec: SpecArgs,

        /// Directory to write sensitivity_mc.json into.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,

        /// Bearing noise scale.
        #[arg(long, default_value_t = 1e-3)]
        sigma: f64,

        /// Number of Monte-Carlo trials.
        #[arg(long, default_value_t = 2000)]
        trials: usize,

        /// Bearing noise model.
        #[arg(long, value_enum, default_value_t = NoiseArg::Projected)]
        noise: NoiseArg,
    },
}

/// Failures keep the phase they occurred in so the exit code can separate
/// bad input (2) from a failed run or export (3) and a failed audit (4).
enum CliError {
    Setup(HomingError),
    Run(HomingError),
    Verification,
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return 2;
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(CliError::Setup(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            3
        }
        Err(CliError::Verification) => {
            eprintln!("verification failed");
            4
        }
    }
}

/// HOMING_THREADS caps the worker pool; unset leaves the default.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = env::var("HOMING_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("HOMING_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("thread pool setup failed: {e}"))
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Simulate { spec, out } => simulate(spec, out),
        Command::Heatmap {
            spec,
            out,
            nx,
            ny,
            mask,
            margin,
            noise,
        } => heatmap(spec, out, nx, ny, mask, margin, noise.into()),
        Command::Verify {
            seed,
            cases,
            pairs,
            grid,
            out,
        } => verify(seed, cases, pairs, grid, out),
        Command::Scenario { spec, out } => scenario(spec, out),
        Command::SensitivityMc {
            spec,
            out,
            sigma,
            trials,
            noise,
        } => sensitivity_mc(spec, out, sigma, trials, noise.into()),
    }
}

fn load_spec(args: &SpecArgs) -> Result<ScenarioSpec, CliError> {
    let mut spec = match &args.spec {
        Some(path) => read_spec(path).map_err(CliError::Setup)?,
        None => ScenarioSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn write_report(dir: &PathBuf, name: &str, report: &Value) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(dir.join(name), format!("{report:#}\n")))
        .map_err(|e| CliError::Run(e.into()))
}

fn simulate(spec_args: SpecArgs, out_args: OutArgs) -> Result<i32, CliError> {
    let spec = load_spec(&spec_args)?;
    // run failures are recorded per run, so errors here are all setup
    let artifact = run_experiment(&spec).map_err(CliError::Setup)?;
    let format = ExportFormat::from(out_args.format);

    if let Some(dir) = &out_args.out {
        write_run_artifact(&artifact, dir, format).map_err(CliError::Run)?;
    }
    let files: Vec<Option<String>> = artifact
        .runs
        .iter()
        .map(|run| match (&out_args.out, &run.outcome) {
            (Some(_), outcome) if !matches!(outcome, RunOutcome::Failed(_)) => {
                Some(format!("run_{:03}.{}", run.index, format.extension()))
            }
            _ => None,
        })
        .collect();
    println!("{:#}", run_artifact_summary(&artifact, &files));

    let failed = artifact
        .runs
        .iter()
        .filter(|r| matches!(r.outcome, RunOutcome::Failed(_)))
        .count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", artifact.runs.len());
        return Ok(3);
    }
    Ok(0)
}

fn heatmap(
    spec_args: SpecArgs,
    out_args: OutArgs,
    nx: usize,
    ny: usize,
    mask: Option<f64>,
    margin: f64,
    noise: NoiseModel,
) -> Result<i32, CliError> {
    let spec = load_spec(&spec_args)?;
    let built = build_scenario(&spec).map_err(CliError::Setup)?;
    let BuiltScenario::D2(real) = built else {
        return Err(CliError::Setup(HomingError::Validation(
            "heatmap needs a two-dimensional scenario".into(),
        )));
    };
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(CliError::Setup(HomingError::Validation(
            "margin must be nonnegative".into(),
        )));
    }

    let landmarks = real.scene.landmarks();
    let mut lo = landmarks[0];
    let mut hi = landmarks[0];
    for l in landmarks {
        lo = lo.inf(l);
        hi = hi.sup(l);
    }
    let pad = margin * (hi - lo).norm();
    let region = AxisBox::new(
        Point::<2>::new(lo.x - pad, lo.y - pad),
        Point::<2>::new(hi.x + pad, hi.y + pad),
    )
    .map_err(CliError::Setup)?;
    let mask = mask.unwrap_or(DEFAULT_MASK_FRACTION * region.diagonal());

    let map = sensitivity_heatmap(&real.scene, &region, nx, ny, mask, real.rf, noise)
        .map_err(CliError::Setup)?;
    if let Some(dir) = &out_args.out {
        write_heatmap(&map, dir, out_args.format.into()).map_err(CliError::Run)?;
    }
    println!("{:#}", heatmap_json(&map));
    Ok(0)
}

fn verify(
    seed: u64,
    cases: usize,
    pairs: usize,
    grid: usize,
    out: Option<PathBuf>,
) -> Result<i32, CliError> {
    if cases == 0 || pairs == 0 || grid < 3 {
        return Err(CliError::Setup(HomingError::Validation(
            "verify needs cases >= 1, pairs >= 1 and grid >= 3".into(),
        )));
    }
    let gradients = verify_gradients(seed, cases);
    let equivalence = verify_equivalence(seed, pairs);
    let assumption = [&Cosine as &dyn homing::Reshaping, &AngleSquared].map(|rf| {
        let r = verify_assumption(rf, grid);
        (
            rf.tag().to_string(),
            json!({
                "grid": r.grid_size,
                "max_violation_minval": r.max_violation_minval,
                "max_violation_slope": r.max_violation_slope,
                "max_violation_mix": r.max_violation_mix,
                "pass": r.pass,
            }),
        )
    });
    let assumption_pass = assumption
        .iter()
        .all(|(_, v)| v["pass"].as_bool().unwrap_or(false));
    let pass = gradients.pass && equivalence.pass && assumption_pass;

    let report = json!({
        "format": "homing-verify/1",
        "seed": seed,
        "gradients": {
            "cases": gradients.cases,
            "max_rel_gradient": gradients.max_rel_gradient,
            "max_rel_differential": gradients.max_rel_differential,
            "max_rel_bearing_jacobian": gradients.max_rel_bearing_jacobian,
            "pass": gradients.pass,
        },
        "equivalence": {
            "pairs": equivalence.pairs,
            "max_abs_diff": equivalence.max_abs_diff,
            "pass": equivalence.pass,
        },
        "assumption": Value::Object(assumption.into_iter().collect()),
        "pass": pass,
    });
    println!("{report:#}");
    if let Some(dir) = &out {
        write_report(dir, "verify.json", &report)?;
    }
    if pass {
        Ok(0)
    } else {
        Err(CliError::Verification)
    }
}

fn scenario(spec_args: SpecArgs, out: Option<PathBuf>) -> Result<i32, CliError> {
    let spec = load_spec(&spec_args)?;
    let built = build_scenario(&spec).map_err(CliError::Setup)?;
    let report = json!({
        "format": "homing-scene/1",
        "scenario": spec,
        "scene": scenario_geometry_json(&built),
    });
    println!("{report:#}");
    if let Some(dir) = &out {
        write_report(dir, "scenario.json", &report)?;
    }
    Ok(0)
}

fn sensitivity_mc(
    spec_args: SpecArgs,
    out: Option<PathBuf>,
    sigma: f64,
    trials: usize,
    noise: NoiseModel,
) -> Result<i32, CliError> {
    let spec = load_spec(&spec_args)?;
    let built = build_scenario(&spec).map_err(CliError::Setup)?;
    let params = MonteCarloParams {
        trials,
        sigma,
        seed: spec.seed,
        integ: None,
    };
    let report = match &built {
        BuiltScenario::D2(real) => mc_report(real, &params, noise)?,
        BuiltScenario::D3(real) => mc_report(real, &params, noise)?,
    };
    println!("{report:#}");
    if let Some(dir) = &out {
        write_report(dir, "sensitivity_mc.json", &report)?;
    }
    Ok(0)
}

fn mc_report<const D: usize>(
    real: &ScenarioRealization<D>,
    params: &MonteCarloParams,
    noise: NoiseModel,
) -> Result<Value, CliError> {
    let analytic =
        sensitivity_at(&real.scene, real.scene.home(), real.rf, noise).map_err(CliError::Run)?;
    let mc = monte_carlo_home_scatter(&real.scene, real.rf, noise, params).map_err(CliError::Run)?;
    let rows = |m: &[f64]| -> Vec<Vec<f64>> { m.chunks(D).map(|r| r.to_vec()).collect() };
    Ok(json!({
        "format": "homing-sensitivity-mc/1",
        "noise": noise,
        "sigma": params.sigma,
        "trials": params.trials,
        "seed": params.seed,
        "rng": RNG_ALGORITHM,
        "jacobian": rows(analytic.jacobian.transpose().as_slice()),
        "condition": analytic.condition,
        "predicted_covariance": rows(mc.predicted.transpose().as_slice()),
        "sample_covariance": rows(mc.sample_covariance.transpose().as_slice()),
        "trace_ratio": mc.trace_ratio,
        "mean_offset": mc.mean_offset.as_slice().to_vec(),
        "max_offset": mc.max_offset,
    }))
}

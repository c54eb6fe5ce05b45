//! Benchmark harness: scenario files, runs, sweeps and mode comparison.
//!
//! A scenario file names a scene (built-in generator or scene document),
//! a solver configuration, a duration, requested output channels and
//! scenario-local assertions. Runs step the scene for `duration/dt` steps
//! and write one CSV per channel plus a manifest and a summary; a raised
//! solver error is a valid benchmark outcome and is recorded, not hidden.

pub mod compare;
pub mod exec;
pub mod output;
pub mod sweep;

pub use compare::{compare_modes, CompareReport};
pub use exec::{run_batch, run_batch_sequential};
pub use output::{Channel, ALL_CHANNELS};
pub use sweep::{run_cfm_sweep, run_precision_sweep, SweepOutcome, SweepPoint, SweepResult};

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::scene::{Convention, SceneModel};
use crate::scenes;
use crate::sim::{Simulation, StepRecord};
use crate::solver::{SolveMode, SolverConfig};

/// The benchmark scenarios the harness knows how to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    FourBar,
    CraneAnalog,
    EquilibriumCylinder,
    Pendulum,
    ChainPrecisionSweep,
    CfmSweep,
}

/// A run is classified failed on any solver error, a peak joint violation
/// above this bound, or a non-finite state.
pub const FAILURE_VIOLATION_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_mode")]
    pub mode: SolveMode,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_cfm")]
    pub cfm: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub gyroscopic: bool,
}

fn default_mode() -> SolveMode {
    SolveMode::PgsCfm
}
fn default_iterations() -> usize {
    64
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_cfm() -> f64 {
    1e-9
}
fn default_beta() -> f64 {
    0.2
}
fn default_rank_tolerance() -> f64 {
    1e-8
}
fn default_dt() -> f64 {
    1e-3
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            iterations: default_iterations(),
            tolerance: default_tolerance(),
            cfm: default_cfm(),
            beta: default_beta(),
            rank_tolerance: default_rank_tolerance(),
            dt: default_dt(),
            gyroscopic: false,
        }
    }
}

impl SolverSpec {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            mode: self.mode,
            iterations: self.iterations,
            tolerance: self.tolerance,
            cfm_default: self.cfm,
            beta: self.beta,
            rank_tolerance: self.rank_tolerance,
            dt: self.dt,
            gyroscopic: self.gyroscopic,
        }
    }
}

/// Free-form parameters for the built-in scene generators.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuiltinParams {
    pub convention: Option<Convention>,
    pub crank_angle_deg: Option<f64>,
    pub hold_motor: Option<bool>,
    pub damping: Option<f64>,
    pub initial_spin: Option<f64>,
    pub winch_damping: Option<f64>,
    pub arm_segments: Option<usize>,
    pub ties: Option<usize>,
    pub chain_links: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSource {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub params: BuiltinParams,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinalForceAssertion {
    pub joint: String,
    /// One of "x", "y", "z".
    pub axis: String,
    pub value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AngularSpeedAssertion {
    pub body: String,
    pub limit: f64,
}

/// Scenario-local assertions; failures set exit status 2.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssertionSpec {
    pub max_violation: Option<f64>,
    pub max_angular_speed: Option<AngularSpeedAssertion>,
    pub final_force: Option<FinalForceAssertion>,
    /// Force-agreement tolerance used by `compare` (N).
    pub compare_force_tol: Option<f64>,
}

/// A scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub version: u32,
    pub name: ScenarioName,
    pub duration: f64,
    #[serde(default = "all_channels_vec")]
    pub outputs: Vec<Channel>,
    #[serde(default)]
    pub critical_joint: Option<String>,
    pub scene: SceneSource,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub assertions: AssertionSpec,
    /// Present the chained closure residual to the solver unstabilized on
    /// the first step (chained scenes only).
    #[serde(default)]
    pub strict_closure: bool,
}

fn all_channels_vec() -> Vec<Channel> {
    ALL_CHANNELS.to_vec()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub values: Vec<f64>,
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Schema {
            path: "scenario".to_string(),
            message: e.message().to_string(),
        })?;
        if spec.version != 1 {
            return Err(Error::Config(format!(
                "unsupported scenario version {}",
                spec.version
            )));
        }
        if !(spec.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        Ok(spec)
    }

    /// Load from a file; scene file references resolve relative to it.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec = Self::from_toml_str(&text)?;
        if let Some(file) = &spec.scene.file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    spec.scene.file = Some(dir.join(file));
                }
            }
        }
        Ok(spec)
    }

    /// Resolve the scene source into a document.
    pub fn resolve_scene(&self) -> Result<SceneModel> {
        match (&self.scene.builtin, &self.scene.file) {
            (Some(_), Some(_)) => Err(Error::Config(
                "scene: give either `builtin` or `file`, not both".into(),
            )),
            (None, None) => Err(Error::Config("scene: missing `builtin` or `file`".into())),
            (None, Some(path)) => SceneModel::from_path(path),
            (Some(name), None) => resolve_builtin(name, &self.scene.params),
        }
    }
}

fn resolve_builtin(name: &str, p: &BuiltinParams) -> Result<SceneModel> {
    let chained = matches!(p.convention, Some(Convention::ChainedFrame));
    match name {
        "pendulum" => Ok(scenes::pendulum()),
        "four_bar" => {
            let mut fp = scenes::FourBarParams::default();
            if let Some(deg) = p.crank_angle_deg {
                fp.crank_angle = deg.to_radians();
            }
            if let Some(hold) = p.hold_motor {
                fp.hold_motor = hold;
            }
            Ok(if chained {
                scenes::four_bar_chained(&fp)
            } else {
                scenes::four_bar(&fp)
            })
        }
        "equilibrium_cylinder" => Ok(scenes::equilibrium_cylinder(&scenes::DrumParams {
            damping: p.damping.unwrap_or(0.0),
            initial_spin: p.initial_spin.unwrap_or(0.0),
        })),
        "crane_analog" => {
            let mut cp = scenes::CraneParams::default();
            if let Some(v) = p.winch_damping {
                cp.winch_damping = v;
            }
            if let Some(v) = p.arm_segments {
                cp.arm_segments = v;
            }
            if let Some(v) = p.ties {
                cp.ties = v;
            }
            if chained || p.convention.is_none() {
                Ok(scenes::crane_analog(&cp))
            } else {
                scenes::crane_analog_world(&cp)
            }
        }
        "straight_chain" => Ok(scenes::straight_chain(p.chain_links.unwrap_or(4))),
        other => Err(Error::Config(format!("unknown builtin scene '{other}'"))),
    }
}

/// Per-call overrides (CLI flags).
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub mode: Option<SolveMode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Completed,
    /// Simulation failed at `step` with the given error kind.
    Failed { step: u64, kind: String },
}

impl RunOutcome {
    pub fn is_stable(&self) -> bool {
        matches!(self, RunOutcome::Completed)
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub outcome: RunOutcome,
    pub steps_completed: usize,
    pub peak_violation: f64,
    pub peak_force: f64,
    pub records: Vec<StepRecord>,
    pub assertion_failures: Vec<String>,
    pub wall: Duration,
    pub files: Vec<PathBuf>,
}

fn error_kind(e: &Error) -> String {
    match e {
        Error::SingularSystem(_) => "SingularSystem".to_string(),
        Error::NonFiniteState(_) => "NonFiniteState".to_string(),
        Error::NonFiniteLambda { .. } => "NonFiniteLambda".to_string(),
        other => format!("{other:?}")
            .split(['(', '{', ' '])
            .next()
            .unwrap_or("Error")
            .to_string(),
    }
}

/// Step a prepared simulation for `steps`, classifying the outcome.
pub fn drive(sim: &mut Simulation, steps: usize) -> (RunOutcome, Vec<StepRecord>) {
    let mut records = Vec::with_capacity(steps.min(1 << 20));
    for _ in 0..steps {
        match sim.step() {
            Ok(rec) => {
                let blown = rec.violation.max_position_error > FAILURE_VIOLATION_LIMIT;
                let step = rec.step;
                records.push(rec);
                if blown {
                    return (
                        RunOutcome::Failed {
                            step,
                            kind: "ViolationLimit".to_string(),
                        },
                        records,
                    );
                }
            }
            Err(e) => {
                return (
                    RunOutcome::Failed {
                        step: e.step,
                        kind: error_kind(&e.source),
                    },
                    records,
                );
            }
        }
    }
    (RunOutcome::Completed, records)
}

fn peak_violation(records: &[StepRecord]) -> f64 {
    records
        .iter()
        .map(|r| r.violation.max_position_error)
        .fold(0.0, f64::max)
}

fn peak_force(records: &[StepRecord]) -> f64 {
    records
        .iter()
        .flat_map(|r| r.forces.iter())
        .map(|f| f.force_child.norm())
        .fold(0.0, f64::max)
}

fn check_assertions(
    spec: &ScenarioSpec,
    sim: &Simulation,
    records: &[StepRecord],
    outcome: &RunOutcome,
) -> Vec<String> {
    let mut failures = Vec::new();
    if let RunOutcome::Failed { step, kind } = outcome {
        failures.push(format!("simulation failed at step {step}: {kind}"));
        return failures;
    }
    let a = &spec.assertions;
    if let Some(limit) = a.max_violation {
        let peak = peak_violation(records);
        if peak > limit {
            failures.push(format!("peak violation {peak:e} exceeds {limit:e}"));
        }
    }
    if let Some(ass) = &a.max_angular_speed {
        let idx = sim.world.bodies.iter().position(|b| b.name == ass.body);
        match idx {
            Some(i) => {
                let w = sim.world.bodies[i].twist.angular.norm();
                if w > ass.limit {
                    failures.push(format!(
                        "body '{}' angular speed {w:e} exceeds {:e}",
                        ass.body, ass.limit
                    ));
                }
            }
            None => failures.push(format!("assertion references unknown body '{}'", ass.body)),
        }
    }
    if let Some(ass) = &a.final_force {
        let Some(last) = records.last() else {
            failures.push("no records for final_force assertion".to_string());
            return failures;
        };
        let rec = last.forces.iter().find(|f| f.joint == ass.joint);
        match rec {
            Some(f) => {
                let v = match ass.axis.as_str() {
                    "x" => f.force_child.x,
                    "y" => f.force_child.y,
                    _ => f.force_child.z,
                };
                if (v - ass.value).abs() > ass.tol {
                    failures.push(format!(
                        "final force {}.{} = {v} differs from {} by more than {:e}",
                        ass.joint,
                        ass.axis,
                        ass.value,
                        ass.tol
                    ));
                }
            }
            None => failures.push(format!("assertion references unknown joint '{}'", ass.joint)),
        }
    }
    failures
}

fn manifest_lines(spec: &ScenarioSpec, config: &SolverConfig, seed: u64, steps: usize) -> Vec<(String, String)> {
    vec![
        ("scenario".into(), format!("{:?}", spec.name)),
        (
            "scene".into(),
            spec.scene
                .builtin
                .clone()
                .or_else(|| {
                    spec.scene
                        .file
                        .as_ref()
                        .map(|p| p.to_string_lossy().to_string())
                })
                .unwrap_or_default(),
        ),
        ("mode".into(), format!("{:?}", config.mode)),
        ("iterations".into(), config.iterations.to_string()),
        ("tolerance".into(), format!("{:?}", config.tolerance)),
        ("cfm".into(), format!("{:?}", config.cfm_default)),
        ("beta".into(), format!("{:?}", config.beta)),
        ("rank_tolerance".into(), format!("{:?}", config.rank_tolerance)),
        ("dt".into(), format!("{:?}", config.dt)),
        ("gyroscopic".into(), config.gyroscopic.to_string()),
        ("duration".into(), format!("{:?}", spec.duration)),
        ("steps".into(), steps.to_string()),
        ("seed".into(), seed.to_string()),
        ("strict_closure".into(), spec.strict_closure.to_string()),
    ]
}

/// Build the simulation a scenario describes.
pub fn prepare(spec: &ScenarioSpec, opts: &RunOptions) -> Result<Simulation> {
    let scene = spec.resolve_scene()?;
    let compiled = scene.compile()?;
    let mut config = spec.solver.to_config();
    if let Some(dt) = opts.dt {
        config.dt = dt;
    }
    if let Some(mode) = opts.mode {
        config.mode = mode;
    }
    let mut sim = Simulation::new(compiled.world, config)?;
    sim.schedules = compiled.schedules;
    sim.strict_closure = spec.strict_closure;
    Ok(sim)
}

/// Run a scenario end to end; write channels, manifest and summary when an
/// output directory is given.
pub fn run_scenario(spec: &ScenarioSpec, opts: &RunOptions) -> Result<RunResult> {
    let started = Instant::now();
    let mut sim = prepare(spec, opts)?;
    let steps = (spec.duration / sim.config.dt).round() as usize;
    let (outcome, records) = drive(&mut sim, steps);
    let assertion_failures = check_assertions(spec, &sim, &records, &outcome);
    let wall = started.elapsed();

    let mut files = Vec::new();
    if let Some(dir) = &opts.out_dir {
        files = output::write_channels(dir, &spec.outputs, &records)?;
        let lines = manifest_lines(spec, &sim.config, opts.seed.unwrap_or(0), steps);
        files.push(output::write_manifest(dir, &lines, &files)?);
        let mut summary = String::new();
        summary.push_str(&format!("outcome = {:?}\n", outcome));
        summary.push_str(&format!("steps_completed = {}\n", records.len()));
        summary.push_str(&format!("peak_violation = {:?}\n", peak_violation(&records)));
        summary.push_str(&format!("peak_force = {:?}\n", peak_force(&records)));
        summary.push_str(&format!("wall_ms = {}\n", wall.as_millis()));
        for f in &assertion_failures {
            summary.push_str(&format!("assertion_failed = {f}\n"));
        }
        if assertion_failures.is_empty() {
            summary.push_str("assertions = pass\n");
        }
        let path = dir.join("summary.txt");
        std::fs::write(&path, summary)?;
        files.push(path);
    }

    Ok(RunResult {
        peak_violation: peak_violation(&records),
        peak_force: peak_force(&records),
        steps_completed: records.len(),
        outcome,
        records,
        assertion_failures,
        wall,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM_SCENARIO: &str = r#"
version = 1
name = "pendulum"
duration = 0.05
outputs = ["joint_forces", "energies"]

[scene]
builtin = "pendulum"

[solver]
dt = 0.001

[assertions]
final_force = { joint = "hinge", axis = "z", value = 9.81, tol = 1e-5 }
"#;

    #[test]
    fn pendulum_scenario_runs_and_passes_assertions() {
        let spec = ScenarioSpec::from_toml_str(PENDULUM_SCENARIO).unwrap();
        let result = run_scenario(&spec, &RunOptions::default()).unwrap();
        assert!(result.outcome.is_stable());
        assert_eq!(result.steps_completed, 50);
        assert!(result.assertion_failures.is_empty(), "{:?}", result.assertion_failures);
    }

    #[test]
    fn csv_row_count_matches_steps() {
        let spec = ScenarioSpec::from_toml_str(PENDULUM_SCENARIO).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            ..RunOptions::default()
        };
        let result = run_scenario(&spec, &opts).unwrap();
        assert!(result.files.iter().any(|f| f.ends_with("joint_forces.csv")));
        let text = std::fs::read_to_string(dir.path().join("joint_forces.csv")).unwrap();
        // Header plus one row per step.
        assert_eq!(text.lines().count(), 51);
    }

    #[test]
    fn unknown_builtin_is_config_error() {
        let text = PENDULUM_SCENARIO.replace("builtin = \"pendulum\"", "builtin = \"nope\"");
        let spec = ScenarioSpec::from_toml_str(&text).unwrap();
        let err = run_scenario(&spec, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}

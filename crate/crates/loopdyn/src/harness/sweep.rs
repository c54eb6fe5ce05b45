//! Precision and CFM sweeps.
//!
//! Sweep points are independent simulations executed through
//! [`exec::run_batch`]; results aggregate in axis order so output is
//! deterministic under both executors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{
    perturb, Convention, PerturbDistribution, PerturbTargets, PerturbationSpec, SceneModel,
};
use crate::sim::Simulation;
use crate::solver::SolveMode;

use super::{drive, exec, RunOutcome, RunOptions, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepOutcome {
    Stable,
    Failed { step: u64, kind: String },
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub convention: Option<Convention>,
    pub outcome: SweepOutcome,
    pub peak_violation: f64,
    pub peak_force: f64,
}

/// One outcome per axis value, axis sorted ascending.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,convention,outcome,failed_step,error_kind,peak_violation,peak_force\n");
        for p in &self.points {
            let conv = match p.convention {
                Some(Convention::WorldFrame) => "world_frame",
                Some(Convention::ChainedFrame) => "chained_frame",
                None => "",
            };
            let (status, step, kind) = match &p.outcome {
                SweepOutcome::Stable => ("stable", String::new(), String::new()),
                SweepOutcome::Failed { step, kind } => ("failed", step.to_string(), kind.clone()),
            };
            let _ = writeln!(
                out,
                "{:?},{conv},{status},{step},{kind},{:?},{:?}",
                p.value, p.peak_violation, p.peak_force
            );
        }
        out
    }

    pub fn point(&self, value: f64) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| (p.value - value).abs() <= 1e-300 + value.abs() * 1e-12)
    }
}

fn outcome_of(run: &RunOutcome) -> SweepOutcome {
    match run {
        RunOutcome::Completed => SweepOutcome::Stable,
        RunOutcome::Failed { step, kind } => SweepOutcome::Failed {
            step: *step,
            kind: kind.clone(),
        },
    }
}

struct PointJob {
    value: f64,
    convention: Convention,
    scene: SceneModel,
    strict_closure: bool,
}

fn run_point(spec: &ScenarioSpec, job: PointJob, steps: usize) -> Result<SweepPoint> {
    let compiled = job.scene.compile()?;
    let config = spec.solver.to_config();
    let mut sim = Simulation::new(compiled.world, config)?;
    sim.schedules = compiled.schedules;
    sim.strict_closure = job.strict_closure;
    let (outcome, records) = drive(&mut sim, steps);
    Ok(SweepPoint {
        value: job.value,
        convention: Some(job.convention),
        outcome: outcome_of(&outcome),
        peak_violation: records
            .iter()
            .map(|r| r.violation.max_position_error)
            .fold(0.0, f64::max),
        peak_force: records
            .iter()
            .flat_map(|r| r.forces.iter())
            .map(|f| f.force_child.norm())
            .fold(0.0, f64::max),
    })
}

/// Initial-precision sweep over both loading conventions.
///
/// For every magnitude the scene's positional input data is perturbed and
/// the scenario re-run: under `world_frame` loading the perturbation goes
/// into body positions (anchors re-resolve, so geometry distorts but no
/// violation appears); under `chained_frame` loading it goes into the
/// chain vectors, accumulates around loops, and is presented to the solver
/// strictly (no stabilization on the first step).
pub fn run_precision_sweep(
    spec: &ScenarioSpec,
    magnitudes: &[f64],
    opts: &RunOptions,
) -> Result<(SweepResult, SweepResult)> {
    if magnitudes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("sweep magnitudes must be sorted ascending".into()));
    }
    let base = spec.resolve_scene()?;
    if base.convention != Convention::ChainedFrame {
        return Err(Error::Config(
            "precision sweep needs a chained_frame base scene (the world variant is derived)".into(),
        ));
    }
    let chained = base;
    let world = chained.to_world_frame()?;
    let steps = (spec.duration / spec.solver.dt).round() as usize;
    let seed = opts.seed.unwrap_or(0);

    let mut jobs = Vec::new();
    for (i, &m) in magnitudes.iter().enumerate() {
        let pspec = PerturbationSpec {
            magnitude: m,
            distribution: PerturbDistribution::PerAxisUniform,
            seed: seed.wrapping_add(i as u64),
            targets: PerturbTargets::BodyPositions,
            only: None,
        };
        let (scene, _) = perturb(&world, &pspec)?;
        jobs.push(PointJob {
            value: m,
            convention: Convention::WorldFrame,
            scene,
            strict_closure: false,
        });
    }
    for (i, &m) in magnitudes.iter().enumerate() {
        let pspec = PerturbationSpec {
            magnitude: m,
            distribution: PerturbDistribution::PerAxisUniform,
            seed: seed.wrapping_add(i as u64),
            targets: PerturbTargets::Anchors,
            only: None,
        };
        let (scene, _) = perturb(&chained, &pspec)?;
        jobs.push(PointJob {
            value: m,
            convention: Convention::ChainedFrame,
            scene,
            strict_closure: true,
        });
    }

    let results: Vec<Result<SweepPoint>> =
        exec::run_batch(jobs, |job| run_point(spec, job, steps));
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        points.push(r?);
    }
    let chained_points = points.split_off(magnitudes.len());
    let world_result = SweepResult {
        axis: "perturbation_m".to_string(),
        points,
    };
    let chained_result = SweepResult {
        axis: "perturbation_m".to_string(),
        points: chained_points,
    };

    if let Some(dir) = &opts.out_dir {
        write_precision_outputs(dir, &world_result, &chained_result)?;
    }
    Ok((world_result, chained_result))
}

fn write_precision_outputs(dir: &Path, world: &SweepResult, chained: &SweepResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep_world_frame.csv"), world.to_csv())?;
    std::fs::write(dir.join("sweep_chained_frame.csv"), chained.to_csv())?;
    // Two-convention comparison table.
    let mut table = String::from("magnitude,world_frame,chained_frame\n");
    for (w, c) in world.points.iter().zip(&chained.points) {
        let s = |o: &SweepOutcome| match o {
            SweepOutcome::Stable => "stable".to_string(),
            SweepOutcome::Failed { step, kind } => format!("failed@{step}:{kind}"),
        };
        let _ = writeln!(table, "{:?},{},{}", w.value, s(&w.outcome), s(&c.outcome));
    }
    std::fs::write(dir.join("sweep_comparison.csv"), table)?;
    Ok(())
}

/// CFM sweep: the accuracy/stability trade-off of soft constraints.
/// Runs pgs_cfm per value and records the peak joint violation.
pub fn run_cfm_sweep(
    spec: &ScenarioSpec,
    values: &[f64],
    opts: &RunOptions,
) -> Result<SweepResult> {
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Config("cfm values must be positive".into()));
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("cfm values must be sorted ascending".into()));
    }
    let scene = spec.resolve_scene()?;
    let steps = (spec.duration / spec.solver.dt).round() as usize;

    let jobs: Vec<(f64, SceneModel)> = values.iter().map(|&v| (v, scene.clone())).collect();
    let results: Vec<Result<SweepPoint>> = exec::run_batch(jobs, |(value, scene)| {
        let compiled = scene.compile()?;
        let mut config = spec.solver.to_config();
        config.mode = SolveMode::PgsCfm;
        config.cfm_default = value;
        let mut sim = Simulation::new(compiled.world, config)?;
        sim.schedules = compiled.schedules;
        let (outcome, records) = drive(&mut sim, steps);
        Ok(SweepPoint {
            value,
            convention: None,
            outcome: outcome_of(&outcome),
            peak_violation: records
                .iter()
                .map(|r| r.violation.max_position_error)
                .fold(0.0, f64::max),
            peak_force: records
                .iter()
                .flat_map(|r| r.forces.iter())
                .map(|f| f.force_child.norm())
                .fold(0.0, f64::max),
        })
    });
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        points.push(r?);
    }
    let result = SweepResult {
        axis: "cfm".to_string(),
        points,
    };
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep_cfm.csv"), result.to_csv())?;
    }
    Ok(result)
}

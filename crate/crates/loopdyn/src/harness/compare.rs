//! Cross-mode comparison: pgs_cfm vs eliminate_direct on one scene.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::solver::SolveMode;

use super::{drive, prepare, RunOptions, RunOutcome, ScenarioSpec};

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub critical_joint: String,
    pub steps_compared: usize,
    pub max_force_diff: f64,
    pub rms_force_diff: f64,
    pub max_torque_diff: f64,
    pub outcome_pgs: RunOutcome,
    pub outcome_direct: RunOutcome,
    pub tolerance: Option<f64>,
    /// Pass/fail against `tolerance`; `None` when no tolerance configured.
    pub passed: Option<bool>,
}

impl CompareReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "critical_joint = {}", self.critical_joint);
        let _ = writeln!(out, "steps_compared = {}", self.steps_compared);
        let _ = writeln!(out, "max_force_diff = {:?}", self.max_force_diff);
        let _ = writeln!(out, "rms_force_diff = {:?}", self.rms_force_diff);
        let _ = writeln!(out, "max_torque_diff = {:?}", self.max_torque_diff);
        let _ = writeln!(out, "outcome_pgs = {:?}", self.outcome_pgs);
        let _ = writeln!(out, "outcome_direct = {:?}", self.outcome_direct);
        match (self.tolerance, self.passed) {
            (Some(tol), Some(ok)) => {
                let _ = writeln!(out, "tolerance = {tol:?}");
                let _ = writeln!(out, "result = {}", if ok { "pass" } else { "fail" });
            }
            _ => {
                let _ = writeln!(out, "result = report-only");
            }
        }
        out
    }
}

/// Run both solver modes on the identical scene and difference the
/// reaction forces at the designated critical joint.
pub fn compare_modes(spec: &ScenarioSpec, opts: &RunOptions) -> Result<CompareReport> {
    let critical = spec
        .critical_joint
        .clone()
        .ok_or_else(|| Error::Config("compare requires `critical_joint`".into()))?;
    let steps = (spec.duration / spec.solver.dt).round() as usize;

    let run_mode = |mode: SolveMode| -> Result<(RunOutcome, Vec<crate::sim::StepRecord>)> {
        let mut sim = prepare(
            spec,
            &RunOptions {
                mode: Some(mode),
                out_dir: None,
                ..opts.clone()
            },
        )?;
        Ok(drive(&mut sim, steps))
    };
    let (outcome_pgs, rec_pgs) = run_mode(SolveMode::PgsCfm)?;
    let (outcome_direct, rec_direct) = run_mode(SolveMode::EliminateDirect)?;

    let joint_idx = rec_pgs
        .first()
        .and_then(|r| r.forces.iter().position(|f| f.joint == critical))
        .ok_or_else(|| Error::Config(format!("unknown critical joint '{critical}'")))?;

    let n = rec_pgs.len().min(rec_direct.len());
    let mut max_force_diff: f64 = 0.0;
    let mut max_torque_diff: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut csv = String::from("time,force_diff,torque_diff\n");
    for k in 0..n {
        let a = &rec_pgs[k].forces[joint_idx];
        let b = &rec_direct[k].forces[joint_idx];
        let fd = (a.force_child - b.force_child).norm();
        let td = (a.torque_child - b.torque_child).norm();
        max_force_diff = max_force_diff.max(fd);
        max_torque_diff = max_torque_diff.max(td);
        sum_sq += fd * fd;
        let _ = writeln!(csv, "{:?},{fd:?},{td:?}", rec_pgs[k].time);
    }
    let rms_force_diff = if n > 0 { (sum_sq / n as f64).sqrt() } else { 0.0 };

    let tolerance = spec.assertions.compare_force_tol;
    let passed = tolerance.map(|tol| {
        max_force_diff <= tol && outcome_pgs.is_stable() && outcome_direct.is_stable()
    });
    let report = CompareReport {
        critical_joint: critical,
        steps_compared: n,
        max_force_diff,
        rms_force_diff,
        max_torque_diff,
        outcome_pgs,
        outcome_direct,
        tolerance,
        passed,
    };

    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("compare.csv"), csv)?;
        std::fs::write(dir.join("compare.txt"), report.to_text())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pendulum_modes_agree_tightly() {
        let spec = ScenarioSpec::from_toml_str(
            r#"
version = 1
name = "pendulum"
duration = 0.05
outputs = []
critical_joint = "hinge"

[scene]
builtin = "pendulum"

[solver]
dt = 0.001
# The first-step regularization transient scales with cfm/dt; keep it
# well under the comparison tolerance.
cfm = 1e-12

[assertions]
compare_force_tol = 1e-6
"#,
        )
        .unwrap();
        let report = compare_modes(&spec, &RunOptions::default()).unwrap();
        assert_eq!(report.passed, Some(true), "max diff {}", report.max_force_diff);
        assert!(report.max_force_diff < 1e-6);
    }
}

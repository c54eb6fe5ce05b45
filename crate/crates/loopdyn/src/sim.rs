//! One full solver step: gather forces, build rows, solve for multipliers,
//! convert to impulses, integrate, and log.

use crate::body::{integrate_semi_implicit, system_energy, ForceAccumulator, MassMatrix, RigidBody};
use crate::error::{Error, Result, StepError};
use crate::joint::Joint;
use crate::math::Vec3;
use crate::rows::{
    anchor_points, damping_rows, joint_rows, measure_violation, motor_rows, ConstraintRow,
    RowKind, StabilizationParams, ViolationReport,
};
use crate::solver::{
    all_at_rest, detect_redundant, direct_solve, pgs_solve, static_equilibrium_check,
    ConstraintSystem, SolveDiagnostics, SolveMode, SolverConfig,
};

/// Bodies, joints and ambient gravity; the engine's mutable state.
#[derive(Debug, Clone)]
pub struct World {
    pub bodies: Vec<RigidBody>,
    pub joints: Vec<Joint>,
    pub gravity: Vec3,
}

impl World {
    pub fn new(gravity: Vec3) -> Self {
        Self {
            bodies: Vec::new(),
            joints: Vec::new(),
            gravity,
        }
    }
}

/// Piecewise-linear target schedule for one joint's drive.
#[derive(Debug, Clone)]
pub struct ActuationSchedule {
    pub joint: usize,
    /// Time-sorted (time, target) pairs; linear interpolation between
    /// points, clamped to the end values outside the range.
    pub points: Vec<(f64, f64)>,
}

impl ActuationSchedule {
    pub fn eval(&self, t: f64) -> Option<f64> {
        let pts = &self.points;
        if pts.is_empty() {
            return None;
        }
        if t <= pts[0].0 {
            return Some(pts[0].1);
        }
        if t >= pts[pts.len() - 1].0 {
            return Some(pts[pts.len() - 1].1);
        }
        for w in pts.windows(2) {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            if t >= t0 && t <= t1 {
                let a = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
                return Some(v0 + a * (v1 - v0));
            }
        }
        None
    }
}

/// Reaction wrench transmitted by one joint, world frame, at step time.
///
/// Both sides' torques are referenced to the child anchor point; for a
/// satisfied joint the parent wrench is the exact negation of the child's.
#[derive(Debug, Clone)]
pub struct JointForceRecord {
    pub joint: String,
    pub force_child: Vec3,
    pub torque_child: Vec3,
    pub force_parent: Vec3,
    pub torque_parent: Vec3,
}

/// Per-step log entry.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: u64,
    pub time: f64,
    pub forces: Vec<JointForceRecord>,
    pub violation: ViolationReport,
    pub kinetic: f64,
    pub potential: f64,
    pub diagnostics: SolveDiagnostics,
}

/// A stepping simulation instance. Plain value semantics: distinct
/// instances may run on distinct threads; one instance steps sequentially.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub world: World,
    pub config: SolverConfig,
    pub schedules: Vec<ActuationSchedule>,
    /// Suppress the Baumgarte bias on the very first step (strict-closure
    /// loading: an initial residual is presented to the solver unstabilized).
    pub strict_closure: bool,
    warm_lambda: Vec<f64>,
    step_index: u64,
    time: f64,
}

impl Simulation {
    pub fn new(world: World, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        for joint in &world.joints {
            if joint.child >= world.bodies.len() {
                return Err(Error::UnknownBody {
                    joint: joint.name.clone(),
                    body: format!("#{}", joint.child),
                });
            }
            if let Some(p) = joint.parent {
                if p >= world.bodies.len() {
                    return Err(Error::UnknownBody {
                        joint: joint.name.clone(),
                        body: format!("#{p}"),
                    });
                }
            }
        }
        Ok(Self {
            world,
            config,
            schedules: Vec::new(),
            strict_closure: false,
            warm_lambda: Vec::new(),
            step_index: 0,
            time: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Advance one step of `config.dt`, returning the step log.
    pub fn step(&mut self) -> Result<StepRecord, StepError> {
        let step = self.step_index;
        self.step_inner().map_err(|e| StepError::new(step, e))
    }

    fn step_inner(&mut self) -> Result<StepRecord> {
        let dt = self.config.dt;
        let world = &mut self.world;

        // External forces: accumulators reset, then gravity.
        let mut accumulators = vec![ForceAccumulator::default(); world.bodies.len()];
        for (body, acc) in world.bodies.iter().zip(accumulators.iter_mut()) {
            if !body.is_static {
                acc.force += world.gravity * body.mass;
            }
        }

        let mass = MassMatrix::assemble(&world.bodies)?;
        let targets = {
            let mut t = vec![None; world.joints.len()];
            for s in &self.schedules {
                if s.joint < t.len() {
                    t[s.joint] = s.eval(self.time);
                }
            }
            t
        };

        // Build rows in assembly order: scene joint order, then row slot.
        let beta = if self.strict_closure && self.step_index == 0 {
            0.0
        } else {
            self.config.beta
        };
        let bilateral_cfm = match self.config.mode {
            SolveMode::PgsCfm => self.config.cfm_default,
            SolveMode::EliminateDirect => 0.0,
        };
        let params = StabilizationParams {
            beta,
            cfm: bilateral_cfm,
        };
        let mut rows: Vec<ConstraintRow> = Vec::new();
        for (ji, joint) in world.joints.iter().enumerate() {
            rows.extend(joint_rows(ji, joint, &world.bodies, dt, &params)?);
            rows.extend(motor_rows(ji, joint, &world.bodies, dt, targets[ji])?);
            rows.extend(damping_rows(ji, joint, &world.bodies, dt)?);
        }

        let (lambda_full, diagnostics, system) = match self.config.mode {
            SolveMode::PgsCfm => {
                let system =
                    ConstraintSystem::assemble(rows, &world.bodies, &mass, &accumulators, dt);
                let warm = if self.warm_lambda.len() == system.len() {
                    Some(self.warm_lambda.as_slice())
                } else {
                    None
                };
                let (lambda, diag) = pgs_solve(&system, warm, &self.config)?;
                self.warm_lambda = lambda.clone();
                (lambda, diag, system)
            }
            SolveMode::EliminateDirect => {
                if all_at_rest(&world.bodies) {
                    static_equilibrium_check(
                        &world.bodies,
                        &world.joints,
                        &targets,
                        &accumulators,
                        &mass,
                        &self.config,
                    )?;
                }
                // Rank-revealing elimination over the bilateral joint rows;
                // motor and damping rows are bounded/regularized and stay.
                let bilateral: Vec<ConstraintRow> = rows
                    .iter()
                    .filter(|r| r.kind == RowKind::Bilateral)
                    .cloned()
                    .collect();
                let red = detect_redundant(&bilateral, &mass, self.config.rank_tolerance);
                let dropped: std::collections::BTreeSet<(usize, usize)> =
                    red.dropped.iter().copied().collect();
                let reduced: Vec<ConstraintRow> = rows
                    .into_iter()
                    .filter(|r| {
                        r.kind != RowKind::Bilateral || !dropped.contains(&(r.joint, r.slot))
                    })
                    .collect();
                let system =
                    ConstraintSystem::assemble(reduced, &world.bodies, &mass, &accumulators, dt);
                let a = system.dense();
                let bounds = system.bounds();
                let (lambda, mut diag) =
                    direct_solve(&a, &system.b, &bounds, self.config.rank_tolerance)?;
                diag.rank = red.rank;
                diag.dropped_rows = red.dropped;
                (lambda, diag, system)
            }
        };

        // Reaction wrenches at step time, both sides referenced to the
        // child anchor point.
        let mut forces: Vec<JointForceRecord> = world
            .joints
            .iter()
            .map(|j| JointForceRecord {
                joint: j.name.clone(),
                force_child: Vec3::zeros(),
                torque_child: Vec3::zeros(),
                force_parent: Vec3::zeros(),
                torque_parent: Vec3::zeros(),
            })
            .collect();
        let refs: Vec<(Vec3, Vec3, Vec3, Vec3)> = world
            .joints
            .iter()
            .map(|j| anchor_points(j, &world.bodies))
            .collect::<Result<_>>()?;
        for (i, row) in system.rows.iter().enumerate() {
            let l = lambda_full[i] / dt;
            if l == 0.0 {
                continue;
            }
            let (_pa, pb, ref_a, com_b) = refs[row.joint];
            let rec = &mut forces[row.joint];
            let fc = row.j_b.lin * l;
            rec.force_child += fc;
            rec.torque_child += row.j_b.ang * l + (com_b - pb).cross(&fc);
            let fp = row.j_a.lin * l;
            rec.force_parent += fp;
            rec.torque_parent += row.j_a.ang * l + (ref_a - pb).cross(&fp);
        }

        let impulses = system.impulses(&lambda_full);
        integrate_semi_implicit(
            &mut world.bodies,
            &mass,
            &accumulators,
            &impulses,
            dt,
            self.config.gyroscopic,
        )?;

        let violation = measure_violation(&world.joints, &world.bodies)?;
        let (kinetic, potential) = system_energy(&world.bodies, &world.gravity);

        self.time += dt;
        self.step_index += 1;
        Ok(StepRecord {
            step: self.step_index - 1,
            time: self.time,
            forces,
            violation,
            kinetic,
            potential,
            diagnostics,
        })
    }

    /// Run `n` steps, returning all records or the first failure.
    pub fn run(&mut self, n: usize) -> Result<Vec<StepRecord>, StepError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.step()?);
        }
        Ok(out)
    }
}

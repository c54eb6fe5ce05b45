//! Maximal-coordinate rigid-body dynamics for closed-loop mechanisms.
//!
//! Every body keeps all six degrees of freedom; joints become velocity-level
//! constraint rows with Baumgarte stabilization. Two solving strategies are
//! implemented side by side so their behavior on redundant and singular
//! systems can be compared directly:
//!
//! * **pgs_cfm** — Projected Gauss-Seidel over a CFM-regularized system;
//!   tolerates redundant rows and indeterminate equilibria at the price of
//!   small constraint violations.
//! * **eliminate_direct** — rank-revealing removal of redundant rows
//!   followed by a dense factorization; exact, but refuses indeterminate
//!   static-equilibrium configurations with a singular-system error.
//!
//! The [`scene`] module loads scenes in two modeling conventions
//! (world-frame vs chained endpoint frames), [`graph`] analyzes loop
//! topology and mobility, and [`harness`] runs benchmark scenarios and
//! sweeps with deterministic CSV output.

pub mod body;
pub mod error;
pub mod graph;
pub mod harness;
pub mod joint;
pub mod math;
pub mod rows;
pub mod scene;
pub mod scenes;
pub mod sim;
pub mod solver;

pub use body::{integrate_semi_implicit, system_energy, ForceAccumulator, MassMatrix, RigidBody};
pub use error::{Error, Result, StepError};
pub use joint::{Joint, JointKind, MotorMode, MotorParams};
pub use math::{Pose, Twist, Vec3};
pub use rows::{
    damping_rows, joint_rows, measure_violation, motor_rows, ConstraintRow, StabilizationParams,
    ViolationReport,
};
pub use sim::{ActuationSchedule, JointForceRecord, Simulation, StepRecord, World};
pub use solver::{
    detect_redundant, direct_solve, pgs_solve, ConstraintSystem, SolveDiagnostics, SolveMode,
    SolverConfig,
};

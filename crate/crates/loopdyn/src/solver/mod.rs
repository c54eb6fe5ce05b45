//! Constraint-system assembly and the two solving strategies.
//!
//! The mixed system is `A·λ = b` with `A = J·M⁻¹·Jᵀ + diag(cfm/dt)` and
//! `b = bias − J·(v + dt·M⁻¹·f_ext)`, λ in impulse units, so a solution
//! yields post-step velocities satisfying the biased constraints.
//!
//! Two modes mirror the two constraint-handling families:
//! [`PgsCfm`](SolveMode::PgsCfm) iterates Projected Gauss-Seidel over the
//! regularized system and tolerates redundancy; `EliminateDirect` detects
//! and removes dependent rows with a rank-revealing pass, then factorizes
//! the reduced dense system, refusing genuinely indeterminate problems.

mod direct;
mod equilibrium;
mod pgs;
mod redundancy;

pub use direct::direct_solve;
pub use equilibrium::{all_at_rest, static_equilibrium_check};
pub use pgs::pgs_solve;
pub use redundancy::{detect_redundant, Redundancy};

use nalgebra::DMatrix;

use crate::body::{ForceAccumulator, MassMatrix, RigidBody};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::rows::{ConstraintRow, Jac6};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    PgsCfm,
    EliminateDirect,
}

/// Solver settings; `validate` enforces the mode-specific invariants.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub mode: SolveMode,
    pub iterations: usize,
    /// PGS stop criterion on the largest per-sweep impulse change.
    pub tolerance: f64,
    /// Regularization applied to bilateral joint rows in pgs_cfm mode
    /// (impulse-domain; divided by dt during assembly).
    pub cfm_default: f64,
    /// Baumgarte factor β.
    pub beta: f64,
    /// Relative pivot threshold for rank decisions, in (0, 1).
    pub rank_tolerance: f64,
    pub dt: f64,
    pub gyroscopic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolveMode::PgsCfm,
            iterations: 64,
            tolerance: 1e-10,
            cfm_default: 1e-9,
            beta: 0.2,
            rank_tolerance: 1e-8,
            dt: 1e-3,
            gyroscopic: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be ≥ 1".into()));
        }
        if self.cfm_default < 0.0 {
            return Err(Error::Config("cfm must be ≥ 0".into()));
        }
        if self.mode == SolveMode::EliminateDirect
            && !(self.rank_tolerance > 0.0 && self.rank_tolerance < 1.0)
        {
            return Err(Error::Config(
                "eliminate_direct requires rank_tolerance in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Per-step solver report.
#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    pub iterations_used: usize,
    /// Largest complementarity/linear residual of the returned multipliers.
    pub residual: f64,
    /// Rank of the bilateral Jacobian (eliminate_direct mode).
    pub rank: usize,
    /// Rows removed as redundant, as (joint index, row slot); empty in
    /// pgs_cfm mode. Disclosed on purpose.
    pub dropped_rows: Vec<(usize, usize)>,
    pub singular_flag: bool,
}

/// The assembled operator `A = J·M⁻¹·Jᵀ + diag(cfm/dt)` and right-hand side.
///
/// Kept in matrix-free form: per-row weighted Jacobians `M⁻¹·Jᵀ` allow O(1)
/// row updates in PGS; `dense()` materializes A only for the direct path.
pub struct ConstraintSystem {
    pub rows: Vec<ConstraintRow>,
    /// M⁻¹·J per row and side.
    wj_a: Vec<Jac6>,
    wj_b: Vec<Jac6>,
    /// Σᵢᵢ = cfm/dt.
    sigma: Vec<f64>,
    /// Aᵢᵢ + Σᵢᵢ.
    diag: Vec<f64>,
    pub b: Vec<f64>,
    n_bodies: usize,
}

impl ConstraintSystem {
    /// Assemble from rows at the current body states.
    ///
    /// `accumulators` hold this step's external forces; the predicted
    /// unconstrained velocity `v + dt·M⁻¹·f_ext` enters the right-hand side.
    pub fn assemble(
        rows: Vec<ConstraintRow>,
        bodies: &[RigidBody],
        mass: &MassMatrix,
        accumulators: &[ForceAccumulator],
        dt: f64,
    ) -> Self {
        let n_bodies = bodies.len();
        let mut v_pred: Vec<(Vec3, Vec3)> = Vec::with_capacity(n_bodies);
        for (i, body) in bodies.iter().enumerate() {
            let (dv, dw) = mass.apply_inv(i, &(accumulators[i].force * dt), &(accumulators[i].torque * dt));
            v_pred.push((body.twist.linear + dv, body.twist.angular + dw));
        }

        let m = rows.len();
        let mut wj_a = Vec::with_capacity(m);
        let mut wj_b = Vec::with_capacity(m);
        let mut sigma = Vec::with_capacity(m);
        let mut diag = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        for row in &rows {
            let wa = match row.body_a {
                Some(i) => {
                    let (lin, ang) = mass.apply_inv(i, &row.j_a.lin, &row.j_a.ang);
                    Jac6 { lin, ang }
                }
                None => Jac6::zero(),
            };
            let wb = match row.body_b {
                Some(i) => {
                    let (lin, ang) = mass.apply_inv(i, &row.j_b.lin, &row.j_b.ang);
                    Jac6 { lin, ang }
                }
                None => Jac6::zero(),
            };
            let mut a_ii = 0.0;
            let mut jv = 0.0;
            if let Some(i) = row.body_a {
                a_ii += row.j_a.lin.dot(&wa.lin) + row.j_a.ang.dot(&wa.ang);
                jv += row.j_a.dot(&v_pred[i].0, &v_pred[i].1);
            }
            if let Some(i) = row.body_b {
                a_ii += row.j_b.lin.dot(&wb.lin) + row.j_b.ang.dot(&wb.ang);
                jv += row.j_b.dot(&v_pred[i].0, &v_pred[i].1);
            }
            let s = row.cfm / dt;
            wj_a.push(wa);
            wj_b.push(wb);
            sigma.push(s);
            diag.push(a_ii + s);
            b.push(row.bias - jv);
        }
        Self {
            rows,
            wj_a,
            wj_b,
            sigma,
            diag,
            b,
            n_bodies,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigma[i]
    }

    pub(crate) fn weighted(&self, i: usize) -> (&Jac6, &Jac6) {
        (&self.wj_a[i], &self.wj_b[i])
    }

    pub fn n_bodies(&self) -> usize {
        self.n_bodies
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.lo, r.hi)).collect()
    }

    /// `A·λ` including the regularization diagonal.
    pub fn apply(&self, lambda: &[f64]) -> Vec<f64> {
        let mut vel = vec![(Vec3::zeros(), Vec3::zeros()); self.n_bodies];
        for (i, row) in self.rows.iter().enumerate() {
            let l = lambda[i];
            if l == 0.0 {
                continue;
            }
            if let Some(bi) = row.body_a {
                vel[bi].0 += self.wj_a[i].lin * l;
                vel[bi].1 += self.wj_a[i].ang * l;
            }
            if let Some(bi) = row.body_b {
                vel[bi].0 += self.wj_b[i].lin * l;
                vel[bi].1 += self.wj_b[i].ang * l;
            }
        }
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut out = self.sigma[i] * lambda[i];
                if let Some(bi) = row.body_a {
                    out += row.j_a.dot(&vel[bi].0, &vel[bi].1);
                }
                if let Some(bi) = row.body_b {
                    out += row.j_b.dot(&vel[bi].0, &vel[bi].1);
                }
                out
            })
            .collect()
    }

    /// Densify A (direct mode and tests).
    pub fn dense(&self) -> DMatrix<f64> {
        let m = self.len();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut v = 0.0;
                if let (Some(bi), Some(bj)) = (self.rows[i].body_a, self.rows[j].body_a) {
                    if bi == bj {
                        v += self.rows[i].j_a.dot(&self.wj_a[j].lin, &self.wj_a[j].ang);
                    }
                }
                if let (Some(bi), Some(bj)) = (self.rows[i].body_a, self.rows[j].body_b) {
                    if bi == bj {
                        v += self.rows[i].j_a.dot(&self.wj_b[j].lin, &self.wj_b[j].ang);
                    }
                }
                if let (Some(bi), Some(bj)) = (self.rows[i].body_b, self.rows[j].body_a) {
                    if bi == bj {
                        v += self.rows[i].j_b.dot(&self.wj_a[j].lin, &self.wj_a[j].ang);
                    }
                }
                if let (Some(bi), Some(bj)) = (self.rows[i].body_b, self.rows[j].body_b) {
                    if bi == bj {
                        v += self.rows[i].j_b.dot(&self.wj_b[j].lin, &self.wj_b[j].ang);
                    }
                }
                if i == j {
                    v += self.sigma[i];
                }
                a[(i, j)] = v;
            }
        }
        a
    }

    /// Convert multipliers to per-body impulses `Jᵀ·λ`.
    pub fn impulses(&self, lambda: &[f64]) -> Vec<(Vec3, Vec3)> {
        let mut out = vec![(Vec3::zeros(), Vec3::zeros()); self.n_bodies];
        for (i, row) in self.rows.iter().enumerate() {
            let l = lambda[i];
            if let Some(bi) = row.body_a {
                out[bi].0 += row.j_a.lin * l;
                out[bi].1 += row.j_a.ang * l;
            }
            if let Some(bi) = row.body_b {
                out[bi].0 += row.j_b.lin * l;
                out[bi].1 += row.j_b.ang * l;
            }
        }
        out
    }

    /// Largest complementarity/linear residual of a candidate solution.
    pub fn residual(&self, lambda: &[f64]) -> f64 {
        let w = self.apply(lambda);
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let r = w[i] - self.b[i];
            let v = if lambda[i] <= row.lo + f64::EPSILON && row.lo.is_finite() {
                (-r).max(0.0)
            } else if lambda[i] >= row.hi - f64::EPSILON && row.hi.is_finite() {
                r.max(0.0)
            } else {
                r.abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

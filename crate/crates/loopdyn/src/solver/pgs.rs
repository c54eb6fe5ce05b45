//! Projected Gauss-Seidel over the assembled system.
//!
//! Row update: `λᵢ ← clamp(λᵢ + (bᵢ − Aᵢ·λ)/Aᵢᵢ, loᵢ, hiᵢ)`, implemented
//! with per-body velocity accumulators so each update is O(1). Warm
//! starting from the previous step's multipliers is what makes the method
//! usable on stiff loops.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::solver::{ConstraintSystem, SolveDiagnostics, SolverConfig};

/// Warm-start impulses are scaled down by this factor each step.
///
/// On redundant systems the null-space component of λ is barely pulled back
/// by the regularization (rate cfm/(dt·Aᵢᵢ) per sweep), so a pure carry-over
/// lets it random-walk without bound under the Baumgarte feedback. The decay
/// gives null modes a restoring force while costing the load-carrying modes
/// only a few recovery sweeps per step.
const WARM_START_DECAY: f64 = 0.95;

/// Solve the bounded system by PGS sweeps.
///
/// `warm_start` must match the row count when given; multipliers start
/// there (decayed by [`WARM_START_DECAY`]) and the accumulated `M⁻¹·Jᵀ·λ`
/// is primed accordingly. Terminates after `config.iterations` sweeps or
/// when the largest impulse change in a sweep drops below
/// `config.tolerance`.
pub fn pgs_solve(
    system: &ConstraintSystem,
    warm_start: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let m = system.len();
    let mut lambda = match warm_start {
        Some(w) if w.len() == m => w.iter().map(|l| l * WARM_START_DECAY).collect(),
        _ => vec![0.0; m],
    };
    // Clamp warm-start values into the current bounds (bounds move when
    // motor limits change between steps).
    for (i, row) in system.rows.iter().enumerate() {
        lambda[i] = lambda[i].clamp(row.lo, row.hi);
    }

    let mut vel: Vec<(Vec3, Vec3)> = vec![(Vec3::zeros(), Vec3::zeros()); system.n_bodies()];
    for (i, row) in system.rows.iter().enumerate() {
        let l = lambda[i];
        if l != 0.0 {
            let (wa, wb) = system.weighted(i);
            if let Some(bi) = row.body_a {
                vel[bi].0 += wa.lin * l;
                vel[bi].1 += wa.ang * l;
            }
            if let Some(bi) = row.body_b {
                vel[bi].0 += wb.lin * l;
                vel[bi].1 += wb.ang * l;
            }
        }
    }

    let mut iterations_used = 0;
    for _ in 0..config.iterations {
        iterations_used += 1;
        let mut max_delta: f64 = 0.0;
        for (i, row) in system.rows.iter().enumerate() {
            let diag = system.diag(i);
            if diag <= 0.0 {
                return Err(Error::NonFiniteLambda { row: i });
            }
            let mut jv = system.sigma(i) * lambda[i];
            if let Some(bi) = row.body_a {
                jv += row.j_a.dot(&vel[bi].0, &vel[bi].1);
            }
            if let Some(bi) = row.body_b {
                jv += row.j_b.dot(&vel[bi].0, &vel[bi].1);
            }
            let delta = (system.b[i] - jv) / diag;
            let new_lambda = (lambda[i] + delta).clamp(row.lo, row.hi);
            let applied = new_lambda - lambda[i];
            if applied != 0.0 {
                let (wa, wb) = system.weighted(i);
                if let Some(bi) = row.body_a {
                    vel[bi].0 += wa.lin * applied;
                    vel[bi].1 += wa.ang * applied;
                }
                if let Some(bi) = row.body_b {
                    vel[bi].0 += wb.lin * applied;
                    vel[bi].1 += wb.ang * applied;
                }
            }
            lambda[i] = new_lambda;
            max_delta = max_delta.max(applied.abs());
        }
        if !max_delta.is_finite() {
            let bad = lambda.iter().position(|l| !l.is_finite()).unwrap_or(0);
            return Err(Error::NonFiniteLambda { row: bad });
        }
        if max_delta < config.tolerance {
            break;
        }
    }

    if let Some(bad) = lambda.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonFiniteLambda { row: bad });
    }

    let diagnostics = SolveDiagnostics {
        iterations_used,
        residual: system.residual(&lambda),
        rank: 0,
        dropped_rows: Vec::new(),
        singular_flag: false,
    };
    Ok((lambda, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{ForceAccumulator, MassMatrix, RigidBody};
    use crate::math::{Mat3, Pose};
    use crate::rows::{ConstraintRow, Jac6, RowKind};
    use approx::assert_relative_eq;

    /// Single body, one row along x with J = eₓ: A = 1/m.
    fn scalar_system(mass: f64, bias: f64, cfm: f64, lo: f64, hi: f64) -> ConstraintSystem {
        let body =
            RigidBody::new_dynamic("b", mass, Mat3::identity(), Pose::identity()).unwrap();
        let bodies = vec![body];
        let row = ConstraintRow {
            body_a: None,
            body_b: Some(0),
            j_a: Jac6::zero(),
            j_b: Jac6 {
                lin: crate::math::Vec3::x(),
                ang: crate::math::Vec3::zeros(),
            },
            bias,
            cfm,
            lo,
            hi,
            lambda: 0.0,
            c: 0.0,
            joint: 0,
            slot: 0,
            kind: RowKind::Bilateral,
        };
        let mass_op = MassMatrix::assemble(&bodies).unwrap();
        let acc = vec![ForceAccumulator::default()];
        ConstraintSystem::assemble(vec![row], &bodies, &mass_op, &acc, 1.0)
    }

    #[test]
    fn one_by_one_unbounded_solves_in_one_sweep() {
        // A = 2 (m = 0.5), b = 4 → λ = 2.
        let sys = scalar_system(0.5, 4.0, 0.0, f64::NEG_INFINITY, f64::INFINITY);
        let config = SolverConfig::default();
        let (lambda, diag) = pgs_solve(&sys, None, &config).unwrap();
        assert_relative_eq!(lambda[0], 2.0, epsilon = 1e-12);
        assert!(diag.residual < 1e-12);
    }

    #[test]
    fn bounded_row_clamps() {
        let sys = scalar_system(0.5, 4.0, 0.0, -0.5, 0.5);
        let (lambda, diag) = pgs_solve(&sys, None, &SolverConfig::default()).unwrap();
        assert_relative_eq!(lambda[0], 0.5, epsilon = 1e-12);
        // Clamped at hi with positive remaining push: complementarity holds.
        assert!(diag.residual >= 0.0);
    }

    #[test]
    fn duplicated_regularized_rows_split_symmetrically() {
        let body =
            RigidBody::new_dynamic("b", 1.0, Mat3::identity(), Pose::identity()).unwrap();
        let bodies = vec![body];
        let mk = |slot| ConstraintRow {
            body_a: None,
            body_b: Some(0),
            j_a: Jac6::zero(),
            j_b: Jac6 {
                lin: crate::math::Vec3::x(),
                ang: crate::math::Vec3::zeros(),
            },
            bias: 1.0,
            cfm: 0.5,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lambda: 0.0,
            c: 0.0,
            joint: 0,
            slot,
            kind: RowKind::Bilateral,
        };
        let mass_op = MassMatrix::assemble(&bodies).unwrap();
        let acc = vec![ForceAccumulator::default()];
        let sys = ConstraintSystem::assemble(vec![mk(0), mk(1)], &bodies, &mass_op, &acc, 1.0);
        // The antisymmetric error mode decays at 1 − O(cfm) per sweep, so
        // the sweep budget must grow as cfm shrinks.
        let config = SolverConfig {
            iterations: 500,
            tolerance: 1e-15,
            ..SolverConfig::default()
        };
        // Symmetric warm start; the regularized fixed point is unique and
        // symmetric, so the converged multipliers split equally.
        let (lambda, _) = pgs_solve(&sys, Some(&[0.3, 0.3]), &config).unwrap();
        assert_relative_eq!(lambda[0], lambda[1], epsilon = 1e-9);
        assert_relative_eq!(lambda[0], 1.0 / 2.5, epsilon = 1e-9);
        let r = sys.residual(&lambda);
        assert!(r < 1e-9, "residual {r}");
    }

    #[test]
    fn warm_start_outside_new_bounds_is_clamped() {
        let sys = scalar_system(1.0, 0.0, 0.0, -0.1, 0.1);
        let (lambda, _) = pgs_solve(&sys, Some(&[5.0]), &SolverConfig::default()).unwrap();
        assert!(lambda[0] <= 0.1 + 1e-15);
    }
}

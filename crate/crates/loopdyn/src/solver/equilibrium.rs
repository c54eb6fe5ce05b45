//! Static-equilibrium indeterminacy detection for the direct mode.
//!
//! A free motion direction (null vector of the stacked constraint, motor
//! and damping Jacobian) with zero projected external force *and* zero
//! projected stiffness is a configuration-space symmetry: nothing in the
//! model determines how that coordinate evolves from rest — the textbook
//! case being a cylinder hinged along its own principal axis. Equation-based
//! tools hit a singular system matrix there; this check reproduces that
//! behavior explicitly by assembling the projected equilibrium stiffness
//! and failing on its zero pivot. Directions anchored by damping or motor
//! rows, or with a gravity component (a hanging pendulum's restoring
//! stiffness), pass.
//!
//! Only consulted in eliminate_direct mode while every dynamic body is at
//! rest; pgs_cfm proceeds regardless, its regularization playing the role
//! of the stabilizing elements.

use nalgebra::{DMatrix, DVector};

use crate::body::{ForceAccumulator, MassMatrix, RigidBody};
use crate::error::{Error, Result};
use crate::joint::Joint;
use crate::rows::{damping_rows, displace_pose, joint_rows, motor_rows, StabilizationParams};
use crate::solver::redundancy::dynamic_dof_offsets;
use crate::solver::SolverConfig;

/// Perturbation step for the stiffness finite differences (m and rad).
const FD_STEP: f64 = 1e-4;
/// Relative threshold on the projected generalized force.
const FORCE_TOL: f64 = 1e-9;
/// Relative threshold on projected stiffness pivots.
const STIFFNESS_TOL: f64 = 1e-6;

/// Twists below this magnitude count as "at rest".
pub const REST_SPEED: f64 = 1e-9;

pub fn all_at_rest(bodies: &[RigidBody]) -> bool {
    bodies.iter().filter(|b| !b.is_static).all(|b| {
        b.twist.linear.amax() <= REST_SPEED && b.twist.angular.amax() <= REST_SPEED
    })
}

/// Stack every row's Jacobian over the dynamic DOFs at the given poses.
fn stacked_jacobian(
    bodies: &[RigidBody],
    joints: &[Joint],
    motor_targets: &[Option<f64>],
    dt: f64,
    offsets: &[Option<usize>],
    n_dof: usize,
) -> Result<DMatrix<f64>> {
    let params = StabilizationParams { beta: 0.0, cfm: 0.0 };
    let mut rows = Vec::new();
    for (ji, joint) in joints.iter().enumerate() {
        rows.extend(joint_rows(ji, joint, bodies, dt, &params)?);
        rows.extend(motor_rows(ji, joint, bodies, dt, motor_targets[ji])?);
        rows.extend(damping_rows(ji, joint, bodies, dt)?);
    }
    let mut j = DMatrix::zeros(rows.len(), n_dof);
    for (ri, row) in rows.iter().enumerate() {
        let mut put = |body: Option<usize>, jac: &crate::rows::Jac6| {
            if let Some(b) = body {
                if let Some(off) = offsets[b] {
                    for k in 0..3 {
                        j[(ri, off + k)] += jac.lin[k];
                        j[(ri, off + 3 + k)] += jac.ang[k];
                    }
                }
            }
        };
        put(row.body_a, &row.j_a);
        put(row.body_b, &row.j_b);
    }
    Ok(j)
}

/// Orthonormal basis of the free-motion space: right singular vectors whose
/// singular values fall below the rank tolerance.
///
/// The matrix is padded with zero rows to at least n×n first; a thin SVD of
/// a wide matrix would omit exactly the right singular vectors that span
/// the null space.
fn null_basis(j: &DMatrix<f64>, rank_tolerance: f64) -> Vec<DVector<f64>> {
    let n = j.ncols();
    let m = j.nrows();
    if m == 0 {
        return Vec::new();
    }
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(j);
        p
    } else {
        j.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("svd of stacked jacobian");
    let s_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let threshold = rank_tolerance * s_max.max(f64::MIN_POSITIVE);
    let mut basis = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= threshold {
            basis.push(v_t.row(k).transpose());
        }
    }
    // Singular values beyond min(m, n) are implicitly zero.
    for k in svd.singular_values.len()..n {
        basis.push(v_t.row(k).transpose());
    }
    basis
}

/// Generalized external force vector over the dynamic DOFs.
fn force_vector(
    accumulators: &[ForceAccumulator],
    offsets: &[Option<usize>],
    n_dof: usize,
) -> DVector<f64> {
    let mut f = DVector::zeros(n_dof);
    for (i, acc) in accumulators.iter().enumerate() {
        if let Some(off) = offsets[i] {
            for k in 0..3 {
                f[off + k] = acc.force[k];
                f[off + 3 + k] = acc.torque[k];
            }
        }
    }
    f
}

/// Displace all dynamic bodies along a stacked DOF direction.
fn displaced(bodies: &[RigidBody], offsets: &[Option<usize>], dir: &DVector<f64>, h: f64) -> Vec<RigidBody> {
    let mut out = bodies.to_vec();
    for (i, body) in out.iter_mut().enumerate() {
        if let Some(off) = offsets[i] {
            let lin = crate::math::Vec3::new(dir[off], dir[off + 1], dir[off + 2]);
            let ang = crate::math::Vec3::new(dir[off + 3], dir[off + 4], dir[off + 5]);
            body.pose = displace_pose(&body.pose, &lin, &ang, h);
        }
    }
    out
}

/// Check an at-rest scene for indeterminate free directions.
///
/// Returns `Err(SingularSystem)` when some zero-force free direction also
/// has (numerically) zero projected stiffness.
pub fn static_equilibrium_check(
    bodies: &[RigidBody],
    joints: &[Joint],
    motor_targets: &[Option<f64>],
    accumulators: &[ForceAccumulator],
    mass: &MassMatrix,
    config: &SolverConfig,
) -> Result<()> {
    let (offsets, n_dof) = dynamic_dof_offsets(mass);
    if n_dof == 0 || joints.is_empty() {
        return Ok(());
    }
    let j0 = stacked_jacobian(bodies, joints, motor_targets, config.dt, &offsets, n_dof)?;
    if j0.nrows() == 0 {
        return Ok(());
    }
    let null = null_basis(&j0, config.rank_tolerance);
    if null.is_empty() {
        return Ok(());
    }

    let f = force_vector(accumulators, &offsets, n_dof);
    let f_scale = f.norm().max(1.0);
    let flagged: Vec<&DVector<f64>> = null
        .iter()
        .filter(|n| n.dot(&f).abs() <= FORCE_TOL * f_scale)
        .collect();
    if flagged.is_empty() {
        return Ok(());
    }

    // Projected stiffness: derivative of the null-space-projected force
    // along each flagged direction, by central differences. The projector
    // N·Nᵀ is basis-independent, so re-deriving the null space at the
    // perturbed configuration is well defined even though individual
    // singular vectors are not.
    let k = flagged.len();
    let mut stiffness = DMatrix::zeros(k, k);
    for (cj, nj) in flagged.iter().enumerate() {
        let project = |sign: f64| -> Result<DVector<f64>> {
            let moved = displaced(bodies, &offsets, nj, sign * FD_STEP);
            let jm = stacked_jacobian(&moved, joints, motor_targets, config.dt, &offsets, n_dof)?;
            let basis = null_basis(&jm, config.rank_tolerance);
            let mut p = DVector::zeros(n_dof);
            for b in &basis {
                p += b * b.dot(&f);
            }
            Ok(p)
        };
        let plus = project(1.0)?;
        let minus = project(-1.0)?;
        let dpf = (plus - minus) / (2.0 * FD_STEP);
        for (ci, ni) in flagged.iter().enumerate() {
            stiffness[(ci, cj)] = ni.dot(&dpf);
        }
    }
    let sym = (&stiffness + stiffness.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().map(|e| e.abs()).fold(0.0_f64, f64::max);
    let min_eig = eig.eigenvalues.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    if min_eig <= STIFFNESS_TOL * f_scale.max(max_eig) {
        return Err(Error::SingularSystem(format!(
            "static equilibrium: {} free direction(s) with zero projected force and zero \
             stiffness (smallest equilibrium pivot {min_eig:.3e}); add damping, a drive, or an \
             initial condition to determine the motion",
            k
        )));
    }
    Ok(())
}

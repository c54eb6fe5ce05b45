//! Velocity-level constraint rows generated from joints.
//!
//! Each scalar row relates the twists of two bodies through a pair of
//! 6-component Jacobian blocks, `J_a·u_a + J_b·u_b = ḋ(C)`, where `C` is the
//! row's signed position-level error. The Baumgarte bias `−(β/dt)·C` feeds
//! position error back into the velocity target, canceling drift.
//!
//! All direction vectors entering a row (point-row basis, axis complements)
//! are body-fixed: they are constructed once in the joint's local axis frame
//! and rotated through the anchor of the body they belong to. This makes
//! every `C` an exact differentiable function of the two poses whose
//! derivative *is* the row Jacobian, which the finite-difference checks rely
//! on.

use nalgebra::Unit;

use crate::body::RigidBody;
use crate::error::{Error, Result};
use crate::joint::{Joint, JointKind, MotorMode};
use crate::math::{orthonormal_complement, Pose, Vec3};

/// Half of a constraint row: the Jacobian block acting on one body's twist.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jac6 {
    pub lin: Vec3,
    pub ang: Vec3,
}

impl Jac6 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dot(&self, linear: &Vec3, angular: &Vec3) -> f64 {
        self.lin.dot(linear) + self.ang.dot(angular)
    }
}

/// What produced a row; drives bounds handling and force bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Bilateral,
    Motor,
    Damping,
}

/// One scalar velocity-level constraint.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub body_a: Option<usize>,
    pub body_b: Option<usize>,
    pub j_a: Jac6,
    pub j_b: Jac6,
    /// Velocity target: Baumgarte term for bilateral rows, drive velocity
    /// for motor rows, zero for damping rows.
    pub bias: f64,
    /// Regularization (constraint force mixing); the assembled system adds
    /// `cfm/dt` to this row's diagonal. Always ≥ 0.
    pub cfm: f64,
    pub lo: f64,
    pub hi: f64,
    /// Accumulated impulse (N·s or N·m·s); used for warm starting.
    pub lambda: f64,
    /// Signed position-level error of this row at construction time.
    pub c: f64,
    /// Index of the joint this row belongs to, plus the slot within it.
    pub joint: usize,
    pub slot: usize,
    pub kind: RowKind,
}

/// Baumgarte and regularization settings used while building rows.
#[derive(Debug, Clone, Copy)]
pub struct StabilizationParams {
    /// Dimensionless Baumgarte factor; the per-step bias is `−(β/dt)·C`.
    pub beta: f64,
    /// Regularization applied to bilateral joint rows.
    pub cfm: f64,
}

impl Default for StabilizationParams {
    fn default() -> Self {
        Self { beta: 0.2, cfm: 1e-9 }
    }
}

/// World-frame geometry of a joint at the current poses.
struct Frames {
    /// Anchor point and axes on the parent side (world attachments when the
    /// parent is the world).
    pa: Vec3,
    axis_a: Vec3,
    u_a: Vec3,
    w_a: Vec3,
    /// Parent wrench reference: the parent's center of mass, or the anchor
    /// point itself for world attachments.
    com_a: Vec3,
    /// Child side.
    pb: Vec3,
    axis_b: Vec3,
    u_b: Vec3,
    w_b: Vec3,
    com_b: Vec3,
    rot_a: crate::math::Quat,
    rot_b: crate::math::Quat,
}

fn body_ref<'a>(
    bodies: &'a [RigidBody],
    idx: usize,
    joint: &Joint,
) -> Result<&'a RigidBody> {
    bodies.get(idx).ok_or_else(|| Error::UnknownBody {
        joint: joint.name.clone(),
        body: format!("#{idx}"),
    })
}

fn frames(joint: &Joint, bodies: &[RigidBody]) -> Result<Frames> {
    let (anchor_a_world, com_a) = match joint.parent {
        Some(i) => {
            let b = body_ref(bodies, i, joint)?;
            let anchor = b.pose.compose(&joint.anchor_parent);
            (anchor, b.pose.position)
        }
        None => (joint.anchor_parent, joint.anchor_parent.position),
    };
    let child = body_ref(bodies, joint.child, joint)?;
    let anchor_b_world = child.pose.compose(&joint.anchor_child);

    let (u_loc, w_loc) = orthonormal_complement(&joint.axis);
    let a = joint.axis.into_inner();
    Ok(Frames {
        pa: anchor_a_world.position,
        axis_a: anchor_a_world.rotate(&a),
        u_a: anchor_a_world.rotate(&u_loc),
        w_a: anchor_a_world.rotate(&w_loc),
        com_a,
        pb: anchor_b_world.position,
        axis_b: anchor_b_world.rotate(&a),
        u_b: anchor_b_world.rotate(&u_loc),
        w_b: anchor_b_world.rotate(&w_loc),
        com_b: child.pose.position,
        rot_a: anchor_a_world.orientation,
        rot_b: anchor_b_world.orientation,
    })
}

struct RowBuilder<'a> {
    joint_index: usize,
    joint: &'a Joint,
    bias_scale: f64, // β/dt
    cfm: f64,
    rows: Vec<ConstraintRow>,
}

impl<'a> RowBuilder<'a> {
    fn push(&mut self, j_a: Jac6, j_b: Jac6, c: f64) {
        let slot = self.rows.len();
        self.rows.push(ConstraintRow {
            body_a: self.joint.parent,
            body_b: Some(self.joint.child),
            j_a,
            j_b,
            bias: -self.bias_scale * c,
            cfm: self.cfm,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lambda: 0.0,
            c,
            joint: self.joint_index,
            slot,
            kind: RowKind::Bilateral,
        });
    }

    /// Three point-coincidence rows on the world basis: `C = e·(p_b − p_a)`.
    ///
    /// The parent block is filled even for world attachments (body_a stays
    /// `None`, so solvers skip it) so reaction reporting can recover the
    /// ground-side wrench.
    fn point_rows(&mut self, f: &Frames) {
        let d = f.pb - f.pa;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = 1.0;
            let j_a = Jac6 {
                lin: -e,
                ang: -(f.pa - f.com_a).cross(&e),
            };
            let j_b = Jac6 {
                lin: e,
                ang: (f.pb - f.com_b).cross(&e),
            };
            self.push(j_a, j_b, d[k]);
        }
    }

    /// Axis-alignment row `C = t·b` for a parent-fixed `t` and child-fixed `b`.
    fn axis_pair_row(&mut self, t: Vec3, b: Vec3) {
        let g = t.cross(&b);
        let j_a = Jac6 { lin: Vec3::zeros(), ang: g };
        let j_b = Jac6 {
            lin: Vec3::zeros(),
            ang: -g,
        };
        self.push(j_a, j_b, t.dot(&b));
    }

    /// Transverse translation row `C = t·(p_b − p_a)` with parent-fixed `t`.
    fn transverse_row(&mut self, f: &Frames, t: Vec3) {
        let j_a = Jac6 {
            lin: -t,
            ang: -(f.pb - f.com_a).cross(&t),
        };
        let j_b = Jac6 {
            lin: t,
            ang: (f.pb - f.com_b).cross(&t),
        };
        self.push(j_a, j_b, t.dot(&(f.pb - f.pa)));
    }

    /// Full orientation lock as three sine-measure rows with orthonormal
    /// gradients at alignment: (w_a·ax_b), (ax_a·u_b), (u_a·w_b).
    fn orientation_rows(&mut self, f: &Frames) {
        self.axis_pair_row(f.w_a, f.axis_b);
        self.axis_pair_row(f.axis_a, f.u_b);
        self.axis_pair_row(f.u_a, f.w_b);
    }
}

/// Build the bilateral rows of a joint. Returns exactly
/// `joint.kind.row_count()` rows with Baumgarte biases `−(β/dt)·C`.
pub fn joint_rows(
    joint_index: usize,
    joint: &Joint,
    bodies: &[RigidBody],
    dt: f64,
    params: &StabilizationParams,
) -> Result<Vec<ConstraintRow>> {
    assert!(dt > 0.0, "dt must be positive");
    let f = frames(joint, bodies)?;
    let mut b = RowBuilder {
        joint_index,
        joint,
        bias_scale: params.beta / dt,
        cfm: params.cfm,
        rows: Vec::with_capacity(joint.kind.row_count()),
    };
    match joint.kind {
        JointKind::Spherical => b.point_rows(&f),
        JointKind::Revolute => {
            b.point_rows(&f);
            b.axis_pair_row(f.u_a, f.axis_b);
            b.axis_pair_row(f.w_a, f.axis_b);
        }
        JointKind::Prismatic => {
            b.orientation_rows(&f);
            b.transverse_row(&f, f.u_a);
            b.transverse_row(&f, f.w_a);
        }
        JointKind::Fixed => {
            b.point_rows(&f);
            b.orientation_rows(&f);
        }
    }
    debug_assert_eq!(b.rows.len(), joint.kind.row_count());
    Ok(b.rows)
}

/// Jacobian of the joint's single free coordinate (rotation about or
/// translation along the parent-side world axis).
fn drive_jacobian(joint: &Joint, f: &Frames) -> (Jac6, Jac6) {
    match joint.kind {
        JointKind::Revolute => {
            let j_a = Jac6 { lin: Vec3::zeros(), ang: -f.axis_a };
            let j_b = Jac6 { lin: Vec3::zeros(), ang: f.axis_a };
            (j_a, j_b)
        }
        JointKind::Prismatic => {
            let t = f.axis_a;
            let j_a = Jac6 {
                lin: -t,
                ang: -(f.pb - f.com_a).cross(&t),
            };
            let j_b = Jac6 {
                lin: t,
                ang: (f.pb - f.com_b).cross(&t),
            };
            (j_a, j_b)
        }
        _ => unreachable!("drive_jacobian requires a single-DOF joint"),
    }
}

/// Current value of the joint's free coordinate: angle about the axis
/// (revolute, rad) or slide along it (prismatic, m).
pub fn joint_coordinate(joint: &Joint, bodies: &[RigidBody]) -> Result<f64> {
    let f = frames(joint, bodies)?;
    Ok(match joint.kind {
        JointKind::Revolute => {
            let s = f.u_a.cross(&f.u_b).dot(&f.axis_a);
            let c = f.u_a.dot(&f.u_b);
            s.atan2(c)
        }
        JointKind::Prismatic => f.axis_a.dot(&(f.pb - f.pa)),
        _ => 0.0,
    })
}

/// Relative rate of the joint's free coordinate given current twists.
fn drive_rate(j_a: &Jac6, j_b: &Jac6, joint: &Joint, bodies: &[RigidBody]) -> f64 {
    let mut rate = 0.0;
    if let Some(i) = joint.parent {
        let t = &bodies[i].twist;
        rate += j_a.dot(&t.linear, &t.angular);
    }
    let t = &bodies[joint.child].twist;
    rate += j_b.dot(&t.linear, &t.angular);
    rate
}

/// Build the motor row of a joint: none when unmotored, one drive row along
/// the joint axis otherwise. `target_override` substitutes the scheduled
/// actuation target for the motor's stored one.
pub fn motor_rows(
    joint_index: usize,
    joint: &Joint,
    bodies: &[RigidBody],
    dt: f64,
    target_override: Option<f64>,
) -> Result<Vec<ConstraintRow>> {
    let Some(motor) = joint.motor else {
        return Ok(Vec::new());
    };
    if !joint.kind.has_axis() {
        return Err(Error::MotorOnUnsupportedJoint {
            joint: joint.name.clone(),
            kind: joint.kind.name().to_string(),
        });
    }
    let f = frames(joint, bodies)?;
    let (j_a, j_b) = drive_jacobian(joint, &f);
    let target = target_override.unwrap_or(motor.target);
    let bias = match motor.mode {
        MotorMode::VelocityDrive => target,
        MotorMode::PositionDrive => {
            let q = joint_coordinate(joint, bodies)?;
            let rate = drive_rate(&j_a, &j_b, joint, bodies);
            motor.kp * (target - q) - motor.kd * rate
        }
    };
    let limit = motor.max_force * dt;
    Ok(vec![ConstraintRow {
        body_a: joint.parent,
        body_b: Some(joint.child),
        j_a,
        j_b,
        bias,
        cfm: 0.0,
        lo: -limit,
        hi: limit,
        lambda: 0.0,
        c: 0.0,
        joint: joint_index,
        slot: joint.kind.row_count(),
        kind: RowKind::Motor,
    }])
}

/// Build the damping row of a joint: one regularized row along the free
/// axis with zero bias, equivalent to a viscous force `−d·(relative rate)`
/// at steady state. Only single-DOF joints carry damping rows.
pub fn damping_rows(
    joint_index: usize,
    joint: &Joint,
    bodies: &[RigidBody],
    _dt: f64,
) -> Result<Vec<ConstraintRow>> {
    if joint.damping <= 0.0 || !joint.kind.has_axis() {
        return Ok(Vec::new());
    }
    let f = frames(joint, bodies)?;
    let (j_a, j_b) = drive_jacobian(joint, &f);
    Ok(vec![ConstraintRow {
        body_a: joint.parent,
        body_b: Some(joint.child),
        j_a,
        j_b,
        bias: 0.0,
        // The assembled diagonal gains cfm/dt = 1/(d·dt), which makes the
        // row's steady-state generalized force exactly −d·(relative rate).
        cfm: 1.0 / joint.damping,
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lambda: 0.0,
        c: 0.0,
        joint: joint_index,
        slot: joint.kind.row_count() + 1,
        kind: RowKind::Damping,
    }])
}

/// Position-level violation of one joint.
#[derive(Debug, Clone, PartialEq)]
pub struct JointViolation {
    pub joint: String,
    /// Combined translational gap (m): gap norm for anchored kinds, norm of
    /// the transverse components for prismatic joints.
    pub position_error: f64,
    /// Axis misalignment (rad): angle between the two world joint axes for
    /// revolute joints, relative anchor rotation angle for prismatic/fixed.
    pub angle_error: f64,
}

/// Scene-wide violation summary; all entries are ≥ 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub joints: Vec<JointViolation>,
    pub max_position_error: f64,
    pub rms_position_error: f64,
    pub max_angle_error: f64,
    pub rms_angle_error: f64,
}

/// Recompute position-level gaps for every joint from current poses.
/// Pure observer: no state change.
pub fn measure_violation(joints: &[Joint], bodies: &[RigidBody]) -> Result<ViolationReport> {
    let mut report = ViolationReport::default();
    let mut sum_p = 0.0;
    let mut sum_a = 0.0;
    for joint in joints {
        let f = frames(joint, bodies)?;
        let d = f.pb - f.pa;
        let (position_error, angle_error) = match joint.kind {
            JointKind::Spherical => (d.norm(), 0.0),
            JointKind::Revolute => {
                let s = (f.u_a.dot(&f.axis_b)).hypot(f.w_a.dot(&f.axis_b));
                (d.norm(), s.clamp(0.0, 1.0).asin())
            }
            JointKind::Prismatic => {
                let p = (f.u_a.dot(&d)).hypot(f.w_a.dot(&d));
                (p, (f.rot_a.inverse() * f.rot_b).angle())
            }
            JointKind::Fixed => (d.norm(), (f.rot_a.inverse() * f.rot_b).angle()),
        };
        sum_p += position_error * position_error;
        sum_a += angle_error * angle_error;
        report.max_position_error = report.max_position_error.max(position_error);
        report.max_angle_error = report.max_angle_error.max(angle_error);
        report.joints.push(JointViolation {
            joint: joint.name.clone(),
            position_error,
            angle_error,
        });
    }
    let n = report.joints.len().max(1) as f64;
    report.rms_position_error = (sum_p / n).sqrt();
    report.rms_angle_error = (sum_a / n).sqrt();
    Ok(report)
}

/// Evaluate only the position-level errors of a joint's bilateral rows at
/// the given poses. Used by the finite-difference Jacobian checks.
pub fn row_position_errors(joint: &Joint, bodies: &[RigidBody]) -> Result<Vec<f64>> {
    let rows = joint_rows(0, joint, bodies, 1.0, &StabilizationParams { beta: 0.0, cfm: 0.0 })?;
    Ok(rows.iter().map(|r| r.c).collect())
}

/// Construct a unit twist direction for finite-difference perturbations.
pub fn unit_twist(k: usize) -> (Vec3, Vec3) {
    let mut lin = Vec3::zeros();
    let mut ang = Vec3::zeros();
    if k < 3 {
        lin[k] = 1.0;
    } else {
        ang[k - 3] = 1.0;
    }
    (lin, ang)
}

/// Move a pose along a twist `(v, ω)` for parameter `h`: positions advance
/// linearly, orientation by the exponential map. Matches the integrator's
/// update rule so FD derivatives correspond to row Jacobians.
pub fn displace_pose(pose: &Pose, lin: &Vec3, ang: &Vec3, h: f64) -> Pose {
    Pose {
        position: pose.position + lin * h,
        orientation: crate::math::quat_exp(ang * h) * pose.orientation,
    }
}

/// Deterministic world complement of an axis already expressed in world
/// coordinates; convenience for scene construction.
pub fn world_complement(axis: &Vec3) -> (Vec3, Vec3) {
    orthonormal_complement(&Unit::new_normalize(*axis))
}

/// World anchor points and wrench reference points of a joint at the
/// current poses: `(p_a, p_b, ref_a, com_b)`. `ref_a` is the parent COM or
/// the anchor itself for world attachments. Used for reaction reporting.
pub fn anchor_points(joint: &Joint, bodies: &[RigidBody]) -> Result<(Vec3, Vec3, Vec3, Vec3)> {
    let f = frames(joint, bodies)?;
    Ok((f.pa, f.pb, f.com_a, f.com_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::RigidBody;
    use crate::math::Mat3;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;

    fn rod(name: &str, at: Vec3) -> RigidBody {
        RigidBody::new_dynamic(name, 1.0, Mat3::identity() * 0.1, Pose::from_position(at)).unwrap()
    }

    /// Revolute joint between world (anchor at origin) and a body whose COM
    /// sits 1 m below, axis y.
    fn pendulum_joint() -> (Joint, Vec<RigidBody>) {
        let body = rod("bob", Vec3::new(0.0, 0.0, -1.0));
        let joint = Joint::new(
            "hinge",
            JointKind::Revolute,
            None,
            0,
            Pose::identity(),
            Pose::new(Vec3::new(0.0, 0.0, 1.0), UnitQuaternion::identity()),
            Vec3::y(),
        )
        .unwrap();
        (joint, vec![body])
    }

    #[test]
    fn assembled_revolute_has_five_zero_bias_rows() {
        let (joint, bodies) = pendulum_joint();
        let rows = joint_rows(0, &joint, &bodies, 1e-3, &StabilizationParams::default()).unwrap();
        assert_eq!(rows.len(), 5);
        for row in &rows {
            assert_relative_eq!(row.bias, 0.0, epsilon = 1e-12);
            assert_relative_eq!(row.c, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn anchor_gap_produces_baumgarte_bias() {
        // Child shifted by (1e-3, 0, 0): x point-row bias = −(β/dt)·C = −0.2.
        let (joint, mut bodies) = pendulum_joint();
        bodies[0].pose.position += Vec3::new(1e-3, 0.0, 0.0);
        let params = StabilizationParams { beta: 0.2, cfm: 0.0 };
        let rows = joint_rows(0, &joint, &bodies, 1e-3, &params).unwrap();
        assert_relative_eq!(rows[0].c, 1e-3, epsilon = 1e-15);
        assert_relative_eq!(rows[0].bias, -0.2, epsilon = 1e-12);
    }

    #[test]
    fn row_counts_for_all_kinds() {
        let a = rod("a", Vec3::zeros());
        let b = rod("b", Vec3::new(1.0, 0.0, 0.0));
        let bodies = vec![a, b];
        for kind in [
            JointKind::Revolute,
            JointKind::Prismatic,
            JointKind::Spherical,
            JointKind::Fixed,
        ] {
            let joint = Joint::new(
                "j",
                kind,
                Some(0),
                1,
                Pose::from_position(Vec3::new(0.5, 0.0, 0.0)),
                Pose::from_position(Vec3::new(-0.5, 0.0, 0.0)),
                Vec3::z(),
            )
            .unwrap();
            let rows =
                joint_rows(0, &joint, &bodies, 1e-3, &StabilizationParams::default()).unwrap();
            assert_eq!(rows.len(), kind.row_count(), "{:?}", kind);
        }
    }

    #[test]
    fn motor_row_absent_without_motor_and_brakes_with_one() {
        let (mut joint, mut bodies) = pendulum_joint();
        assert!(motor_rows(0, &joint, &bodies, 1e-3, None).unwrap().is_empty());

        joint = joint
            .with_motor(crate::joint::MotorParams::velocity(0.0, 10.0))
            .unwrap();
        bodies[0].twist.angular = Vec3::new(0.0, 2.0, 0.0); // swinging about the hinge
        let rows = motor_rows(0, &joint, &bodies, 1e-3, None).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        // Brake: zero target, relative rate 2 → the row opposes the motion.
        let rate = row.j_b.dot(&bodies[0].twist.linear, &bodies[0].twist.angular);
        assert_relative_eq!(rate, 2.0, epsilon = 1e-12);
        assert_relative_eq!(row.bias, 0.0);
        assert_relative_eq!(row.hi, 10.0 * 1e-3, epsilon = 1e-15);
        assert_relative_eq!(row.lo, -10.0 * 1e-3, epsilon = 1e-15);
    }

    #[test]
    fn zero_max_force_pins_lambda_to_zero() {
        let (joint, bodies) = pendulum_joint();
        let joint = joint
            .with_motor(crate::joint::MotorParams::velocity(1.0, 0.0))
            .unwrap();
        let rows = motor_rows(0, &joint, &bodies, 1e-3, None).unwrap();
        assert_eq!(rows[0].lo, 0.0);
        assert_eq!(rows[0].hi, 0.0);
    }

    #[test]
    fn damping_row_only_for_positive_damping() {
        let (joint, bodies) = pendulum_joint();
        assert!(damping_rows(0, &joint, &bodies, 1e-3).unwrap().is_empty());
        let joint = joint.with_damping(0.5).unwrap();
        let rows = damping_rows(0, &joint, &bodies, 1e-3).unwrap();
        assert_eq!(rows.len(), 1);
        assert_relative_eq!(rows[0].cfm, 2.0, epsilon = 1e-15);
        assert_eq!(rows[0].bias, 0.0);
    }

    #[test]
    fn violation_zero_when_assembled() {
        let (joint, bodies) = pendulum_joint();
        let report = measure_violation(std::slice::from_ref(&joint), &bodies).unwrap();
        assert_relative_eq!(report.max_position_error, 0.0, epsilon = 1e-12);
        assert_relative_eq!(report.max_angle_error, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn violation_reports_constructed_displacement() {
        let (joint, mut bodies) = pendulum_joint();
        bodies[0].pose.position += Vec3::new(0.0, 3e-4, 0.0);
        let report = measure_violation(std::slice::from_ref(&joint), &bodies).unwrap();
        assert_relative_eq!(report.joints[0].position_error, 3e-4, epsilon = 1e-15);
    }

    #[test]
    fn violation_invariant_under_rigid_transform() {
        let a = rod("a", Vec3::new(0.2, -0.1, 0.4));
        let mut b = rod("b", Vec3::new(1.1, 0.3, 0.2));
        b.pose.orientation = UnitQuaternion::from_euler_angles(0.1, 0.2, -0.3);
        let mut bodies = vec![a, b];
        let joint = Joint::new(
            "j",
            JointKind::Revolute,
            Some(0),
            1,
            Pose::from_position(Vec3::new(0.4, 0.0, 0.0)),
            Pose::from_position(Vec3::new(-0.5, 0.1, 0.0)),
            Vec3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        let before = measure_violation(std::slice::from_ref(&joint), &bodies).unwrap();

        let transform = Pose::new(
            Vec3::new(-3.0, 2.0, 7.0),
            UnitQuaternion::from_euler_angles(0.7, -0.4, 1.9),
        );
        for body in &mut bodies {
            body.pose = transform.compose(&body.pose);
        }
        let after = measure_violation(std::slice::from_ref(&joint), &bodies).unwrap();
        assert_relative_eq!(
            before.joints[0].position_error,
            after.joints[0].position_error,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            before.joints[0].angle_error,
            after.joints[0].angle_error,
            epsilon = 1e-12
        );
    }

    #[test]
    fn bias_zero_iff_violation_zero() {
        let (joint, mut bodies) = pendulum_joint();
        bodies[0].pose.orientation =
            UnitQuaternion::from_axis_angle(&Vec3::y_axis(), 0.7);
        // Keep the anchor coincident while rotating about the hinge axis:
        // position the COM accordingly.
        bodies[0].pose.position =
            Vec3::zeros() - bodies[0].pose.orientation * Vec3::new(0.0, 0.0, 1.0);
        let rows = joint_rows(0, &joint, &bodies, 1e-3, &StabilizationParams::default()).unwrap();
        for row in rows {
            assert_relative_eq!(row.c, 0.0, epsilon = 1e-12);
            assert_relative_eq!(row.bias, 0.0, epsilon = 1e-9);
        }
    }

    /// Central-difference check that each row's Jacobian is the derivative
    /// of its position error along arbitrary twist directions.
    fn fd_check(joint: &Joint, bodies: &[RigidBody], tol: f64) {
        let h = 1e-6;
        let base = row_position_errors(joint, bodies).unwrap();
        let n_rows = base.len();
        let rows = joint_rows(0, joint, bodies, 1.0, &StabilizationParams { beta: 0.0, cfm: 0.0 })
            .unwrap();
        let participants: Vec<usize> = joint.parent.iter().copied().chain([joint.child]).collect();
        for &bi in &participants {
            for k in 0..6 {
                let (lin, ang) = unit_twist(k);
                let mut plus = bodies.to_vec();
                plus[bi].pose = displace_pose(&bodies[bi].pose, &lin, &ang, h);
                let mut minus = bodies.to_vec();
                minus[bi].pose = displace_pose(&bodies[bi].pose, &lin, &ang, -h);
                let cp = row_position_errors(joint, &plus).unwrap();
                let cm = row_position_errors(joint, &minus).unwrap();
                for r in 0..n_rows {
                    let fd = (cp[r] - cm[r]) / (2.0 * h);
                    let jac = if Some(bi) == joint.parent {
                        rows[r].j_a.dot(&lin, &ang)
                    } else {
                        rows[r].j_b.dot(&lin, &ang)
                    };
                    assert!(
                        (fd - jac).abs() < tol,
                        "row {r} dir {k} body {bi}: fd {fd} vs J {jac}"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut a = rod("a", Vec3::new(0.3, -0.2, 0.1));
        a.pose.orientation = UnitQuaternion::from_euler_angles(0.2, -0.5, 0.8);
        let mut b = rod("b", Vec3::new(1.2, 0.4, -0.3));
        b.pose.orientation = UnitQuaternion::from_euler_angles(-0.3, 0.1, 0.4);
        let bodies = vec![a, b];
        for kind in [
            JointKind::Revolute,
            JointKind::Prismatic,
            JointKind::Spherical,
            JointKind::Fixed,
        ] {
            let joint = Joint::new(
                "j",
                kind,
                Some(0),
                1,
                Pose::new(
                    Vec3::new(0.4, 0.1, -0.2),
                    UnitQuaternion::from_euler_angles(0.1, 0.0, -0.2),
                ),
                Pose::new(
                    Vec3::new(-0.3, 0.2, 0.1),
                    UnitQuaternion::from_euler_angles(0.0, 0.3, 0.1),
                ),
                Vec3::new(0.2, 0.5, 0.8),
            )
            .unwrap();
            fd_check(&joint, &bodies, 1e-6);
        }
    }

    #[test]
    fn unknown_body_is_reported() {
        let (joint, _) = pendulum_joint();
        let err = joint_rows(0, &joint, &[], 1e-3, &StabilizationParams::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownBody { .. }));
    }
}

//! Rigid bodies in maximal coordinates and their semi-implicit integration.
//!
//! Every body carries all six degrees of freedom; joints restrict motion
//! through explicit constraint rows (see [`crate::rows`]). The per-step
//! update is symplectic (semi-implicit) Euler: velocities first, then
//! positions with the *new* velocities, orientation advanced by the exact
//! quaternion exponential and renormalized.

use crate::error::{Error, Result};
use crate::math::{is_spd, quat_exp, Mat3, Pose, Twist, Vec3};

/// A rigid body in maximal coordinates.
#[derive(Debug, Clone)]
pub struct RigidBody {
    pub name: String,
    /// Mass in kg; must be positive for dynamic bodies.
    pub mass: f64,
    /// Inertia tensor about the center of mass, body frame, kg·m².
    pub inertia_body: Mat3,
    /// Pose of the body frame (origin at the center of mass).
    pub pose: Pose,
    pub twist: Twist,
    /// Static bodies never move and act as infinite mass.
    pub is_static: bool,
}

impl RigidBody {
    pub fn new_dynamic(name: impl Into<String>, mass: f64, inertia_body: Mat3, pose: Pose) -> Result<Self> {
        let name = name.into();
        if mass <= 0.0 || !mass.is_finite() {
            return Err(Error::ZeroMassBody(name));
        }
        if !is_spd(&inertia_body, 1e-9) {
            return Err(Error::Config(format!(
                "body '{name}': inertia tensor must be symmetric positive definite"
            )));
        }
        Ok(Self {
            name,
            mass,
            inertia_body,
            pose,
            twist: Twist::zero(),
            is_static: false,
        })
    }

    pub fn new_static(name: impl Into<String>, pose: Pose) -> Self {
        Self {
            name: name.into(),
            mass: 0.0,
            inertia_body: Mat3::identity(),
            pose,
            twist: Twist::zero(),
            is_static: true,
        }
    }

    /// Inertia tensor rotated into the world frame: `R · I_body · Rᵀ`.
    pub fn world_inertia(&self) -> Mat3 {
        let r = self.pose.orientation.to_rotation_matrix();
        r * self.inertia_body * r.transpose()
    }
}

/// Per-body external force/torque accumulator, world frame.
///
/// Cleared at the start of every step before external forces are applied.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForceAccumulator {
    pub force: Vec3,
    pub torque: Vec3,
}

impl ForceAccumulator {
    pub fn clear(&mut self) {
        *self = Self::default();
    }
}

/// The block-diagonal system mass matrix, kept in operator form.
///
/// Block i is `diag(mᵢ·I₃, world_inertia(bodyᵢ))`. Only per-block apply and
/// apply-inverse are exposed; the matrix is never densified. Static bodies
/// have zero inverse blocks (infinite mass).
#[derive(Debug, Clone)]
pub struct MassMatrix {
    blocks: Vec<MassBlock>,
}

#[derive(Debug, Clone, Copy)]
struct MassBlock {
    mass: f64,
    inv_mass: f64,
    inertia_world: Mat3,
    inv_inertia_world: Mat3,
}

impl MassMatrix {
    pub fn assemble(bodies: &[RigidBody]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(bodies.len());
        for body in bodies {
            if body.is_static {
                blocks.push(MassBlock {
                    mass: f64::INFINITY,
                    inv_mass: 0.0,
                    inertia_world: Mat3::identity(),
                    inv_inertia_world: Mat3::zeros(),
                });
                continue;
            }
            if body.mass <= 0.0 {
                return Err(Error::ZeroMassBody(body.name.clone()));
            }
            let inertia_world = body.world_inertia();
            let inv_inertia_world = inertia_world.try_inverse().ok_or_else(|| {
                Error::Config(format!("body '{}': inertia tensor is not invertible", body.name))
            })?;
            blocks.push(MassBlock {
                mass: body.mass,
                inv_mass: 1.0 / body.mass,
                inertia_world,
                inv_inertia_world,
            });
        }
        Ok(Self { blocks })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn inv_mass(&self, i: usize) -> f64 {
        self.blocks[i].inv_mass
    }

    pub fn inv_inertia_world(&self, i: usize) -> &Mat3 {
        &self.blocks[i].inv_inertia_world
    }

    pub fn is_dynamic(&self, i: usize) -> bool {
        self.blocks[i].inv_mass > 0.0
    }

    /// Apply block i: `(m·v, I_w·ω)`.
    pub fn apply(&self, i: usize, linear: &Vec3, angular: &Vec3) -> (Vec3, Vec3) {
        let b = &self.blocks[i];
        (linear * b.mass, b.inertia_world * angular)
    }

    /// Apply the inverse of block i: `(f/m, I_w⁻¹·τ)`. Zero for static bodies.
    pub fn apply_inv(&self, i: usize, force: &Vec3, torque: &Vec3) -> (Vec3, Vec3) {
        let b = &self.blocks[i];
        (force * b.inv_mass, b.inv_inertia_world * torque)
    }
}

/// Per-body impulse (linear, angular) accumulated from constraint rows.
pub type Impulse = (Vec3, Vec3);

/// One semi-implicit Euler step.
///
/// Twist first: `v ← v + dt·M⁻¹·f_ext + M⁻¹·impulse`; then pose with the
/// new twist; orientation advanced by the exponential map of `dt·ω` and
/// renormalized. With `gyroscopic` set, the body-frame gyroscopic term is
/// handled by a one-step implicit local solve before external torques.
pub fn integrate_semi_implicit(
    bodies: &mut [RigidBody],
    mass: &MassMatrix,
    accumulators: &[ForceAccumulator],
    impulses: &[Impulse],
    dt: f64,
    gyroscopic: bool,
) -> Result<()> {
    assert!(dt > 0.0, "dt must be positive");
    for (i, body) in bodies.iter_mut().enumerate() {
        if body.is_static {
            continue;
        }
        if gyroscopic {
            body.twist.angular = gyroscopic_local_solve(body, dt);
        }
        let acc = &accumulators[i];
        let (dv_f, dw_f) = mass.apply_inv(i, &(acc.force * dt), &(acc.torque * dt));
        let (dv_p, dw_p) = mass.apply_inv(i, &impulses[i].0, &impulses[i].1);
        body.twist.linear += dv_f + dv_p;
        body.twist.angular += dw_f + dw_p;

        body.pose.position += body.twist.linear * dt;
        body.pose.orientation = quat_exp(body.twist.angular * dt) * body.pose.orientation;
        body.pose.orientation.renormalize();

        let finite = body.twist.is_finite()
            && body.pose.position.iter().all(|x| x.is_finite())
            && body.pose.orientation.coords.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFiniteState(body.name.clone()));
        }
    }
    Ok(())
}

/// One-step implicit solve of `I·ω̇ = −ω × (I·ω)` in the body frame.
///
/// A single Newton iteration on the implicit residual, which keeps fast
/// spins of non-spherical bodies bounded where the explicit term diverges.
fn gyroscopic_local_solve(body: &RigidBody, dt: f64) -> Vec3 {
    let q = body.pose.orientation;
    let omega_b = q.inverse() * body.twist.angular;
    let ib = body.inertia_body;
    // Residual f(ω') = I(ω' − ω) + dt·ω' × (I·ω'); one Newton step from ω.
    let f = dt * omega_b.cross(&(ib * omega_b));
    let jac = ib + dt * (crate::math::skew(&omega_b) * ib - crate::math::skew(&(ib * omega_b)));
    let delta = jac.lu().solve(&f).unwrap_or_else(Vec3::zeros);
    q * (omega_b - delta)
}

/// Total kinetic and potential energy of the scene.
///
/// `kinetic = Σ ½m·vᵀv + ½ωᵀ·I_w·ω`, `potential = Σ −m·g·x` (componentwise
/// against the gravity vector). Static bodies contribute nothing.
pub fn system_energy(bodies: &[RigidBody], gravity: &Vec3) -> (f64, f64) {
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for body in bodies {
        if body.is_static {
            continue;
        }
        let v = body.twist.linear;
        let w = body.twist.angular;
        kinetic += 0.5 * body.mass * v.dot(&v) + 0.5 * w.dot(&(body.world_inertia() * w));
        potential -= body.mass * gravity.dot(&body.pose.position);
    }
    (kinetic, potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;

    fn free_body(mass: f64, inertia: Mat3) -> RigidBody {
        RigidBody::new_dynamic("b", mass, inertia, Pose::identity()).unwrap()
    }

    #[test]
    fn world_inertia_identity_rotation() {
        let body = free_body(1.0, Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0)));
        assert_relative_eq!(
            body.world_inertia(),
            Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0)),
            epsilon = 1e-14
        );
    }

    #[test]
    fn world_inertia_quarter_turn_about_z() {
        // R·diag(1,2,3)·Rᵀ for a 90° turn about z swaps the x and y moments.
        let mut body = free_body(1.0, Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0)));
        body.pose.orientation =
            UnitQuaternion::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(
            body.world_inertia(),
            Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 3.0)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn world_inertia_isotropic_invariant() {
        let mut body = free_body(2.0, Mat3::identity() * 1.7);
        body.pose.orientation = UnitQuaternion::from_euler_angles(0.4, -1.2, 0.9);
        assert_relative_eq!(body.world_inertia(), Mat3::identity() * 1.7, epsilon = 1e-12);
    }

    #[test]
    fn mass_matrix_single_block() {
        let body = free_body(2.0, Mat3::identity());
        let m = MassMatrix::assemble(std::slice::from_ref(&body)).unwrap();
        let (f, t) = m.apply(0, &Vec3::new(1.0, 1.0, 1.0), &Vec3::new(1.0, 1.0, 1.0));
        assert_relative_eq!(f, Vec3::new(2.0, 2.0, 2.0), epsilon = 1e-14);
        assert_relative_eq!(t, Vec3::new(1.0, 1.0, 1.0), epsilon = 1e-14);
        // apply-inverse of block to (2,0,0,0,0,0) with m=2 → (1,0,0,0,0,0)
        let (f, t) = m.apply_inv(0, &Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros());
        assert_relative_eq!(f, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-14);
        assert_relative_eq!(t, Vec3::zeros(), epsilon = 1e-14);
    }

    #[test]
    fn mass_matrix_rejects_zero_mass() {
        let mut body = free_body(1.0, Mat3::identity());
        body.mass = 0.0;
        let err = MassMatrix::assemble(std::slice::from_ref(&body)).unwrap_err();
        assert!(matches!(err, Error::ZeroMassBody(_)));
    }

    #[test]
    fn mass_matrix_two_equal_blocks() {
        let a = free_body(3.0, Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0)));
        let b = a.clone();
        let m = MassMatrix::assemble(&[a, b]).unwrap();
        assert_eq!(m.len(), 2);
        assert_relative_eq!(m.inv_mass(0), m.inv_mass(1));
        assert_relative_eq!(m.inv_inertia_world(0), m.inv_inertia_world(1), epsilon = 1e-14);
    }

    #[test]
    fn apply_inv_then_apply_is_identity() {
        let mut body = free_body(2.5, Mat3::from_diagonal(&Vec3::new(0.4, 1.9, 2.2)));
        body.pose.orientation = UnitQuaternion::from_euler_angles(0.2, 0.7, -0.4);
        let m = MassMatrix::assemble(std::slice::from_ref(&body)).unwrap();
        let f = Vec3::new(0.3, -1.2, 2.0);
        let t = Vec3::new(-0.7, 0.1, 0.9);
        let (vi, wi) = m.apply_inv(0, &f, &t);
        let (f2, t2) = m.apply(0, &vi, &wi);
        assert_relative_eq!(f2, f, epsilon = 1e-12);
        assert_relative_eq!(t2, t, epsilon = 1e-12);
    }

    #[test]
    fn gravity_step_updates_velocity_then_position() {
        let mut bodies = vec![free_body(1.0, Mat3::identity())];
        let mass = MassMatrix::assemble(&bodies).unwrap();
        let acc = vec![ForceAccumulator {
            force: Vec3::new(0.0, 0.0, -9.81),
            torque: Vec3::zeros(),
        }];
        let imp = vec![(Vec3::zeros(), Vec3::zeros())];
        integrate_semi_implicit(&mut bodies, &mass, &acc, &imp, 1e-3, false).unwrap();
        assert_relative_eq!(bodies[0].twist.linear.z, -9.81e-3, epsilon = 1e-15);
        // Position uses the new velocity.
        assert_relative_eq!(bodies[0].pose.position.z, -9.81e-6, epsilon = 1e-18);
    }

    #[test]
    fn coasting_step_leaves_twist_unchanged() {
        let mut bodies = vec![free_body(1.0, Mat3::identity())];
        bodies[0].twist.linear = Vec3::new(1.0, 0.0, 0.0);
        let mass = MassMatrix::assemble(&bodies).unwrap();
        let acc = vec![ForceAccumulator::default()];
        let imp = vec![(Vec3::zeros(), Vec3::zeros())];
        integrate_semi_implicit(&mut bodies, &mass, &acc, &imp, 1e-2, false).unwrap();
        assert_relative_eq!(bodies[0].pose.position, Vec3::new(1e-2, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(bodies[0].twist.linear, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn rotation_step_is_exact_exponential() {
        let mut bodies = vec![free_body(1.0, Mat3::identity())];
        bodies[0].twist.angular = Vec3::new(0.0, 0.0, 1.0);
        let mass = MassMatrix::assemble(&bodies).unwrap();
        let acc = vec![ForceAccumulator::default()];
        let imp = vec![(Vec3::zeros(), Vec3::zeros())];
        integrate_semi_implicit(&mut bodies, &mass, &acc, &imp, 1e-3, false).unwrap();
        let expected = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 1e-3);
        let diff = (bodies[0].pose.orientation.into_inner() - expected.into_inner()).norm();
        assert!(diff < 1e-12, "quaternion differs by {diff}");
    }

    #[test]
    fn ballistic_matches_discrete_recurrence() {
        // v_n = n·g·dt and z_n = g·dt²·n(n+1)/2, exactly to round-off.
        let mut bodies = vec![free_body(1.0, Mat3::identity())];
        let mass = MassMatrix::assemble(&bodies).unwrap();
        let g = -9.81;
        let dt = 1e-3;
        let acc = vec![ForceAccumulator {
            force: Vec3::new(0.0, 0.0, g),
            torque: Vec3::zeros(),
        }];
        let imp = vec![(Vec3::zeros(), Vec3::zeros())];
        let n = 1000u32;
        for _ in 0..n {
            integrate_semi_implicit(&mut bodies, &mass, &acc, &imp, dt, false).unwrap();
        }
        let n = f64::from(n);
        assert_relative_eq!(bodies[0].twist.linear.z, n * g * dt, max_relative = 1e-12);
        assert_relative_eq!(
            bodies[0].pose.position.z,
            g * dt * dt * n * (n + 1.0) / 2.0,
            max_relative = 1e-11
        );
    }

    #[test]
    fn isotropic_spin_is_constant() {
        let mut bodies = vec![free_body(1.0, Mat3::identity() * 0.3)];
        bodies[0].twist.angular = Vec3::new(0.4, -0.2, 0.9);
        let w0 = bodies[0].twist.angular;
        let acc = vec![ForceAccumulator::default()];
        let imp = vec![(Vec3::zeros(), Vec3::zeros())];
        for _ in 0..2000 {
            let mass = MassMatrix::assemble(&bodies).unwrap();
            integrate_semi_implicit(&mut bodies, &mass, &acc, &imp, 1e-3, true).unwrap();
        }
        assert_relative_eq!(bodies[0].twist.angular, w0, epsilon = 1e-11);
    }

    #[test]
    fn quaternion_norm_stays_unit_over_many_steps() {
        let mut bodies = vec![free_body(1.0, Mat3::from_diagonal(&Vec3::new(0.2, 0.5, 0.4)))];
        bodies[0].twist.angular = Vec3::new(1.0, 2.0, -0.5);
        let acc = vec![ForceAccumulator::default()];
        let imp = vec![(Vec3::zeros(), Vec3::zeros())];
        let mass = MassMatrix::assemble(&bodies).unwrap();
        for _ in 0..100_000 {
            integrate_semi_implicit(&mut bodies, &mass, &acc, &imp, 1e-3, false).unwrap();
        }
        assert!((bodies[0].pose.orientation.coords.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn energy_examples() {
        let g = Vec3::new(0.0, 0.0, -9.81);
        let body = free_body(1.0, Mat3::identity());
        assert_eq!(system_energy(std::slice::from_ref(&body), &g), (0.0, 0.0));

        let mut moving = free_body(2.0, Mat3::identity());
        moving.twist.linear = Vec3::new(1.0, 0.0, 0.0);
        let (k, _) = system_energy(std::slice::from_ref(&moving), &g);
        assert_relative_eq!(k, 1.0, epsilon = 1e-14);

        let mut lifted = free_body(1.0, Mat3::identity());
        lifted.pose.position = Vec3::new(0.0, 0.0, 1.0);
        let (_, p) = system_energy(std::slice::from_ref(&lifted), &g);
        assert_relative_eq!(p, 9.81, epsilon = 1e-14);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let mut bodies = vec![free_body(1.0, Mat3::identity())];
        let mass = MassMatrix::assemble(&bodies).unwrap();
        let acc = vec![ForceAccumulator {
            force: Vec3::new(f64::NAN, 0.0, 0.0),
            torque: Vec3::zeros(),
        }];
        let imp = vec![(Vec3::zeros(), Vec3::zeros())];
        let err = integrate_semi_implicit(&mut bodies, &mass, &acc, &imp, 1e-3, false).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState(_)));
    }
}

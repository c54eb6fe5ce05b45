//! Small geometric helpers shared by the dynamics and constraint modules.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// A rigid transform: position of a frame origin plus its orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vec3::zeros(),
            orientation: Quat::identity(),
        }
    }

    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_position(position: Vec3) -> Self {
        Self {
            position,
            orientation: Quat::identity(),
        }
    }

    /// `self ∘ other`: interpret `other` in this pose's frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation * other.position,
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose {
            position: -(inv * self.position),
            orientation: inv,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.position + self.orientation * p
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.orientation * v
    }
}

/// Velocity of a rigid body: linear and angular parts, world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Twist {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().all(|x| x.is_finite()) && self.angular.iter().all(|x| x.is_finite())
    }
}

/// Exact quaternion exponential of a rotation vector (axis * angle).
pub fn quat_exp(scaled_axis: Vec3) -> Quat {
    UnitQuaternion::from_scaled_axis(scaled_axis)
}

/// Deterministic orthonormal complement `(u, w)` of a unit axis.
///
/// Picks the coordinate axis least aligned with `axis`, Gram-Schmidt
/// orthogonalizes it, and completes a right-handed triad `(u, w, axis)`
/// with `u × w = axis`. The same axis always yields the same pair, which
/// keeps constraint Jacobians reproducible across runs and platforms.
pub fn orthonormal_complement(axis: &Unit<Vec3>) -> (Vec3, Vec3) {
    let a = axis.into_inner();
    let abs = a.map(f64::abs);
    // Index of the smallest |component| = least aligned world axis; ties
    // resolve to the lowest index.
    let k = if abs.x <= abs.y && abs.x <= abs.z {
        0
    } else if abs.y <= abs.z {
        1
    } else {
        2
    };
    let mut e = Vec3::zeros();
    e[k] = 1.0;
    let u = (e - a * a.dot(&e)).normalize();
    let w = a.cross(&u);
    (u, w)
}

/// Skew-symmetric cross-product matrix `[v]ₓ` with `[v]ₓ · x = v × x`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Symmetric positive definite test via eigenvalues of the symmetrized matrix.
pub fn is_spd(m: &Mat3, tol: f64) -> bool {
    let asym = (m - m.transpose()).norm();
    if asym > tol * (1.0 + m.norm()) {
        return false;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().all(|&l| l > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn complement_is_orthonormal_and_right_handed() {
        for axis in [
            Vec3::z_axis(),
            Vec3::x_axis(),
            Unit::new_normalize(Vec3::new(0.3, -0.7, 0.2)),
            Unit::new_normalize(Vec3::new(1.0, 1.0, 1.0)),
        ] {
            let (u, w) = orthonormal_complement(&axis);
            assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(w.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(u.dot(&axis), 0.0, epsilon = 1e-12);
            assert_relative_eq!(w.dot(&axis), 0.0, epsilon = 1e-12);
            assert_relative_eq!(u.cross(&w), axis.into_inner(), epsilon = 1e-12);
        }
    }

    #[test]
    fn complement_is_deterministic() {
        let axis = Unit::new_normalize(Vec3::new(0.1, 0.9, 0.3));
        let a = orthonormal_complement(&axis);
        let b = orthonormal_complement(&axis);
        assert_eq!(a, b);
    }

    #[test]
    fn quat_exp_matches_axis_angle() {
        // Rotation by 1e-3 rad about z equals the closed-form axis-angle quaternion.
        let q = quat_exp(Vec3::new(0.0, 0.0, 1e-3));
        let expected = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 1e-3);
        assert!((q.into_inner() - expected.into_inner()).norm() < 1e-12);
    }

    #[test]
    fn pose_compose_inverse_roundtrip() {
        let p = Pose::new(
            Vec3::new(1.0, -2.0, 0.5),
            UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1),
        );
        let q = p.compose(&p.inverse());
        assert!(q.position.norm() < 1e-14);
        assert!(q.orientation.angle() < 1e-14);
    }
}

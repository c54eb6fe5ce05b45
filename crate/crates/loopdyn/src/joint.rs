//! Joint definitions: typed kinematic constraints between body pairs.

use nalgebra::Unit;

use crate::error::{Error, Result};
use crate::math::{Pose, Vec3};

/// Supported joint kinds. Each removes `6 − dof` degrees of freedom,
/// contributing that many velocity-level constraint rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Spherical,
    Fixed,
}

impl JointKind {
    pub fn dof(self) -> usize {
        match self {
            JointKind::Revolute | JointKind::Prismatic => 1,
            JointKind::Spherical => 3,
            JointKind::Fixed => 0,
        }
    }

    /// Number of bilateral constraint rows: revolute 5, prismatic 5,
    /// spherical 3, fixed 6.
    pub fn row_count(self) -> usize {
        6 - self.dof()
    }

    pub fn name(self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
            JointKind::Spherical => "spherical",
            JointKind::Fixed => "fixed",
        }
    }

    /// Single-DOF joints have a motorizable / dampable axis.
    pub fn has_axis(self) -> bool {
        matches!(self, JointKind::Revolute | JointKind::Prismatic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotorMode {
    VelocityDrive,
    PositionDrive,
}

/// Drive parameters for a single-DOF joint.
///
/// `target` is rad/s or m/s in velocity mode, rad or m in position mode;
/// position mode folds `kp·(target − q) − kd·q̇` into the velocity target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    pub mode: MotorMode,
    pub target: f64,
    /// Force (N) or torque (N·m) limit; the solver clamps the impulse to
    /// `±max_force·dt`.
    pub max_force: f64,
    pub kp: f64,
    pub kd: f64,
}

impl MotorParams {
    pub fn velocity(target: f64, max_force: f64) -> Self {
        Self {
            mode: MotorMode::VelocityDrive,
            target,
            max_force,
            kp: 0.0,
            kd: 0.0,
        }
    }

    pub fn position(target: f64, max_force: f64, kp: f64, kd: f64) -> Self {
        Self {
            mode: MotorMode::PositionDrive,
            target,
            max_force,
            kp,
            kd,
        }
    }

    pub fn validate(&self, joint: &str) -> Result<()> {
        if !self.max_force.is_finite() || self.max_force < 0.0 {
            return Err(Error::Config(format!(
                "joint '{joint}': motor max_force must be finite and ≥ 0"
            )));
        }
        if self.mode == MotorMode::PositionDrive && (self.kp <= 0.0 || self.kd <= 0.0) {
            return Err(Error::Config(format!(
                "joint '{joint}': position drive gains must be positive"
            )));
        }
        Ok(())
    }
}

/// Attachment side of a joint: the world (ground) or a body by index.
pub type Attach = Option<usize>;

/// A typed kinematic constraint between a parent and a child body.
///
/// Anchor poses are expressed in each body's own frame; the joint axis is
/// expressed in the joint (anchor) frame. `parent == None` attaches to the
/// world.
#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: Attach,
    pub child: usize,
    pub anchor_parent: Pose,
    pub anchor_child: Pose,
    pub axis: Unit<Vec3>,
    pub motor: Option<MotorParams>,
    /// Viscous damping along the free axis, N·m·s/rad (revolute) or
    /// N·s/m (prismatic). Zero disables the damping row.
    pub damping: f64,
}

impl Joint {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        kind: JointKind,
        parent: Attach,
        child: usize,
        anchor_parent: Pose,
        anchor_child: Pose,
        axis: Vec3,
    ) -> Result<Self> {
        let name = name.into();
        if parent == Some(child) {
            return Err(Error::Config(format!(
                "joint '{name}': parent and child must differ"
            )));
        }
        let norm = axis.norm();
        if !(norm.is_finite() && norm > 1e-12) {
            return Err(Error::Config(format!("joint '{name}': axis must be non-zero")));
        }
        Ok(Self {
            name,
            kind,
            parent,
            child,
            anchor_parent,
            anchor_child,
            axis: Unit::new_normalize(axis),
            motor: None,
            damping: 0.0,
        })
    }

    pub fn with_motor(mut self, motor: MotorParams) -> Result<Self> {
        if !self.kind.has_axis() {
            return Err(Error::MotorOnUnsupportedJoint {
                joint: self.name.clone(),
                kind: self.kind.name().to_string(),
            });
        }
        motor.validate(&self.name)?;
        self.motor = Some(motor);
        Ok(self)
    }

    pub fn with_damping(mut self, damping: f64) -> Result<Self> {
        if damping < 0.0 || !damping.is_finite() {
            return Err(Error::Config(format!(
                "joint '{}': damping must be finite and ≥ 0",
                self.name
            )));
        }
        self.damping = damping;
        Ok(self)
    }
}

//! Scene documents: serialization, the two modeling conventions, and
//! seeded perturbation.
//!
//! A scene file is a versioned, human-readable TOML tree. Two conventions
//! exist side by side because they respond differently to imprecise input
//! data:
//!
//! * `world_frame` — every body and every joint carries a single world
//!   pose; joint anchors are resolved per body at load time, so imprecise
//!   positions distort geometry slightly but never appear as constraint
//!   violations.
//! * `chained_frame` — bodies are placed by composing per-link frames
//!   (`frame_a` offset, then an `r_ab` vector resolved in frame A) along a
//!   chain; entry errors propagate and surface as loop-closure residuals,
//!   which are reported, never silently corrected.

use nalgebra::UnitQuaternion;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::body::RigidBody;
use crate::error::{Error, Result};
use crate::joint::{Joint, JointKind, MotorMode, MotorParams};
use crate::math::{Mat3, Pose, Vec3};
use crate::sim::{ActuationSchedule, World};

pub const SCENE_VERSION: u32 = 1;
/// Reserved name for the ground.
pub const WORLD: &str = "world";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    WorldFrame,
    ChainedFrame,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub position: [f64; 3],
    /// Unit quaternion (w, x, y, z).
    #[serde(default = "identity_quat")]
    pub orientation: [f64; 4],
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl Default for PoseSpec {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            orientation: identity_quat(),
        }
    }
}

impl PoseSpec {
    pub fn to_pose(&self) -> Pose {
        let q = nalgebra::Quaternion::new(
            self.orientation[0],
            self.orientation[1],
            self.orientation[2],
            self.orientation[3],
        );
        Pose::new(Vec3::from(self.position), UnitQuaternion::from_quaternion(q))
    }

    pub fn from_pose(p: &Pose) -> Self {
        let q = p.orientation.into_inner();
        Self {
            position: [p.position.x, p.position.y, p.position.z],
            orientation: [q.w, q.i, q.j, q.k],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub name: String,
    #[serde(default)]
    pub mass: f64,
    /// Diagonal inertia moments (ixx, iyy, izz), body frame.
    #[serde(default)]
    pub inertia: [f64; 3],
    /// Products of inertia (ixy, ixz, iyz).
    #[serde(default)]
    pub inertia_products: [f64; 3],
    pub position: [f64; 3],
    #[serde(default = "identity_quat")]
    pub orientation: [f64; 4],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub angular_velocity: [f64; 3],
    #[serde(default, rename = "static")]
    pub is_static: bool,
}

impl BodySpec {
    fn inertia_matrix(&self) -> Mat3 {
        let [ixx, iyy, izz] = self.inertia;
        let [ixy, ixz, iyz] = self.inertia_products;
        Mat3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
    }

    fn to_body(&self) -> Result<RigidBody> {
        let pose = PoseSpec {
            position: self.position,
            orientation: self.orientation,
        }
        .to_pose();
        let mut body = if self.is_static {
            RigidBody::new_static(&self.name, pose)
        } else {
            RigidBody::new_dynamic(&self.name, self.mass, self.inertia_matrix(), pose)?
        };
        body.twist.linear = Vec3::from(self.velocity);
        body.twist.angular = Vec3::from(self.angular_velocity);
        Ok(body)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MotorSpec {
    pub mode: MotorMode,
    #[serde(default)]
    pub target: f64,
    pub max_force: f64,
    #[serde(default)]
    pub kp: f64,
    #[serde(default)]
    pub kd: f64,
}

impl MotorSpec {
    fn to_params(&self) -> MotorParams {
        MotorParams {
            mode: self.mode,
            target: self.target,
            max_force: self.max_force,
            kp: self.kp,
            kd: self.kd,
        }
    }
}

/// World-frame joint: one world pose defines the joint; anchors on both
/// bodies are resolved from it at load time.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    pub pose: PoseSpec,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    /// Extra offset of the child-side anchor, child body frame. Zero in
    /// clean documents; perturbation writes attachment errors here so they
    /// surface as real violations.
    #[serde(default)]
    pub child_anchor_offset: [f64; 3],
    #[serde(default)]
    pub motor: Option<MotorSpec>,
    #[serde(default)]
    pub damping: f64,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainJointSpec {
    pub name: String,
    pub kind: JointKind,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default)]
    pub motor: Option<MotorSpec>,
    #[serde(default)]
    pub damping: f64,
}

/// One link of a chained-frame document.
///
/// The body's frame A sits at the attachment point on the predecessor
/// (its frame B, or `attach_offset` from its frame A), composed with the
/// `frame_a` offset; frame B is `r_ab` away from frame A, resolved in
/// frame A. The junction joint connects predecessor and body at frame A.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub body: String,
    pub predecessor: String,
    pub joint: ChainJointSpec,
    #[serde(default)]
    pub frame_a: PoseSpec,
    pub r_ab: [f64; 3],
    /// Attachment point on the predecessor, resolved in its frame A;
    /// defaults to the predecessor's frame B.
    #[serde(default)]
    pub attach_offset: Option<[f64; 3]>,
    /// Center of mass relative to frame A; defaults to the midpoint of
    /// frame A and frame B.
    #[serde(default)]
    pub com: Option<[f64; 3]>,
    pub mass: f64,
    #[serde(default)]
    pub inertia: [f64; 3],
    #[serde(default)]
    pub inertia_products: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub angular_velocity: [f64; 3],
}

/// Loop-closing joint of a chained-frame document: connects `from_body`'s
/// frame B to an anchor on an earlier body (or the world).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClosureSpec {
    pub name: String,
    pub kind: JointKind,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    pub from_body: String,
    pub to: String,
    /// Anchor on `to`: world pose when `to == "world"`, otherwise relative
    /// to `to`'s frame A.
    pub to_anchor: PoseSpec,
    #[serde(default)]
    pub motor: Option<MotorSpec>,
    #[serde(default)]
    pub damping: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ActuationSpec {
    pub joint: String,
    /// Time-sorted (time s, target) pairs, interpolated linearly.
    pub schedule: Vec<[f64; 2]>,
}

/// The unit of scene serialization and loading.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneModel {
    pub version: u32,
    pub convention: Convention,
    pub gravity: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bodies: Vec<BodySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<JointSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub closures: Vec<ClosureSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actuation: Vec<ActuationSpec>,
}

/// Closure residuals measured while loading a chained document.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub convention: Option<Convention>,
    /// (closure joint name, translational gap in m).
    pub closure_residuals: Vec<(String, f64)>,
}

impl LoadReport {
    pub fn max_residual(&self) -> f64 {
        self.closure_residuals
            .iter()
            .map(|(_, r)| *r)
            .fold(0.0, f64::max)
    }

    /// Deterministic, byte-stable text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let conv = match self.convention {
            Some(Convention::WorldFrame) => "world_frame",
            Some(Convention::ChainedFrame) => "chained_frame",
            None => "unknown",
        };
        out.push_str(&format!("convention = {conv}\n"));
        out.push_str(&format!("max_closure_residual = {:?}\n", self.max_residual()));
        for (name, r) in &self.closure_residuals {
            out.push_str(&format!("closure.{name} = {r:?}\n"));
        }
        out
    }
}

/// A compiled scene: runtime world plus schedules and the load report.
#[derive(Debug, Clone)]
pub struct CompiledScene {
    pub world: World,
    pub schedules: Vec<ActuationSchedule>,
    pub report: LoadReport,
}

impl SceneModel {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scene: SceneModel = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "document".to_string());
            Error::Schema {
                path,
                message: e.message().to_string(),
            }
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Schema {
            path: "serialize".to_string(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENE_VERSION {
            return Err(Error::Schema {
                path: "version".to_string(),
                message: format!("unsupported version {} (expected {SCENE_VERSION})", self.version),
            });
        }
        match self.convention {
            Convention::WorldFrame => {
                if !self.links.is_empty() || !self.closures.is_empty() {
                    return Err(Error::Schema {
                        path: "links".to_string(),
                        message: "world_frame documents use [[bodies]]/[[joints]]".to_string(),
                    });
                }
            }
            Convention::ChainedFrame => {
                if !self.bodies.is_empty() || !self.joints.is_empty() {
                    return Err(Error::Schema {
                        path: "bodies".to_string(),
                        message: "chained_frame documents use [[links]]/[[closures]]".to_string(),
                    });
                }
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for n in self
            .bodies
            .iter()
            .map(|b| &b.name)
            .chain(self.links.iter().map(|l| &l.body))
        {
            if n == WORLD {
                return Err(Error::Schema {
                    path: format!("body {n}"),
                    message: "'world' is reserved".to_string(),
                });
            }
            if !names.insert(n.clone()) {
                return Err(Error::Schema {
                    path: format!("body {n}"),
                    message: "duplicate body name".to_string(),
                });
            }
        }
        let mut joint_names = std::collections::BTreeSet::new();
        for n in self
            .joints
            .iter()
            .map(|j| &j.name)
            .chain(self.links.iter().map(|l| &l.joint.name))
            .chain(self.closures.iter().map(|c| &c.name))
        {
            if !joint_names.insert(n.clone()) {
                return Err(Error::Schema {
                    path: format!("joint {n}"),
                    message: "duplicate joint name".to_string(),
                });
            }
        }
        for a in &self.actuation {
            if !joint_names.contains(&a.joint) {
                return Err(Error::DanglingReference(format!(
                    "actuation references unknown joint '{}'",
                    a.joint
                )));
            }
            if a.schedule.windows(2).any(|w| w[1][0] < w[0][0]) {
                return Err(Error::Schema {
                    path: format!("actuation.{}", a.joint),
                    message: "schedule times must be sorted".to_string(),
                });
            }
        }
        Ok(())
    }

    /// Compile into a runtime world according to the document convention.
    pub fn compile(&self) -> Result<CompiledScene> {
        match self.convention {
            Convention::WorldFrame => self.compile_world_frame(),
            Convention::ChainedFrame => self.compile_chained_frame(),
        }
    }

    fn resolve_schedules(&self, joints: &[Joint]) -> Result<Vec<ActuationSchedule>> {
        let index: BTreeMap<&str, usize> = joints
            .iter()
            .enumerate()
            .map(|(i, j)| (j.name.as_str(), i))
            .collect();
        let mut out = Vec::new();
        for a in &self.actuation {
            let ji = *index.get(a.joint.as_str()).ok_or_else(|| {
                Error::DanglingReference(format!("actuation references unknown joint '{}'", a.joint))
            })?;
            if joints[ji].motor.is_none() {
                return Err(Error::Config(format!(
                    "actuation schedule on joint '{}' which has no motor",
                    a.joint
                )));
            }
            out.push(ActuationSchedule {
                joint: ji,
                points: a.schedule.iter().map(|p| (p[0], p[1])).collect(),
            });
        }
        Ok(out)
    }

    /// World-frame loading: body poses verbatim, joint anchors resolved
    /// independently per body from the joint's single world pose — no error
    /// accumulation by construction.
    fn compile_world_frame(&self) -> Result<CompiledScene> {
        let mut bodies = Vec::with_capacity(self.bodies.len());
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, spec) in self.bodies.iter().enumerate() {
            bodies.push(spec.to_body()?);
            index.insert(spec.name.as_str(), i);
        }
        let lookup = |name: &str, joint: &str| -> Result<Option<usize>> {
            if name == WORLD {
                return Ok(None);
            }
            index.get(name).copied().map(Some).ok_or_else(|| {
                Error::DanglingReference(format!(
                    "joint '{joint}' references unknown body '{name}'"
                ))
            })
        };
        let mut joints = Vec::with_capacity(self.joints.len());
        for spec in &self.joints {
            let parent = lookup(&spec.parent, &spec.name)?;
            let child = lookup(&spec.child, &spec.name)?.ok_or_else(|| Error::Schema {
                path: format!("joint {}", spec.name),
                message: "child must be a body, not 'world'".to_string(),
            })?;
            let joint_world = spec.pose.to_pose();
            let anchor_parent = match parent {
                Some(i) => bodies[i].pose.inverse().compose(&joint_world),
                None => joint_world,
            };
            let mut anchor_child = bodies[child].pose.inverse().compose(&joint_world);
            anchor_child.position += Vec3::from(spec.child_anchor_offset);
            let mut joint = Joint::new(
                &spec.name,
                spec.kind,
                parent,
                child,
                anchor_parent,
                anchor_child,
                Vec3::from(spec.axis),
            )?;
            if let Some(m) = &spec.motor {
                joint = joint.with_motor(m.to_params())?;
            }
            joint = joint.with_damping(spec.damping)?;
            joints.push(joint);
        }
        let schedules = self.resolve_schedules(&joints)?;
        Ok(CompiledScene {
            world: World {
                bodies,
                joints,
                gravity: Vec3::from(self.gravity),
            },
            schedules,
            report: LoadReport {
                convention: Some(Convention::WorldFrame),
                closure_residuals: Vec::new(),
            },
        })
    }

    /// Chained-frame loading: world poses by forward composition along the
    /// chain; loop-closure residuals measured and reported, not corrected.
    fn compile_chained_frame(&self) -> Result<CompiledScene> {
        struct Placed {
            body_index: usize,
            frame_a: Pose,
            frame_b: Pose,
        }
        let mut placed: BTreeMap<String, Placed> = BTreeMap::new();
        let mut bodies: Vec<RigidBody> = Vec::new();
        let mut joints: Vec<Joint> = Vec::new();

        for link in &self.links {
            // Attachment pose on the predecessor (world: the origin).
            let (parent_idx, attach_world) = if link.predecessor == WORLD {
                let base = Pose::identity();
                let attach = match link.attach_offset {
                    Some(off) => base.compose(&Pose::from_position(Vec3::from(off))),
                    None => base,
                };
                (None, attach)
            } else {
                let pred = placed.get(&link.predecessor).ok_or_else(|| Error::ChainOrder {
                    predecessor: link.predecessor.clone(),
                    body: link.body.clone(),
                })?;
                let attach = match link.attach_offset {
                    Some(off) => pred.frame_a.compose(&Pose::from_position(Vec3::from(off))),
                    None => pred.frame_b,
                };
                (Some(pred.body_index), attach)
            };

            // Joint frame = this body's frame A (zero joint coordinate).
            let frame_a = attach_world.compose(&link.frame_a.to_pose());
            let r_ab = Vec3::from(link.r_ab);
            let frame_b = frame_a.compose(&Pose::from_position(r_ab));
            let com_local = link.com.map(Vec3::from).unwrap_or(r_ab * 0.5);
            let body_pose = Pose::new(frame_a.transform_point(&com_local), frame_a.orientation);

            let spec = BodySpec {
                name: link.body.clone(),
                mass: link.mass,
                inertia: link.inertia,
                inertia_products: link.inertia_products,
                position: [body_pose.position.x, body_pose.position.y, body_pose.position.z],
                orientation: PoseSpec::from_pose(&body_pose).orientation,
                velocity: link.velocity,
                angular_velocity: link.angular_velocity,
                is_static: false,
            };
            let body_index = bodies.len();
            bodies.push(spec.to_body()?);

            let anchor_parent = match parent_idx {
                Some(i) => bodies[i].pose.inverse().compose(&frame_a),
                None => frame_a,
            };
            let anchor_child = body_pose.inverse().compose(&frame_a);
            let mut joint = Joint::new(
                &link.joint.name,
                link.joint.kind,
                parent_idx,
                body_index,
                anchor_parent,
                anchor_child,
                Vec3::from(link.joint.axis),
            )?;
            if let Some(m) = &link.joint.motor {
                joint = joint.with_motor(m.to_params())?;
            }
            joint = joint.with_damping(link.joint.damping)?;
            joints.push(joint);

            placed.insert(
                link.body.clone(),
                Placed {
                    body_index,
                    frame_a,
                    frame_b,
                },
            );
        }

        let mut residuals = Vec::new();
        for closure in &self.closures {
            let from = placed.get(&closure.from_body).ok_or_else(|| {
                Error::DanglingReference(format!(
                    "closure '{}' references unknown body '{}'",
                    closure.name, closure.from_body
                ))
            })?;
            let from_index = from.body_index;
            let child_anchor_world = from.frame_b;
            let (to_index, to_anchor_world) = if closure.to == WORLD {
                (None, closure.to_anchor.to_pose())
            } else {
                let to = placed.get(&closure.to).ok_or_else(|| {
                    Error::DanglingReference(format!(
                        "closure '{}' references unknown body '{}'",
                        closure.name, closure.to
                    ))
                })?;
                (
                    Some(to.body_index),
                    to.frame_a.compose(&closure.to_anchor.to_pose()),
                )
            };
            let residual = (child_anchor_world.position - to_anchor_world.position).norm();
            residuals.push((closure.name.clone(), residual));

            let anchor_parent = match to_index {
                Some(i) => bodies[i].pose.inverse().compose(&to_anchor_world),
                None => to_anchor_world,
            };
            let anchor_child = bodies[from_index].pose.inverse().compose(&child_anchor_world);
            let mut joint = Joint::new(
                &closure.name,
                closure.kind,
                to_index,
                from_index,
                anchor_parent,
                anchor_child,
                Vec3::from(closure.axis),
            )?;
            if let Some(m) = &closure.motor {
                joint = joint.with_motor(m.to_params())?;
            }
            joint = joint.with_damping(closure.damping)?;
            joints.push(joint);
        }

        let schedules = self.resolve_schedules(&joints)?;
        Ok(CompiledScene {
            world: World {
                bodies,
                joints,
                gravity: Vec3::from(self.gravity),
            },
            schedules,
            report: LoadReport {
                convention: Some(Convention::ChainedFrame),
                closure_residuals: residuals,
            },
        })
    }

    /// Convert a chained document into an equivalent world-frame document:
    /// compiled world poses become body entries, and each joint's world
    /// pose is taken from its child-side anchor. Loading the result resolves
    /// anchors per body, so chain inconsistencies do not survive conversion.
    pub fn to_world_frame(&self) -> Result<SceneModel> {
        if self.convention == Convention::WorldFrame {
            return Ok(self.clone());
        }
        let compiled = self.compile()?;
        let world = &compiled.world;
        let mut bodies = Vec::with_capacity(world.bodies.len());
        for (i, body) in world.bodies.iter().enumerate() {
            let link = &self.links[i];
            bodies.push(BodySpec {
                name: body.name.clone(),
                mass: body.mass,
                inertia: link.inertia,
                inertia_products: link.inertia_products,
                position: [body.pose.position.x, body.pose.position.y, body.pose.position.z],
                orientation: PoseSpec::from_pose(&body.pose).orientation,
                velocity: link.velocity,
                angular_velocity: link.angular_velocity,
                is_static: false,
            });
        }
        let mut joints = Vec::with_capacity(world.joints.len());
        for joint in &world.joints {
            let child_world = world.bodies[joint.child].pose.compose(&joint.anchor_child);
            let parent_name = match joint.parent {
                Some(i) => world.bodies[i].name.clone(),
                None => WORLD.to_string(),
            };
            joints.push(JointSpec {
                name: joint.name.clone(),
                kind: joint.kind,
                parent: parent_name,
                child: world.bodies[joint.child].name.clone(),
                pose: PoseSpec::from_pose(&child_world),
                axis: [joint.axis.x, joint.axis.y, joint.axis.z],
                child_anchor_offset: [0.0; 3],
                motor: joint.motor.map(|m| MotorSpec {
                    mode: m.mode,
                    target: m.target,
                    max_force: m.max_force,
                    kp: m.kp,
                    kd: m.kd,
                }),
                damping: joint.damping,
            });
        }
        Ok(SceneModel {
            version: SCENE_VERSION,
            convention: Convention::WorldFrame,
            gravity: self.gravity,
            bodies,
            joints,
            links: Vec::new(),
            closures: Vec::new(),
            actuation: self.actuation.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbDistribution {
    /// Uniform in [−magnitude, magnitude] per axis, seeded.
    PerAxisUniform,
    /// Deterministic offset of `magnitude` along the target's natural
    /// direction (x for positions, the link direction for chain vectors).
    FixedOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbTargets {
    /// Joint attachment data: child anchor offsets (world convention) or
    /// chain vectors (chained convention).
    Anchors,
    /// Body world positions (world convention only).
    BodyPositions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub magnitude: f64,
    pub distribution: PerturbDistribution,
    pub seed: u64,
    pub targets: PerturbTargets,
    /// Restrict to one named body or joint.
    #[serde(default)]
    pub only: Option<String>,
}

/// An applied offset, for logging: (target description, offset vector).
pub type AppliedOffset = (String, [f64; 3]);

fn draw(rng: &mut ChaCha8Rng, spec: &PerturbationSpec, natural: Vec3) -> Vec3 {
    match spec.distribution {
        PerturbDistribution::PerAxisUniform => Vec3::new(
            rng.gen_range(-spec.magnitude..=spec.magnitude),
            rng.gen_range(-spec.magnitude..=spec.magnitude),
            rng.gen_range(-spec.magnitude..=spec.magnitude),
        ),
        PerturbDistribution::FixedOffset => {
            let dir = if natural.norm() > 1e-12 {
                natural.normalize()
            } else {
                Vec3::x()
            };
            dir * spec.magnitude
        }
    }
}

/// Apply seeded offsets to the spec'd targets, returning the perturbed
/// document and the applied offsets. The input scene is not modified;
/// identical seeds yield identical results.
pub fn perturb(
    scene: &SceneModel,
    spec: &PerturbationSpec,
) -> Result<(SceneModel, Vec<AppliedOffset>)> {
    if !spec.magnitude.is_finite() || spec.magnitude < 0.0 {
        return Err(Error::Config(
            "perturbation magnitude must be finite and ≥ 0".into(),
        ));
    }
    let mut out = scene.clone();
    let mut applied = Vec::new();
    if spec.magnitude == 0.0 {
        return Ok((out, applied));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let wants = |name: &str| spec.only.as_deref().map_or(true, |o| o == name);

    match (scene.convention, spec.targets) {
        (Convention::WorldFrame, PerturbTargets::BodyPositions) => {
            for body in &mut out.bodies {
                if !wants(&body.name) {
                    continue;
                }
                let d = draw(&mut rng, spec, Vec3::x());
                for k in 0..3 {
                    body.position[k] += d[k];
                }
                applied.push((format!("body.{}", body.name), [d.x, d.y, d.z]));
            }
        }
        (Convention::WorldFrame, PerturbTargets::Anchors) => {
            for joint in &mut out.joints {
                if !wants(&joint.name) {
                    continue;
                }
                let d = draw(&mut rng, spec, Vec3::x());
                for k in 0..3 {
                    joint.child_anchor_offset[k] += d[k];
                }
                applied.push((format!("anchor.{}", joint.name), [d.x, d.y, d.z]));
            }
        }
        (Convention::ChainedFrame, PerturbTargets::Anchors) => {
            for link in &mut out.links {
                if wants(&link.body) {
                    let d = draw(&mut rng, spec, Vec3::from(link.r_ab));
                    for k in 0..3 {
                        link.r_ab[k] += d[k];
                    }
                    applied.push((format!("link.{}", link.body), [d.x, d.y, d.z]));
                    if let Some(off) = &mut link.attach_offset {
                        let d = draw(&mut rng, spec, Vec3::from(*off));
                        for k in 0..3 {
                            off[k] += d[k];
                        }
                        applied.push((format!("attach.{}", link.body), [d.x, d.y, d.z]));
                    }
                }
            }
            for closure in &mut out.closures {
                if !wants(&closure.name) {
                    continue;
                }
                let d = draw(&mut rng, spec, Vec3::from(closure.to_anchor.position));
                for k in 0..3 {
                    closure.to_anchor.position[k] += d[k];
                }
                applied.push((format!("closure.{}", closure.name), [d.x, d.y, d.z]));
            }
        }
        (Convention::ChainedFrame, PerturbTargets::BodyPositions) => {
            return Err(Error::Config(
                "chained_frame documents carry no body positions; perturb anchors instead".into(),
            ));
        }
    }
    Ok((out, applied))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MINIMAL: &str = r#"
version = 1
convention = "world_frame"
gravity = [0.0, 0.0, -9.81]

[[bodies]]
name = "ball"
mass = 1.0
inertia = [0.1, 0.1, 0.1]
position = [0.0, 0.0, 1.0]
"#;

    #[test]
    fn minimal_document_loads() {
        let scene = SceneModel::from_toml_str(MINIMAL).unwrap();
        let compiled = scene.compile().unwrap();
        assert_eq!(compiled.world.bodies.len(), 1);
        assert!(compiled.world.joints.is_empty());
    }

    #[test]
    fn unknown_joint_kind_is_schema_error() {
        let text = MINIMAL.to_string()
            + r#"
[[joints]]
name = "j"
kind = "hinge2"
parent = "world"
child = "ball"
pose = { position = [0.0, 0.0, 2.0] }
"#;
        let err = SceneModel::from_toml_str(&text).unwrap_err();
        match err {
            Error::Schema { message, .. } => {
                assert!(message.contains("hinge2"), "message: {message}");
            }
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn dangling_reference_is_reported() {
        let text = MINIMAL.to_string()
            + r#"
[[joints]]
name = "j"
kind = "revolute"
parent = "world"
child = "nosuch"
pose = { position = [0.0, 0.0, 2.0] }
axis = [0.0, 1.0, 0.0]
"#;
        let scene = SceneModel::from_toml_str(&text).unwrap();
        let err = scene.compile().unwrap_err();
        assert!(matches!(err, Error::DanglingReference(_)));
    }

    #[test]
    fn world_loading_has_zero_violation_by_construction() {
        let text = MINIMAL.to_string()
            + r#"
[[joints]]
name = "j"
kind = "revolute"
parent = "world"
child = "ball"
pose = { position = [0.3, 0.2, 2.0] }
axis = [0.0, 1.0, 0.0]
"#;
        let scene = SceneModel::from_toml_str(&text).unwrap();
        let compiled = scene.compile().unwrap();
        let report =
            crate::rows::measure_violation(&compiled.world.joints, &compiled.world.bodies).unwrap();
        assert!(report.max_position_error < 1e-12);
    }

    #[test]
    fn chained_chain_order_error() {
        let text = r#"
version = 1
convention = "chained_frame"
gravity = [0.0, 0.0, -9.81]

[[links]]
body = "a"
predecessor = "missing"
joint = { name = "j0", kind = "revolute", axis = [0.0, 1.0, 0.0] }
r_ab = [1.0, 0.0, 0.0]
mass = 1.0
inertia = [0.1, 0.1, 0.1]
"#;
        let scene = SceneModel::from_toml_str(text).unwrap();
        let err = scene.compile().unwrap_err();
        assert!(matches!(err, Error::ChainOrder { .. }));
    }

    #[test]
    fn perturb_zero_magnitude_is_identity() {
        let scene = SceneModel::from_toml_str(MINIMAL).unwrap();
        let (p, applied) = perturb(
            &scene,
            &PerturbationSpec {
                magnitude: 0.0,
                distribution: PerturbDistribution::PerAxisUniform,
                seed: 42,
                targets: PerturbTargets::BodyPositions,
                only: None,
            },
        )
        .unwrap();
        assert_eq!(p, scene);
        assert!(applied.is_empty());
    }

    #[test]
    fn perturb_same_seed_same_result() {
        let scene = SceneModel::from_toml_str(MINIMAL).unwrap();
        let spec = PerturbationSpec {
            magnitude: 1e-3,
            distribution: PerturbDistribution::PerAxisUniform,
            seed: 7,
            targets: PerturbTargets::BodyPositions,
            only: None,
        };
        let (a, _) = perturb(&scene, &spec).unwrap();
        let (b, _) = perturb(&scene, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_offset_on_one_anchor_is_measurable() {
        let text = MINIMAL.to_string()
            + r#"
[[joints]]
name = "j"
kind = "revolute"
parent = "world"
child = "ball"
pose = { position = [0.0, 0.0, 2.0] }
axis = [0.0, 1.0, 0.0]
"#;
        let scene = SceneModel::from_toml_str(&text).unwrap();
        let (p, applied) = perturb(
            &scene,
            &PerturbationSpec {
                magnitude: 1e-3,
                distribution: PerturbDistribution::FixedOffset,
                seed: 0,
                targets: PerturbTargets::Anchors,
                only: Some("j".to_string()),
            },
        )
        .unwrap();
        assert_eq!(applied.len(), 1);
        let compiled = p.compile().unwrap();
        let report =
            crate::rows::measure_violation(&compiled.world.joints, &compiled.world.bodies).unwrap();
        assert_relative_eq!(report.joints[0].position_error, 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn roundtrip_preserves_fields() {
        let text = MINIMAL.to_string()
            + r#"
[[joints]]
name = "j"
kind = "revolute"
parent = "world"
child = "ball"
pose = { position = [0.25, 0.125, 2.0] }
axis = [0.0, 1.0, 0.0]
damping = 0.5

[joints.motor]
mode = "velocity_drive"
target = 0.0
max_force = 10.0

[[actuation]]
joint = "j"
schedule = [[0.0, 0.0], [1.0, 0.5]]
"#;
        let scene = SceneModel::from_toml_str(&text).unwrap();
        let serialized = scene.to_toml_string().unwrap();
        let reloaded = SceneModel::from_toml_str(&serialized).unwrap();
        assert_eq!(scene, reloaded);
    }
}

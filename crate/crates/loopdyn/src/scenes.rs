//! Built-in benchmark scenes.
//!
//! All generators emit scene documents (not compiled worlds) so the same
//! mechanism can be loaded, perturbed, converted between conventions and
//! serialized like any user scene. Planar mechanisms live in the x–z plane
//! with hinge axes along y and gravity along −z.

use crate::error::Result;
use crate::joint::JointKind;
use crate::math::Vec3;
use crate::scene::{
    ActuationSpec, BodySpec, ChainJointSpec, ClosureSpec, Convention, JointSpec, LinkSpec,
    MotorSpec, PoseSpec, SceneModel, SCENE_VERSION, WORLD,
};

const GRAVITY: [f64; 3] = [0.0, 0.0, -9.81];

/// Inertia of a solid rod of mass `m`, radius `r`, spanning `span`
/// (world-aligned body frame): diagonal moments plus products.
fn rod_inertia(m: f64, r: f64, span: Vec3) -> ([f64; 3], [f64; 3]) {
    let len = span.norm();
    let axial = 0.5 * m * r * r;
    let perp = m * (len * len / 12.0 + r * r / 4.0);
    if len < 1e-12 {
        return ([axial, axial, axial], [0.0; 3]);
    }
    let u = span / len;
    // I = perp·(I₃ − u·uᵀ) + axial·u·uᵀ
    let f = axial - perp;
    let ixx = perp + f * u.x * u.x;
    let iyy = perp + f * u.y * u.y;
    let izz = perp + f * u.z * u.z;
    let ixy = f * u.x * u.y;
    let ixz = f * u.x * u.z;
    let iyz = f * u.y * u.z;
    ([ixx, iyy, izz], [ixy, ixz, iyz])
}

fn rod_body(name: &str, from: Vec3, to: Vec3, mass: f64, r: f64) -> BodySpec {
    let span = to - from;
    let com = (from + to) * 0.5;
    let (inertia, inertia_products) = rod_inertia(mass, r, span);
    BodySpec {
        name: name.to_string(),
        mass,
        inertia,
        inertia_products,
        position: [com.x, com.y, com.z],
        orientation: [1.0, 0.0, 0.0, 0.0],
        velocity: [0.0; 3],
        angular_velocity: [0.0; 3],
        is_static: false,
    }
}

fn revolute_y(name: &str, parent: &str, child: &str, at: Vec3) -> JointSpec {
    JointSpec {
        name: name.to_string(),
        kind: JointKind::Revolute,
        parent: parent.to_string(),
        child: child.to_string(),
        pose: PoseSpec {
            position: [at.x, at.y, at.z],
            orientation: [1.0, 0.0, 0.0, 0.0],
        },
        axis: [0.0, 1.0, 0.0],
        child_anchor_offset: [0.0; 3],
        motor: None,
        damping: 0.0,
    }
}

/// Point-equivalent pendulum: 1 kg bob 1 m under a world hinge.
pub fn pendulum() -> SceneModel {
    SceneModel {
        version: SCENE_VERSION,
        convention: Convention::WorldFrame,
        gravity: GRAVITY,
        bodies: vec![BodySpec {
            name: "bob".to_string(),
            mass: 1.0,
            inertia: [1e-3, 1e-3, 1e-3],
            inertia_products: [0.0; 3],
            position: [0.0, 0.0, -1.0],
            orientation: [1.0, 0.0, 0.0, 0.0],
            velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
            is_static: false,
        }],
        joints: vec![revolute_y("hinge", WORLD, "bob", Vec3::zeros())],
        links: Vec::new(),
        closures: Vec::new(),
        actuation: Vec::new(),
    }
}

/// Parameters of the planar four-bar linkage.
#[derive(Debug, Clone, Copy)]
pub struct FourBarParams {
    pub ground: f64,
    pub crank: f64,
    pub coupler: f64,
    pub rocker: f64,
    /// Crank angle from +x, radians.
    pub crank_angle: f64,
    /// Linear density of the links, kg/m.
    pub density: f64,
    pub link_radius: f64,
    /// Hold the crank with a zero-target velocity drive.
    pub hold_motor: bool,
}

impl Default for FourBarParams {
    fn default() -> Self {
        Self {
            ground: 2.0,
            crank: 0.5,
            coupler: 2.0,
            rocker: 1.5,
            crank_angle: 240.0_f64.to_radians(),
            density: 1.0,
            link_radius: 0.02,
            hold_motor: false,
        }
    }
}

/// Pivot positions (O, A, B, C) of the assembled four-bar: circle-circle
/// intersection in the x–z plane, elbow-up branch.
pub fn four_bar_points(p: &FourBarParams) -> (Vec3, Vec3, Vec3, Vec3) {
    let o = Vec3::zeros();
    let c = Vec3::new(p.ground, 0.0, 0.0);
    let a = o + Vec3::new(p.crank_angle.cos(), 0.0, p.crank_angle.sin()) * p.crank;
    // Intersect circle(A, coupler) with circle(C, rocker) in the x–z plane.
    let dvec = c - a;
    let d = dvec.norm();
    assert!(
        d < p.coupler + p.rocker && d > (p.coupler - p.rocker).abs(),
        "four-bar does not assemble at this crank angle"
    );
    let along = (p.coupler * p.coupler - p.rocker * p.rocker + d * d) / (2.0 * d);
    let h = (p.coupler * p.coupler - along * along).max(0.0).sqrt();
    let base = a + dvec * (along / d);
    let perp = Vec3::new(-dvec.z, 0.0, dvec.x) / d;
    let b1 = base + perp * h;
    let b2 = base - perp * h;
    let b = if b1.z >= b2.z { b1 } else { b2 };
    (o, a, b, c)
}

/// Planar four-bar linkage, world-frame convention: ground pivots on the
/// world, all four hinge axes parallel (y) — the canonical redundant loop.
pub fn four_bar(p: &FourBarParams) -> SceneModel {
    let (o, a, b, c) = four_bar_points(p);
    let bodies = vec![
        rod_body("crank", o, a, p.density * p.crank, p.link_radius),
        rod_body("coupler", a, b, p.density * p.coupler, p.link_radius),
        rod_body("rocker", b, c, p.density * p.rocker, p.link_radius),
    ];
    let mut joints = vec![
        revolute_y("j_crank", WORLD, "crank", o),
        revolute_y("j_coupler", "crank", "coupler", a),
        revolute_y("j_rocker", "coupler", "rocker", b),
        revolute_y("j_ground", WORLD, "rocker", c),
    ];
    if p.hold_motor {
        joints[0].motor = Some(MotorSpec {
            mode: crate::joint::MotorMode::VelocityDrive,
            target: 0.0,
            max_force: 1e4,
            kp: 0.0,
            kd: 0.0,
        });
    }
    SceneModel {
        version: SCENE_VERSION,
        convention: Convention::WorldFrame,
        gravity: GRAVITY,
        bodies,
        joints,
        links: Vec::new(),
        closures: Vec::new(),
        actuation: Vec::new(),
    }
}

fn chain_link(
    body: &str,
    predecessor: &str,
    joint_name: &str,
    kind: JointKind,
    axis: [f64; 3],
    r_ab: Vec3,
    mass: f64,
    radius: f64,
) -> LinkSpec {
    let (inertia, inertia_products) = rod_inertia(mass, radius, r_ab);
    LinkSpec {
        body: body.to_string(),
        predecessor: predecessor.to_string(),
        joint: ChainJointSpec {
            name: joint_name.to_string(),
            kind,
            axis,
            motor: None,
            damping: 0.0,
        },
        frame_a: PoseSpec::default(),
        r_ab: [r_ab.x, r_ab.y, r_ab.z],
        attach_offset: None,
        com: None,
        mass,
        inertia,
        inertia_products,
        velocity: [0.0; 3],
        angular_velocity: [0.0; 3],
    }
}

/// The same four-bar as a chained-frame document: links composed
/// world → crank → coupler → rocker, loop closed back onto the world.
/// Chain-vector errors accumulate into the closure residual here.
pub fn four_bar_chained(p: &FourBarParams) -> SceneModel {
    let (o, a, b, c) = four_bar_points(p);
    let y = [0.0, 1.0, 0.0];
    let links = vec![
        chain_link("crank", WORLD, "j_crank", JointKind::Revolute, y, a - o, p.density * p.crank, p.link_radius),
        chain_link("coupler", "crank", "j_coupler", JointKind::Revolute, y, b - a, p.density * p.coupler, p.link_radius),
        chain_link("rocker", "coupler", "j_rocker", JointKind::Revolute, y, c - b, p.density * p.rocker, p.link_radius),
    ];
    let closures = vec![ClosureSpec {
        name: "j_ground".to_string(),
        kind: JointKind::Revolute,
        axis: y,
        from_body: "rocker".to_string(),
        to: WORLD.to_string(),
        to_anchor: PoseSpec {
            position: [c.x, c.y, c.z],
            orientation: [1.0, 0.0, 0.0, 0.0],
        },
        motor: None,
        damping: 0.0,
    }];
    SceneModel {
        version: SCENE_VERSION,
        convention: Convention::ChainedFrame,
        gravity: GRAVITY,
        bodies: Vec::new(),
        joints: Vec::new(),
        links,
        closures,
        actuation: Vec::new(),
    }
}

/// Straight serial chain of `n` unit links (chained convention), used by
/// the closure-accumulation properties: the last link closes back onto a
/// world anchor at the exact chain end.
pub fn straight_chain(n: usize) -> SceneModel {
    assert!(n >= 1);
    let y = [0.0, 1.0, 0.0];
    let mut links = Vec::new();
    for i in 0..n {
        let pred = if i == 0 {
            WORLD.to_string()
        } else {
            format!("link{}", i - 1)
        };
        links.push(chain_link(
            &format!("link{i}"),
            &pred,
            &format!("j{i}"),
            JointKind::Revolute,
            y,
            Vec3::new(1.0, 0.0, 0.0),
            1.0,
            0.02,
        ));
    }
    let closures = vec![ClosureSpec {
        name: "j_close".to_string(),
        kind: JointKind::Spherical,
        axis: y,
        from_body: format!("link{}", n - 1),
        to: WORLD.to_string(),
        to_anchor: PoseSpec {
            position: [n as f64, 0.0, 0.0],
            orientation: [1.0, 0.0, 0.0, 0.0],
        },
        motor: None,
        damping: 0.0,
    }];
    SceneModel {
        version: SCENE_VERSION,
        convention: Convention::ChainedFrame,
        gravity: GRAVITY,
        bodies: Vec::new(),
        joints: Vec::new(),
        links,
        closures,
        actuation: Vec::new(),
    }
}

/// Parameters of the free-spinning drum scene.
#[derive(Debug, Clone, Copy)]
pub struct DrumParams {
    /// Viscous damping at the hinge, N·m·s/rad; zero leaves the spin
    /// coordinate indeterminate at rest.
    pub damping: f64,
    /// Initial spin about the hinge axis, rad/s.
    pub initial_spin: f64,
}

impl Default for DrumParams {
    fn default() -> Self {
        Self {
            damping: 0.0,
            initial_spin: 0.0,
        }
    }
}

/// Drum axial inertia of [`equilibrium_cylinder`], kg·m² (mass 4, r = 0.5).
pub const DRUM_AXIAL_INERTIA: f64 = 0.5;

/// A cylinder hinged to a static stand along its own principal axis: at
/// rest with no applied torque, nothing determines its spin direction.
pub fn equilibrium_cylinder(p: &DrumParams) -> SceneModel {
    let mass = 4.0;
    let r: f64 = 0.5;
    let len: f64 = 0.6;
    let axial = 0.5 * mass * r * r;
    let perp = mass * (3.0 * r * r + len * len) / 12.0;
    let mut joint = revolute_y("winch_hinge", "stand", "drum", Vec3::new(0.0, 0.0, 1.0));
    joint.damping = p.damping;
    SceneModel {
        version: SCENE_VERSION,
        convention: Convention::WorldFrame,
        gravity: GRAVITY,
        bodies: vec![
            BodySpec {
                name: "stand".to_string(),
                mass: 0.0,
                inertia: [0.0; 3],
                inertia_products: [0.0; 3],
                position: [0.0, -0.5, 1.0],
                orientation: [1.0, 0.0, 0.0, 0.0],
                velocity: [0.0; 3],
                angular_velocity: [0.0; 3],
                is_static: true,
            },
            BodySpec {
                name: "drum".to_string(),
                mass,
                inertia: [perp, axial, perp],
                inertia_products: [0.0; 3],
                position: [0.0, 0.0, 1.0],
                orientation: [1.0, 0.0, 0.0, 0.0],
                velocity: [0.0; 3],
                angular_velocity: [0.0, p.initial_spin, 0.0],
                is_static: false,
            },
        ],
        joints: vec![joint],
        links: Vec::new(),
        closures: Vec::new(),
        actuation: Vec::new(),
    }
}

/// Parameters of the multi-loop crane analog.
#[derive(Debug, Clone, Copy)]
pub struct CraneParams {
    /// Arm segments in the main chain.
    pub arm_segments: usize,
    /// Tie-rod braces, each closing one loop over an arm pivot.
    pub ties: usize,
    /// Winch drum damping; zero reproduces the indeterminate-equilibrium
    /// configuration.
    pub winch_damping: f64,
    pub arm_length: f64,
    /// Viscous damping at every revolute pivot (N·m·s/rad).
    pub pivot_damping: f64,
    /// Viscous damping on the actuator slides (N·s/m).
    pub slide_damping: f64,
}

impl Default for CraneParams {
    fn default() -> Self {
        // 21 bodies, 27 joints (25 revolute + 2 prismatic), 6 independent
        // loops: the published component counts of the benchmark boom.
        // Product literature counts "coupled loops" differently (9); the
        // cycle-space number for this topology is 6 and that is what the
        // fixtures assert.
        Self {
            arm_segments: 12,
            ties: 4,
            winch_damping: 0.5,
            arm_length: 0.5,
            pivot_damping: 20.0,
            slide_damping: 2e3,
        }
    }
}

/// Joint pivot positions along the arm chain.
fn crane_pivots(p: &CraneParams) -> Vec<Vec3> {
    let mut pts = vec![Vec3::zeros()];
    for i in 0..p.arm_segments {
        let elevation = (50.0 - 8.0 * i as f64).to_radians();
        let dir = Vec3::new(elevation.cos(), 0.0, elevation.sin());
        let last = *pts.last().unwrap();
        pts.push(last + dir * p.arm_length);
    }
    pts
}

/// In-plane left normal of a segment direction.
fn left_normal(dir: Vec3) -> Vec3 {
    Vec3::new(-dir.z, 0.0, dir.x).normalize()
}

/// Multi-loop crane analog, chained-frame convention.
///
/// A serial boom of arm segments with tie-rod braces (one loop each), two
/// prismatic luffing actuators (one loop each) and a free-spinning winch
/// drum at the tip. Undriven arm pivots are held by zero-target velocity
/// drives (brakes) so the two prismatic drives and the winch are the only
/// live degrees of freedom. The default instance has 21 bodies and 27
/// joints (25 revolute, 2 prismatic) forming 6 independent loops.
pub fn crane_analog(p: &CraneParams) -> SceneModel {
    assert!(p.arm_segments >= 8, "crane analog needs at least 8 arm segments");
    assert!(
        p.ties * 2 + 4 <= p.arm_segments * 2 - 2,
        "too many ties for the arm count"
    );
    let y = [0.0, 1.0, 0.0];
    let pts = crane_pivots(p);
    let n = p.arm_segments;
    let arm_mass = 2.0;
    let tie_mass = 0.8;
    let act_mass = 2.0;
    let brake = MotorSpec {
        mode: crate::joint::MotorMode::VelocityDrive,
        target: 0.0,
        max_force: 4e3,
        kp: 0.0,
        kd: 0.0,
    };

    let mut links: Vec<LinkSpec> = Vec::new();
    let mut closures: Vec<ClosureSpec> = Vec::new();

    // Arm chain: arm_i spans pts[i-1] → pts[i].
    for i in 1..=n {
        let pred = if i == 1 {
            WORLD.to_string()
        } else {
            format!("arm{}", i - 1)
        };
        let mut link = chain_link(
            &format!("arm{i}"),
            &pred,
            &if i == 1 { "j_base".to_string() } else { format!("j_arm_{}", i - 1) },
            JointKind::Revolute,
            y,
            pts[i] - pts[i - 1],
            arm_mass,
            0.04,
        );
        link.joint.name = if i == 1 {
            "j_base".to_string()
        } else {
            format!("j_arm_{}", i - 1)
        };
        link.joint.damping = p.pivot_damping;
        links.push(link);
    }

    // Tie braces lock pivots j_arm_k for k = 2, 4, 6, ... (skipping the
    // actuator-driven pivot chosen below).
    let driven_pivot = n / 2; // j_arm_<n/2> is driven by actuator B
    let mut tie_pivots = Vec::new();
    let mut k = 2;
    while tie_pivots.len() < p.ties {
        if k != driven_pivot && k + 1 <= n {
            tie_pivots.push(k);
        }
        k += 2;
        assert!(k < 2 * n, "could not place all ties");
    }
    for (ti, &k) in tie_pivots.iter().enumerate() {
        // Triangle over pivot pts[k]: from a point on arm_k to a point on
        // arm_{k+1}, both offset off-axis so the triangle is nondegenerate.
        let d0 = (pts[k] - pts[k - 1]).normalize();
        let d1 = (pts[k + 1] - pts[k]).normalize();
        let plane = Vec3::new(0.0, 0.12, 0.0);
        let q1 = pts[k - 1] + (pts[k] - pts[k - 1]) * 0.5 + left_normal(d0) * 0.35 + plane;
        let q2 = pts[k] + (pts[k + 1] - pts[k]) * 0.5 + left_normal(d1) * 0.35 + plane;
        let mut link = chain_link(
            &format!("tie{}", ti + 1),
            &format!("arm{k}"),
            &format!("j_tie_{}_a", ti + 1),
            JointKind::Revolute,
            y,
            q2 - q1,
            tie_mass,
            0.02,
        );
        // Attachment point on arm_k, relative to its frame A at pts[k-1].
        link.attach_offset = Some([
            q1.x - pts[k - 1].x,
            q1.y - pts[k - 1].y,
            q1.z - pts[k - 1].z,
        ]);
        link.joint.damping = p.pivot_damping;
        links.push(link);
        closures.push(ClosureSpec {
            name: format!("j_tie_{}_b", ti + 1),
            kind: JointKind::Revolute,
            axis: y,
            from_body: format!("tie{}", ti + 1),
            to: format!("arm{}", k + 1),
            to_anchor: PoseSpec {
                position: [q2.x - pts[k].x, q2.y - pts[k].y, q2.z - pts[k].z],
                orientation: [1.0, 0.0, 0.0, 0.0],
            },
            motor: None,
            damping: p.pivot_damping,
        });
    }

    // Hydraulic cylinder between two anchors: barrel + rod with a driven
    // prismatic slide between them.
    let pivot_damping = p.pivot_damping;
    let slide_damping = p.slide_damping;
    let add_actuator = |tag: &str,
                            mount_parent: String,
                            mount_world: Vec3,
                            mount_parent_origin: Vec3,
                            head_body: String,
                            head_world: Vec3,
                            head_body_origin: Vec3,
                            links: &mut Vec<LinkSpec>,
                            closures: &mut Vec<ClosureSpec>| {
        let span = head_world - mount_world;
        let axis = span.normalize();
        let mid = mount_world + span * 0.5;
        let mut barrel = chain_link(
            &format!("act_{tag}_barrel"),
            &mount_parent,
            &format!("j_act_{tag}_mount"),
            JointKind::Revolute,
            y,
            mid - mount_world,
            act_mass,
            0.05,
        );
        barrel.joint.damping = pivot_damping;
        barrel.attach_offset = Some([
            mount_world.x - mount_parent_origin.x,
            mount_world.y - mount_parent_origin.y,
            mount_world.z - mount_parent_origin.z,
        ]);
        links.push(barrel);
        let mut rod = chain_link(
            &format!("act_{tag}_rod"),
            &format!("act_{tag}_barrel"),
            &format!("j_act_{tag}_slide"),
            JointKind::Prismatic,
            [axis.x, axis.y, axis.z],
            head_world - mid,
            act_mass * 0.6,
            0.03,
        );
        rod.joint.motor = Some(MotorSpec {
            mode: crate::joint::MotorMode::VelocityDrive,
            target: 0.0,
            max_force: 5e3,
            kp: 0.0,
            kd: 0.0,
        });
        rod.joint.damping = slide_damping;
        links.push(rod);
        closures.push(ClosureSpec {
            name: format!("j_act_{tag}_head"),
            kind: JointKind::Revolute,
            axis: y,
            from_body: format!("act_{tag}_rod"),
            to: head_body,
            to_anchor: PoseSpec {
                position: [
                    head_world.x - head_body_origin.x,
                    head_world.y - head_body_origin.y,
                    head_world.z - head_body_origin.z,
                ],
                orientation: [1.0, 0.0, 0.0, 0.0],
            },
            motor: None,
            damping: pivot_damping,
        });
    };

    // Actuator A: ground to arm1 (the luffing cylinder).
    let head_a = pts[0] + (pts[1] - pts[0]) * 0.72 + Vec3::new(0.0, -0.12, 0.0);
    add_actuator(
        "a",
        WORLD.to_string(),
        Vec3::new(0.45, -0.12, 0.0),
        Vec3::zeros(),
        "arm1".to_string(),
        head_a,
        pts[0],
        &mut links,
        &mut closures,
    );
    // Actuator B: across the driven pivot between arm_k and arm_{k+1}.
    let k = driven_pivot;
    let d0 = (pts[k] - pts[k - 1]).normalize();
    let d1 = (pts[k + 1] - pts[k]).normalize();
    let mount_b = pts[k - 1] + (pts[k] - pts[k - 1]) * 0.25 - left_normal(d0) * 0.12
        + Vec3::new(0.0, -0.12, 0.0);
    let head_b = pts[k] + (pts[k + 1] - pts[k]) * 0.55 - left_normal(d1) * 0.12
        + Vec3::new(0.0, -0.12, 0.0);
    add_actuator(
        "b",
        format!("arm{k}"),
        mount_b,
        pts[k - 1],
        format!("arm{}", k + 1),
        head_b,
        pts[k],
        &mut links,
        &mut closures,
    );

    // Winch drum at the boom tip, hinged along its own axis (y), COM on
    // the axis: the static-equilibrium member.
    let tip = pts[n];
    let drum_mass = 6.0;
    let drum_r: f64 = 0.25;
    let drum_len = 0.3;
    let axial = 0.5 * drum_mass * drum_r * drum_r;
    let perp = drum_mass * (3.0 * drum_r * drum_r + drum_len * drum_len) / 12.0;
    let mut winch = LinkSpec {
        body: "winch".to_string(),
        predecessor: format!("arm{n}"),
        joint: ChainJointSpec {
            name: "j_winch".to_string(),
            kind: JointKind::Revolute,
            axis: y,
            motor: None,
            damping: p.winch_damping,
        },
        frame_a: PoseSpec::default(),
        r_ab: [0.0, drum_len, 0.0],
        attach_offset: Some([
            tip.x - pts[n - 1].x,
            tip.y - pts[n - 1].y,
            tip.z - pts[n - 1].z,
        ]),
        com: Some([0.0, 0.0, 0.0]),
        mass: drum_mass,
        inertia: [perp, axial, perp],
        inertia_products: [0.0; 3],
        velocity: [0.0; 3],
        angular_velocity: [0.0; 3],
    };
    winch.joint.damping = p.winch_damping;
    links.push(winch);

    // Brakes on every undriven, untied arm pivot (and the base pivot is
    // held through actuator A, so it stays free).
    for i in 1..n {
        if i == driven_pivot || tie_pivots.contains(&i) {
            continue;
        }
        for link in links.iter_mut() {
            if link.joint.name == format!("j_arm_{i}") {
                link.joint.motor = Some(brake.clone());
            }
        }
    }

    // Trapezoidal velocity profiles on the two slides.
    let actuation = vec![
        ActuationSpec {
            joint: "j_act_a_slide".to_string(),
            schedule: vec![
                [0.0, 0.0],
                [0.2, 0.0],
                [0.5, 0.03],
                [1.2, 0.03],
                [1.5, 0.0],
            ],
        },
        ActuationSpec {
            joint: "j_act_b_slide".to_string(),
            schedule: vec![
                [0.0, 0.0],
                [0.3, 0.0],
                [0.6, -0.02],
                [1.1, -0.02],
                [1.4, 0.0],
            ],
        },
    ];

    SceneModel {
        version: SCENE_VERSION,
        convention: Convention::ChainedFrame,
        gravity: GRAVITY,
        bodies: Vec::new(),
        joints: Vec::new(),
        links,
        closures,
        actuation,
    }
}

/// World-frame variant of the crane analog (converted from the chained
/// document; anchors re-resolved per body).
pub fn crane_analog_world(p: &CraneParams) -> Result<SceneModel> {
    crane_analog(p).to_world_frame()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::analyze_scene_model;
    use crate::rows::measure_violation;

    #[test]
    fn four_bar_assembles_consistently() {
        let scene = four_bar(&FourBarParams::default());
        let compiled = scene.compile().unwrap();
        let report = measure_violation(&compiled.world.joints, &compiled.world.bodies).unwrap();
        assert!(report.max_position_error < 1e-12);
        assert!(report.max_angle_error < 1e-12);
    }

    #[test]
    fn four_bar_graph_numbers() {
        let report = analyze_scene_model(&four_bar(&FourBarParams::default())).unwrap();
        assert_eq!(report.independent_loop_count, 1);
        // 6·3 − 4·5 = −2: the Grübler undercount of the parallel-axis loop.
        assert_eq!(report.gruebler_mobility, -2);
    }

    #[test]
    fn four_bar_chained_closes_exactly() {
        let scene = four_bar_chained(&FourBarParams::default());
        let compiled = scene.compile().unwrap();
        assert!(compiled.report.max_residual() < 1e-12);
        let report = measure_violation(&compiled.world.joints, &compiled.world.bodies).unwrap();
        assert!(report.max_position_error < 1e-12);
    }

    #[test]
    fn chained_and_world_four_bar_agree() {
        let chained = four_bar_chained(&FourBarParams::default());
        let converted = chained.to_world_frame().unwrap();
        let world = four_bar(&FourBarParams::default());
        let a = converted.compile().unwrap();
        let b = world.compile().unwrap();
        assert_eq!(a.world.bodies.len(), b.world.bodies.len());
        for (x, y) in a.world.bodies.iter().zip(&b.world.bodies) {
            assert!((x.pose.position - y.pose.position).norm() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_cylinder_compiles() {
        let scene = equilibrium_cylinder(&DrumParams::default());
        let compiled = scene.compile().unwrap();
        assert_eq!(compiled.world.bodies.len(), 2);
        assert!(compiled.world.bodies[0].is_static);
    }

    #[test]
    fn crane_counts_match_published_topology() {
        let scene = crane_analog(&CraneParams::default());
        let compiled = scene.compile().unwrap();
        assert_eq!(compiled.world.bodies.len(), 21);
        assert_eq!(compiled.world.joints.len(), 27);
        let prismatic = compiled
            .world
            .joints
            .iter()
            .filter(|j| j.kind == JointKind::Prismatic)
            .count();
        assert_eq!(prismatic, 2);
        assert_eq!(compiled.world.joints.len() - prismatic, 25);
        assert!(compiled.report.max_residual() < 1e-9, "residual {}", compiled.report.max_residual());

        let report = analyze_scene_model(&scene).unwrap();
        assert_eq!(report.independent_loop_count, 6);
    }

    #[test]
    fn crane_assembles_without_violation() {
        let scene = crane_analog(&CraneParams::default());
        let compiled = scene.compile().unwrap();
        let report = measure_violation(&compiled.world.joints, &compiled.world.bodies).unwrap();
        assert!(
            report.max_position_error < 1e-9,
            "violation {}",
            report.max_position_error
        );
    }

    #[test]
    fn straight_chain_closes() {
        let compiled = straight_chain(5).compile().unwrap();
        assert!(compiled.report.max_residual() < 1e-12);
    }
}

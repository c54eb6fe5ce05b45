//! Body-joint graph analysis: loop counting, mobility, loop membership.
//!
//! The scene is a multigraph with the world and every body as vertices and
//! every joint as an edge. The number of independent kinematic loops is the
//! cycle-space dimension `E − V + C`; Grübler mobility is the formula count
//! `6·(movable bodies) − Σ (6 − joint DOF)`. Negative mobility on a moving
//! mechanism exposes redundant constraints.

use crate::joint::JointKind;
use crate::scene::{CompiledScene, SceneModel};

/// Graph-side summary of a scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphReport {
    pub body_count: usize,
    pub joint_count: usize,
    /// Cycle-space dimension of the body-joint multigraph, world included.
    pub independent_loop_count: usize,
    pub gruebler_mobility: i64,
    /// Joint-name membership of each independent loop, shortest cycles
    /// first (ties broken by discovery order).
    pub loops: Vec<Vec<String>>,
}

/// An edge of the analysis graph.
#[derive(Debug, Clone)]
struct Edge {
    name: String,
    kind: JointKind,
    a: usize,
    b: usize,
}

struct MultiGraph {
    n_vertices: usize,
    edges: Vec<Edge>,
    movable: usize,
}

impl MultiGraph {
    fn from_compiled(scene: &CompiledScene) -> Self {
        // Vertex 0 is the world; bodies follow in scene order.
        let n_vertices = scene.world.bodies.len() + 1;
        let edges = scene
            .world
            .joints
            .iter()
            .map(|j| Edge {
                name: j.name.clone(),
                kind: j.kind,
                a: j.parent.map(|i| i + 1).unwrap_or(0),
                b: j.child + 1,
            })
            .collect();
        let movable = scene.world.bodies.iter().filter(|b| !b.is_static).count();
        Self {
            n_vertices,
            edges,
            movable,
        }
    }

    fn adjacency(&self, skip_edge: Option<usize>) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for (ei, e) in self.edges.iter().enumerate() {
            if Some(ei) == skip_edge {
                continue;
            }
            adj[e.a].push((e.b, ei));
            adj[e.b].push((e.a, ei));
        }
        adj
    }

    fn connected_components(&self) -> usize {
        let adj = self.adjacency(None);
        let mut seen = vec![false; self.n_vertices];
        let mut components = 0;
        for start in 0..self.n_vertices {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &(w, _) in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        components
    }

    /// Non-tree edges of a BFS forest grown in vertex/edge order.
    fn chord_edges(&self) -> Vec<usize> {
        let adj = self.adjacency(None);
        let mut seen = vec![false; self.n_vertices];
        let mut tree_edge = vec![false; self.edges.len()];
        for start in 0..self.n_vertices {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &(w, ei) in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        tree_edge[ei] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        (0..self.edges.len()).filter(|&e| !tree_edge[e]).collect()
    }

    /// Shortest cycle through a given edge: BFS between its endpoints with
    /// the edge itself removed, deterministic tie-breaking by edge order.
    fn shortest_cycle_through(&self, edge: usize) -> Vec<String> {
        let e = &self.edges[edge];
        if e.a == e.b {
            return vec![e.name.clone()];
        }
        let adj = self.adjacency(Some(edge));
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.n_vertices];
        let mut seen = vec![false; self.n_vertices];
        seen[e.a] = true;
        let mut queue = std::collections::VecDeque::from([e.a]);
        while let Some(v) = queue.pop_front() {
            if v == e.b {
                break;
            }
            for &(w, ei) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    prev[w] = Some((v, ei));
                    queue.push_back(w);
                }
            }
        }
        let mut names = vec![e.name.clone()];
        let mut v = e.b;
        while let Some((p, ei)) = prev[v] {
            names.push(self.edges[ei].name.clone());
            v = p;
            if v == e.a {
                break;
            }
        }
        names
    }
}

/// Build the multigraph and report loop structure and mobility.
pub fn analyze_graph(scene: &CompiledScene) -> GraphReport {
    let graph = MultiGraph::from_compiled(scene);
    let e = graph.edges.len();
    let v = graph.n_vertices;
    let c = graph.connected_components();
    let independent_loop_count = e + c - v;

    let removed: i64 = graph.edges.iter().map(|j| (6 - j.kind.dof()) as i64).sum();
    let gruebler_mobility = 6 * graph.movable as i64 - removed;

    let mut loops: Vec<Vec<String>> = graph
        .chord_edges()
        .into_iter()
        .map(|ei| graph.shortest_cycle_through(ei))
        .collect();
    loops.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    GraphReport {
        body_count: scene.world.bodies.len(),
        joint_count: e,
        independent_loop_count,
        gruebler_mobility,
        loops,
    }
}

/// Convenience: analyze a document directly.
pub fn analyze_scene_model(scene: &SceneModel) -> crate::error::Result<GraphReport> {
    Ok(analyze_graph(&scene.compile()?))
}

/// Deterministic text rendering of a report (CLI `analyze` output).
pub fn report_text(report: &GraphReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("bodies = {}\n", report.body_count));
    out.push_str(&format!("joints = {}\n", report.joint_count));
    out.push_str(&format!(
        "independent_loops = {}\n",
        report.independent_loop_count
    ));
    out.push_str(&format!(
        "gruebler_mobility = {}\n",
        report.gruebler_mobility
    ));
    for (i, members) in report.loops.iter().enumerate() {
        out.push_str(&format!("loop.{} = [{}]\n", i, members.join(", ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SceneModel;

    fn double_pendulum_doc() -> SceneModel {
        SceneModel::from_toml_str(
            r#"
version = 1
convention = "world_frame"
gravity = [0.0, 0.0, -9.81]

[[bodies]]
name = "l1"
mass = 1.0
inertia = [0.1, 0.1, 0.1]
position = [0.0, 0.0, -0.5]

[[bodies]]
name = "l2"
mass = 1.0
inertia = [0.1, 0.1, 0.1]
position = [0.0, 0.0, -1.5]

[[joints]]
name = "j0"
kind = "revolute"
parent = "world"
child = "l1"
pose = { position = [0.0, 0.0, 0.0] }
axis = [0.0, 1.0, 0.0]

[[joints]]
name = "j1"
kind = "revolute"
parent = "l1"
child = "l2"
pose = { position = [0.0, 0.0, -1.0] }
axis = [0.0, 1.0, 0.0]
"#,
        )
        .unwrap()
    }

    #[test]
    fn double_pendulum_no_loops_mobility_two() {
        let report = analyze_scene_model(&double_pendulum_doc()).unwrap();
        assert_eq!(report.independent_loop_count, 0);
        assert_eq!(report.gruebler_mobility, 2);
        assert!(report.loops.is_empty());
    }

    #[test]
    fn loop_membership_is_deterministic() {
        let doc = double_pendulum_doc();
        let a = analyze_scene_model(&doc).unwrap();
        let b = analyze_scene_model(&doc).unwrap();
        assert_eq!(a, b);
    }
}

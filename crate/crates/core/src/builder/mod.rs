//! Breadth-first graph construction from a start point.
//!
//! The queue is FIFO. Each popped parent tests its grid neighbors in the
//! fixed row-major order of the direction set; every valid child gets an
//! edge, and children not yet queued are appended.
//!
//! Neighbor checks only read the scene and the parent's own position, so a
//! batch of queued parents is checked in parallel and the results are then
//! applied to the graph strictly in queue order. The resulting graph is
//! identical to a one-parent-at-a-time expansion for any thread count.

mod connection;
mod params;

pub use connection::{check_child, get_connection, within_limits};
pub use params::GraphParams;

use crate::costs;
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::graph::{AccessGraph, ConnectionType, NodeKey, Vertex};
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Parents checked together between graph updates.
const BATCH: usize = 1024;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub queue_peak: usize,
    /// True when nothing beyond the start node was accepted.
    pub terminated_early: bool,
    /// Vertices discovered at each breadth-first depth, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier_snapshots: Option<Vec<usize>>,
    /// Gradients outside the energy polynomial's range.
    pub clamped_gradients: usize,
    /// DIRECT edges removed by the optional cross-slope gate.
    pub cross_slope_removed: usize,
}

#[derive(Clone, Debug, Default)]
pub struct BuildOptions {
    /// Worker threads for neighbor checks and cost passes; `None` uses the
    /// global pool.
    pub threads: Option<usize>,
    pub record_frontier: bool,
}

/// A valid child found by [`get_nodes`]: direction offset, connection
/// type and landing point.
#[derive(Clone, Debug, PartialEq)]
pub struct Child {
    pub offset: (i32, i32),
    pub step: ConnectionType,
    pub point: Point3<f64>,
}

/// Horizontal position of grid column `(i, j)`.
pub fn grid_xy(params: &GraphParams, i: i32, j: i32) -> (f64, f64) {
    (
        params.start.x + f64::from(i) * params.spacing,
        params.start.y + f64::from(j) * params.spacing,
    )
}

/// Valid children of `parent`, or none at all when fewer than `gamma`
/// neighbors validate.
pub fn get_nodes(scene: &Scene, params: &GraphParams, parent: &Vertex) -> Vec<Child> {
    let mut children = Vec::with_capacity(params.directions.len());
    for (di, dj) in params.ordered_directions() {
        let (x, y) = grid_xy(params, parent.key.i + di, parent.key.j + dj);
        let candidate = Point3::new(x, y, parent.point.z + params.height);
        if let Some((step, point)) = check_child(scene, params, &parent.point, &candidate) {
            children.push(Child {
                offset: (di, dj),
                step,
                point,
            });
        }
    }
    if children.len() < params.min_children {
        children.clear();
    }
    children
}

/// Node under the start point, if the downward cast lands on walkable
/// geometry.
pub fn start_node(scene: &Scene, params: &GraphParams) -> Result<Point3<f64>> {
    let origin = params.start + Vector3::z() * params.height;
    match scene.inter(&origin, &-Vector3::z(), params.max_drop()) {
        Some(hit) if scene.is_walkable(hit.object_id) => {
            Ok(Point3::new(origin.x, origin.y, origin.z - hit.distance))
        }
        _ => Err(Error::InvalidStart { tau: params.start }),
    }
}

pub fn build_graph(scene: &Scene, params: &GraphParams) -> Result<(AccessGraph, BuildReport)> {
    build_graph_with(scene, params, &BuildOptions::default())
}

pub fn build_graph_with(
    scene: &Scene,
    params: &GraphParams,
    options: &BuildOptions,
) -> Result<(AccessGraph, BuildReport)> {
    params.validate()?;
    crate::with_threads(options.threads, || build_inner(scene, params, options))
}

fn build_inner(scene: &Scene, params: &GraphParams, options: &BuildOptions) -> Result<(AccessGraph, BuildReport)> {
    let root_point = start_node(scene, params)?;
    let mut graph = AccessGraph::new();
    let root = graph.add_vertex(NodeKey::new(0, 0, 0), root_point);

    let merge_tol = params.merge_tol();
    let mut queued = vec![true];
    let mut queue: VecDeque<(usize, usize)> = VecDeque::from([(root, 0)]);
    let mut report = BuildReport {
        queue_peak: 1,
        ..Default::default()
    };
    let mut frontier: Vec<usize> = vec![1];

    while !queue.is_empty() {
        let take = queue.len().min(BATCH);
        let batch: Vec<(usize, usize)> = queue.drain(..take).collect();
        let found: Vec<Vec<Child>> = {
            let vertices = graph.vertices();
            batch
                .par_iter()
                .map(|&(v, _)| get_nodes(scene, params, &vertices[v]))
                .collect()
        };
        for ((parent, depth), children) in batch.into_iter().zip(found) {
            let parent_key = graph.vertices()[parent].key;
            for child in children {
                let (ci, cj) = (parent_key.i + child.offset.0, parent_key.j + child.offset.1);
                let (id, _) = graph.resolve_node(ci, cj, child.point, merge_tol);
                if id >= queued.len() {
                    queued.resize(id + 1, false);
                }
                let from = graph.vertices()[parent].point;
                let to = graph.vertices()[id].point;
                let (weights, clamped) = costs::edge_weights(&from, &to, child.step, costs::ENERGY_CLAMP);
                report.clamped_gradients += usize::from(clamped);
                graph.add_edge(parent, id, weights)?;
                if !queued[id] {
                    queued[id] = true;
                    queue.push_back((id, depth + 1));
                    if frontier.len() <= depth + 1 {
                        frontier.resize(depth + 2, 0);
                    }
                    frontier[depth + 1] += 1;
                }
            }
        }
        report.queue_peak = report.queue_peak.max(queue.len());
    }

    graph.clamped_gradients = report.clamped_gradients;
    costs::apply_cross_slope(&mut graph);
    if let Some(limit) = params.cross_slope_limit {
        report.cross_slope_removed = apply_cross_slope_gate(&mut graph, limit);
    }
    report.vertex_count = graph.vertex_count();
    report.edge_count = graph.edge_count();
    report.terminated_early = graph.vertex_count() == 1;
    if options.record_frontier {
        report.frontier_snapshots = Some(frontier);
    }
    Ok((graph, report))
}

/// Removes DIRECT edges whose cross-slope over their horizontal run
/// exceeds `tan(limit_deg)`. Returns the number removed.
pub fn apply_cross_slope_gate(graph: &mut AccessGraph, limit_deg: f64) -> usize {
    let tan = limit_deg.to_radians().tan();
    let points: Vec<Point3<f64>> = graph.vertices().iter().map(|v| v.point).collect();
    graph.retain_edges(|from, e| {
        if e.weights.step != ConnectionType::Direct {
            return true;
        }
        let run = (points[e.to].xy() - points[from].xy()).norm();
        run <= 0.0 || e.weights.cross_slope / run <= tan + 1e-12
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TriangleMesh;

    fn plane(size: f64) -> Scene {
        let mut m = TriangleMesh::new("floor");
        m.push_polygon(&[
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(size, 0.0, 0.0),
            Point3::new(size, size, 0.0),
            Point3::new(0.0, size, 0.0),
        ]);
        Scene::build(vec![m], None).unwrap()
    }

    #[test]
    fn small_plane_is_a_full_grid() {
        let scene = plane(2.0);
        let params = GraphParams::new(Point3::new(1.125, 1.125, 0.0));
        let (g, report) = build_graph(&scene, &params).unwrap();
        assert_eq!(g.vertex_count(), 64);
        assert_eq!(report.vertex_count, 64);
        // 8x8 king-move graph: 2 * (2*8*7 + 2*7*7) directed edges.
        assert_eq!(g.edge_count(), 2 * (2 * 8 * 7 + 2 * 7 * 7));
        assert!(!report.terminated_early);
        assert!(g.edges().all(|(_, e)| e.weights.step == ConnectionType::Direct));
    }

    #[test]
    fn start_off_geometry_is_invalid() {
        let scene = plane(2.0);
        let params = GraphParams::new(Point3::new(5.0, 5.0, 0.0));
        assert!(matches!(build_graph(&scene, &params), Err(Error::InvalidStart { .. })));
    }

    #[test]
    fn invalid_params_fail_before_casting() {
        let scene = plane(2.0);
        let mut params = GraphParams::new(Point3::new(1.0, 1.0, 0.0));
        params.spacing = -1.0;
        assert!(matches!(build_graph(&scene, &params), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn gamma_equal_to_phi_strips_boundary_parents() {
        let scene = plane(2.0);
        let mut params = GraphParams::new(Point3::new(1.125, 1.125, 0.0));
        params.min_children = 8;
        let (g, _) = build_graph(&scene, &params).unwrap();
        // Boundary vertices exist as children but have no edges.
        for v in 0..g.vertex_count() {
            let k = g.vertices()[v].key;
            let boundary = k.i == -4 || k.i == 3 || k.j == -4 || k.j == 3;
            assert_eq!(g.is_parent(v), !boundary, "vertex {k}");
        }
    }

    #[test]
    fn frontier_counts_sum_to_vertices() {
        let scene = plane(2.0);
        let params = GraphParams::new(Point3::new(1.125, 1.125, 0.0));
        let opts = BuildOptions {
            record_frontier: true,
            ..Default::default()
        };
        let (g, report) = build_graph_with(&scene, &params, &opts).unwrap();
        let rings = report.frontier_snapshots.unwrap();
        assert_eq!(rings.iter().sum::<usize>(), g.vertex_count());
        // Chebyshev rings around (3.5, 3.5) on an 8x8 grid.
        assert_eq!(rings, vec![1, 8, 16, 24, 15]);
    }
}

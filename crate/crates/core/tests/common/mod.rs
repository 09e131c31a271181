#![allow(dead_code)]

use accessgraph::analysis::path::edge_costs;
use accessgraph::builder::{build_graph_with, BuildOptions, GraphParams};
use accessgraph::fixtures::Fixture;
use accessgraph::geometry::{Scene, TriangleMesh};
use accessgraph::graph::ConnectionType;
use accessgraph::{AccessGraph, BuildReport, CostCoefficients};
use nalgebra::Point3;
use rand::Rng;

pub fn build(f: &Fixture) -> (Scene, AccessGraph, BuildReport) {
    build_with(f, &f.params)
}

pub fn build_with(f: &Fixture, params: &GraphParams) -> (Scene, AccessGraph, BuildReport) {
    let scene = f.scene().expect("fixture scene");
    let (g, r) = build_graph_with(&scene, params, &BuildOptions::default()).expect("fixture build");
    (scene, g, r)
}

/// Length of the shortest 8-neighbor grid path between cells `d` apart.
pub fn octile(dx: f64, dy: f64) -> f64 {
    let (dx, dy) = (dx.abs(), dy.abs());
    let (lo, hi) = (dx.min(dy), dx.max(dy));
    (hi - lo) + lo * 2f64.sqrt()
}

/// Bellman-Ford distances from `start` under the composed costs.
pub fn bellman_ford(g: &AccessGraph, start: usize, cost: &CostCoefficients) -> Vec<f64> {
    let w = edge_costs(g, cost).expect("positive costs");
    let n = g.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    dist[start] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for u in 0..n {
            if dist[u].is_infinite() {
                continue;
            }
            for (e, &c) in g.out_edges(u).iter().zip(&w[u]) {
                let d = dist[u] + c;
                if d < dist[e.to] {
                    dist[e.to] = d;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Axis-aligned block standing on the `z = 0` floor.
#[derive(Clone, Debug)]
pub struct Block {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub top: f64,
}

/// Floor plus blocks: a heightfield whose height at any xy is the tallest
/// block covering it, or 0.
#[derive(Clone, Debug)]
pub struct MicroScene {
    pub blocks: Vec<Block>,
    pub parent: Point3<f64>,
    pub child: Point3<f64>,
}

pub const FLOOR_HALF: f64 = 1.0;

impl MicroScene {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.lo[0] <= x && x <= b.hi[0] && b.lo[1] <= y && y <= b.hi[1])
            .map(|b| b.top)
            .fold(0.0, f64::max)
    }

    pub fn meshes(&self) -> Vec<TriangleMesh> {
        let mut floor = TriangleMesh::new("floor");
        let h = FLOOR_HALF;
        floor.push_polygon(&[
            Point3::new(-h, -h, 0.0),
            Point3::new(h, -h, 0.0),
            Point3::new(h, h, 0.0),
            Point3::new(-h, h, 0.0),
        ]);
        let mut blocks = TriangleMesh::new("blocks");
        for b in &self.blocks {
            blocks.push_box(Point3::new(b.lo[0], b.lo[1], 0.0), Point3::new(b.hi[0], b.hi[1], b.top));
        }
        vec![floor, blocks]
    }

    pub fn triangle_count(&self) -> usize {
        2 + 12 * self.blocks.len()
    }

    /// Marches the segment `a -> b` in 1 mm steps. Returns whether every
    /// sample is above the heightfield, and how robust that verdict is: the
    /// smallest gap to any block for a clear segment, the deepest
    /// penetration into a block for a blocked one. Small margins mark
    /// ill-conditioned cases.
    pub fn march(&self, a: &Point3<f64>, b: &Point3<f64>) -> (bool, f64) {
        let len = (b - a).norm();
        let steps = (len / 1e-3).ceil().max(1.0) as usize;
        let mut gap = f64::INFINITY;
        let mut depth: f64 = 0.0;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let p = a + (b - a) * t;
            for b in &self.blocks {
                let dx = (b.lo[0] - p.x).max(p.x - b.hi[0]);
                let dy = (b.lo[1] - p.y).max(p.y - b.hi[1]);
                let above = p.z - b.top;
                if dx < 0.0 && dy < 0.0 && above < 0.0 {
                    depth = depth.max((-dx).min(-dy).min(-above));
                } else {
                    let horizontal = dx.max(0.0).hypot(dy.max(0.0));
                    gap = gap.min(horizontal.hypot(above.max(0.0)));
                }
            }
        }
        if depth > 0.0 {
            (false, depth)
        } else {
            (true, gap)
        }
    }

    /// Reference classification from marched clearances.
    pub fn oracle(&self, params: &GraphParams) -> (ConnectionType, f64) {
        let lift = nalgebra::Vector3::z() * params.eps_lift;
        let (p, c) = (self.parent + lift, self.child + lift);
        let (direct, m0) = self.march(&p, &c);
        if direct {
            return (ConnectionType::Direct, m0);
        }
        let dz = self.child.z - self.parent.z;
        let (raise, kind) = if dz.abs() <= params.eps_z {
            (params.step_up, ConnectionType::Over)
        } else if dz > 0.0 {
            (params.step_up, ConnectionType::Up)
        } else {
            (-params.step_down, ConnectionType::Down)
        };
        let (clear, m1) = self.march(&(p + nalgebra::Vector3::z() * raise), &c);
        let t = if clear { kind } else { ConnectionType::Invalid };
        (t, m0.min(m1))
    }
}

/// Random micro-scene: a parent cell and one of its eight neighbors, with
/// up to four blocks scattered between and under them.
pub fn random_micro_scene<R: Rng>(rng: &mut R, spacing: f64) -> MicroScene {
    let dirs = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
    let (di, dj) = dirs[rng.gen_range(0..dirs.len())];
    let px = rng.gen_range(-0.3..0.3);
    let py = rng.gen_range(-0.3..0.3);
    let (cx, cy) = (px + f64::from(di) * spacing, py + f64::from(dj) * spacing);
    let mut blocks = Vec::new();
    for _ in 0..rng.gen_range(0..=4) {
        let t = rng.gen_range(-0.2..1.2);
        let (mx, my) = (px + (cx - px) * t, py + (cy - py) * t);
        let wx = rng.gen_range(0.01..0.3);
        let wy = rng.gen_range(0.01..0.3);
        let top = if rng.gen_bool(0.3) {
            rng.gen_range(0.005..0.05)
        } else {
            rng.gen_range(0.05..0.4)
        };
        blocks.push(Block {
            lo: [mx - wx / 2.0, my - wy / 2.0],
            hi: [mx + wx / 2.0, my + wy / 2.0],
            top,
        });
    }
    let mut scene = MicroScene {
        blocks,
        parent: Point3::origin(),
        child: Point3::origin(),
    };
    scene.parent = Point3::new(px, py, scene.height(px, py));
    scene.child = Point3::new(cx, cy, scene.height(cx, cy));
    scene
}

/// True when the point sits within `tol` of a block's footprint boundary,
/// where its supporting height is ambiguous.
pub fn near_block_edge(s: &MicroScene, p: &Point3<f64>, tol: f64) -> bool {
    s.blocks.iter().any(|b| {
        let inside_x = p.x > b.lo[0] - tol && p.x < b.hi[0] + tol;
        let inside_y = p.y > b.lo[1] - tol && p.y < b.hi[1] + tol;
        let edge_x = (p.x - b.lo[0]).abs() < tol || (p.x - b.hi[0]).abs() < tol;
        let edge_y = (p.y - b.lo[1]).abs() < tol || (p.y - b.hi[1]).abs() < tol;
        (edge_x && inside_y) || (edge_y && inside_x)
    })
}

//! Flat bounding volume hierarchy over the scene triangles.
//!
//! Nodes live in one `Vec`; an interior node's left child directly follows
//! it and `right` stores the index of the right child. Leaves reference a
//! contiguous range of `order`, the permuted triangle index list.
//!
//! Splits are object-median along the widest centroid axis. Ties in the
//! centroid sort fall back to the triangle index, so the same input always
//! produces the same tree.

use super::triangle::Triangle;
use nalgebra::{Point3, Vector3};

const LEAF_SIZE: usize = 4;

/// Absolute box padding. Keeps slab tests conservative with respect to the
/// barycentric slack used by the triangle kernel.
const PAD: f64 = 1e-7;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, min: &Point3<f64>, max: &Point3<f64>) {
        self.min = self.min.inf(min);
        self.max = self.max.sup(max);
    }

    fn padded(mut self) -> Self {
        let pad = Vector3::repeat(PAD) + (self.max - self.min).abs() * 1e-9;
        self.min -= pad;
        self.max += pad;
        self
    }

    /// Entry parameter of the ray into the box, clipped to `[0, max_t]`.
    fn entry(&self, origin: &Point3<f64>, dir: &Vector3<f64>, max_t: f64) -> Option<f64> {
        let mut t0 = 0.0_f64;
        let mut t1 = max_t;
        for axis in 0..3 {
            let o = origin[axis];
            let d = dir[axis];
            if d == 0.0 {
                if o < self.min[axis] || o > self.max[axis] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let mut near = (self.min[axis] - o) * inv;
            let mut far = (self.max[axis] - o) * inv;
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`. Interior: index of the right child.
    first_or_right: u32,
    /// Zero for interior nodes.
    count: u32,
}

#[derive(Clone, Debug)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Nearest hit as `(t, triangle index)`.
pub(crate) type Hit = (f64, u32);

/// Strict ordering used for nearest-hit selection: distance first, then
/// global triangle index (which is ordered by object id, then local id).
pub(crate) fn closer(a: Hit, b: Hit) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

impl Bvh {
    pub fn build(triangles: &[Triangle]) -> Self {
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let centroids: Vec<Point3<f64>> = triangles.iter().map(Triangle::centroid).collect();
        let mut nodes = Vec::with_capacity(triangles.len().max(1) * 2);
        if !triangles.is_empty() {
            build_recursive(triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        Bvh { nodes, order }
    }

    pub fn nearest(
        &self,
        triangles: &[Triangle],
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        max_t: f64,
    ) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Hit> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            let limit = best.map_or(max_t, |b| b.0.min(max_t));
            // Boxes entered exactly at the current best distance are still
            // visited so equal-distance ties resolve by triangle index.
            if node.bounds.entry(origin, dir, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.first_or_right as usize;
                for &tri in &self.order[start..start + node.count as usize] {
                    if let Some(t) = triangles[tri as usize].intersect(origin, dir) {
                        if t <= max_t && best.map_or(true, |b| closer((t, tri), b)) {
                            best = Some((t, tri));
                        }
                    }
                }
            } else {
                stack.push(node.first_or_right);
                stack.push(idx + 1);
            }
        }
        best
    }

    #[cfg(test)]
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            let n = &nodes[idx];
            if n.count > 0 {
                1
            } else {
                1 + walk(nodes, idx + 1).max(walk(nodes, n.first_or_right as usize))
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }
}

fn build_recursive(
    triangles: &[Triangle],
    centroids: &[Point3<f64>],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        let tri = &triangles[t as usize];
        bounds.grow(&tri.min(), &tri.max());
        let c = centroids[t as usize];
        cbounds.grow(&c, &c);
    }
    let idx = nodes.len();
    nodes.push(Node {
        bounds: bounds.padded(),
        first_or_right: start as u32,
        count: (end - start) as u32,
    });
    if end - start <= LEAF_SIZE {
        return idx;
    }

    let extent = cbounds.max - cbounds.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    if extent[axis] <= 0.0 {
        // All centroids coincide; splitting cannot separate them.
        return idx;
    }
    order[start..end].sort_by(|&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let mid = start + (end - start) / 2;
    build_recursive(triangles, centroids, order, start, mid, nodes);
    let right = build_recursive(triangles, centroids, order, mid, end, nodes);
    nodes[idx].first_or_right = right as u32;
    nodes[idx].count = 0;
    idx
}

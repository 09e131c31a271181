//! Triangle scenes and the two geometric primitives the graph builder
//! consumes: nearest ray hit and Euclidean distance.

mod bvh;
pub mod io;
mod triangle;

use crate::error::{Error, Result};
use bvh::Bvh;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use triangle::Triangle;

/// Tolerance for geometric comparisons, in meters.
pub const EPS_GEO: f64 = 1e-6;

/// Triangles with less area than this are dropped at load.
const MIN_AREA: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub name: String,
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(name: impl Into<String>) -> Self {
        TriangleMesh {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn push_vertex(&mut self, p: Point3<f64>) -> u32 {
        self.vertices.push(p);
        (self.vertices.len() - 1) as u32
    }

    /// Appends a planar polygon, fan-triangulated from its first corner.
    pub fn push_polygon(&mut self, corners: &[Point3<f64>]) {
        let ids: Vec<u32> = corners.iter().map(|p| self.push_vertex(*p)).collect();
        for k in 1..ids.len().saturating_sub(1) {
            self.triangles.push([ids[0], ids[k], ids[k + 1]]);
        }
    }

    /// Appends an axis-aligned box.
    pub fn push_box(&mut self, min: Point3<f64>, max: Point3<f64>) {
        let c = |x: bool, y: bool, z: bool| {
            Point3::new(
                if x { max.x } else { min.x },
                if y { max.y } else { min.y },
                if z { max.z } else { min.z },
            )
        };
        let base = self.vertices.len() as u32;
        for k in 0..8 {
            self.vertices.push(c(k & 1 != 0, k & 2 != 0, k & 4 != 0));
        }
        const FACES: [[u32; 4]; 6] = [
            [0, 2, 3, 1],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 4, 6, 2],
            [1, 3, 7, 5],
        ];
        for f in FACES {
            self.triangles.push([base + f[0], base + f[1], base + f[2]]);
            self.triangles.push([base + f[0], base + f[2], base + f[3]]);
        }
    }

    /// Appends another mesh's geometry.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
}

/// Per-object label. Untagged objects are walkable.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum SurfaceTag {
    #[default]
    Walkable,
    Obstacle,
    /// Walkable, with a surface class name available to cost hooks.
    SurfaceClass(String),
}

impl SurfaceTag {
    pub fn is_walkable(&self) -> bool {
        !matches!(self, SurfaceTag::Obstacle)
    }
}

impl fmt::Display for SurfaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceTag::Walkable => f.write_str("walkable"),
            SurfaceTag::Obstacle => f.write_str("obstacle"),
            SurfaceTag::SurfaceClass(c) => write!(f, "surface-class:{c}"),
        }
    }
}

impl std::str::FromStr for SurfaceTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "walkable" => Ok(SurfaceTag::Walkable),
            "obstacle" => Ok(SurfaceTag::Obstacle),
            other => match other.strip_prefix("surface-class:") {
                Some(class) if !class.is_empty() => Ok(SurfaceTag::SurfaceClass(class.to_string())),
                _ => Err(Error::Parse {
                    format: "labels",
                    message: format!("unknown tag `{other}`"),
                }),
            },
        }
    }
}

impl Serialize for SurfaceTag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SurfaceTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sidecar label map: object name to tag.
pub type Labels = BTreeMap<String, SurfaceTag>;

#[derive(Clone, Debug)]
pub struct SceneObject {
    pub mesh: TriangleMesh,
    pub tag: SurfaceTag,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub point: Point3<f64>,
    pub object_id: usize,
    pub triangle_id: usize,
}

/// An immutable set of labeled meshes with a ray-cast index.
#[derive(Clone, Debug)]
pub struct Scene {
    objects: Vec<SceneObject>,
    triangles: Vec<Triangle>,
    bvh: Bvh,
    dropped_degenerate: usize,
    bounds: (Point3<f64>, Point3<f64>),
}

impl Scene {
    /// Builds the scene and its BVH. Objects not named in `labels` are
    /// walkable.
    pub fn build(meshes: Vec<TriangleMesh>, labels: Option<&Labels>) -> Result<Scene> {
        if meshes.is_empty() {
            return Err(Error::EmptyScene);
        }
        let mut objects = Vec::with_capacity(meshes.len());
        let mut triangles = Vec::new();
        let mut dropped = 0;
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for (object_id, mesh) in meshes.into_iter().enumerate() {
            if mesh.vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
                return Err(Error::NonFiniteCoordinate { mesh: mesh.name });
            }
            let mut kept = Vec::with_capacity(mesh.triangles.len());
            for (t, tri) in mesh.triangles.iter().enumerate() {
                if let Some(&bad) = tri.iter().find(|&&i| i as usize >= mesh.vertices.len()) {
                    return Err(Error::InvalidIndex {
                        mesh: mesh.name.clone(),
                        triangle: t,
                        index: bad,
                        vertex_count: mesh.vertices.len(),
                    });
                }
                let [a, b, c] = tri.map(|i| mesh.vertices[i as usize]);
                if triangle::area(&a, &b, &c) <= MIN_AREA {
                    dropped += 1;
                } else {
                    kept.push(*tri);
                }
            }
            for (local, tri) in kept.iter().enumerate() {
                let v = tri.map(|i| mesh.vertices[i as usize]);
                for p in &v {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                triangles.push(Triangle {
                    v,
                    object: object_id as u32,
                    local: local as u32,
                });
            }
            let tag = labels
                .and_then(|l| l.get(&mesh.name))
                .cloned()
                .unwrap_or_default();
            objects.push(SceneObject {
                mesh: TriangleMesh {
                    triangles: kept,
                    ..mesh
                },
                tag,
            });
        }
        if !objects.iter().any(|o| o.tag.is_walkable()) {
            return Err(Error::EmptyWalkableSet);
        }
        if triangles.is_empty() {
            lo = Point3::origin();
            hi = Point3::origin();
        }
        let bvh = Bvh::build(&triangles);
        Ok(Scene {
            objects,
            triangles,
            bvh,
            dropped_degenerate: dropped,
            bounds: (lo, hi),
        })
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Zero-area triangles removed while building.
    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        self.bounds
    }

    /// Object ids in the walkable set.
    pub fn walkable(&self) -> Vec<usize> {
        (0..self.objects.len())
            .filter(|&i| self.objects[i].tag.is_walkable())
            .collect()
    }

    pub fn is_walkable(&self, object_id: usize) -> bool {
        self.objects[object_id].tag.is_walkable()
    }

    /// Nearest hit along `direction` (unit length) within `max_dist`.
    /// Equal distances resolve to the lowest object id, then triangle id.
    pub fn inter(
        &self,
        origin: &Point3<f64>,
        direction: &Vector3<f64>,
        max_dist: f64,
    ) -> Option<RayHit> {
        debug_assert!((direction.norm() - 1.0).abs() <= EPS_GEO);
        self.bvh
            .nearest(&self.triangles, origin, direction, max_dist)
            .map(|hit| self.to_ray_hit(origin, direction, hit))
    }

    /// Exhaustive nearest hit over every triangle, without the BVH.
    pub fn inter_brute_force(
        &self,
        origin: &Point3<f64>,
        direction: &Vector3<f64>,
        max_dist: f64,
    ) -> Option<RayHit> {
        let mut best: Option<bvh::Hit> = None;
        for (i, tri) in self.triangles.iter().enumerate() {
            if let Some(t) = tri.intersect(origin, direction) {
                if t <= max_dist && best.map_or(true, |b| bvh::closer((t, i as u32), b)) {
                    best = Some((t, i as u32));
                }
            }
        }
        best.map(|hit| self.to_ray_hit(origin, direction, hit))
    }

    /// True when nothing blocks the straight segment from `a` to `b`.
    /// A hit within `EPS_GEO` of `b` does not block.
    pub fn segment_clear(&self, a: &Point3<f64>, b: &Point3<f64>) -> bool {
        let len = dst(a, b);
        if len <= EPS_GEO {
            return true;
        }
        let dir = (b - a) / len;
        match self.inter(a, &dir, len) {
            None => true,
            Some(hit) => hit.distance >= len - EPS_GEO,
        }
    }

    fn to_ray_hit(&self, origin: &Point3<f64>, dir: &Vector3<f64>, (t, idx): bvh::Hit) -> RayHit {
        let tri = &self.triangles[idx as usize];
        RayHit {
            distance: t,
            point: origin + dir * t,
            object_id: tri.object as usize,
            triangle_id: tri.local as usize,
        }
    }
}

/// Euclidean distance.
pub fn dst(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (a - b).norm()
}

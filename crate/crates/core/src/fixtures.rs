//! Synthetic scenes with known geometry, each bundled with build
//! parameters and named landmark points.

use crate::builder::GraphParams;
use crate::error::Result;
use crate::geometry::{io, Labels, Scene, SurfaceTag, TriangleMesh};
use nalgebra::Point3;
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub meshes: Vec<TriangleMesh>,
    pub labels: Labels,
    pub params: GraphParams,
    pub landmarks: BTreeMap<String, Point3<f64>>,
}

impl Fixture {
    fn new(name: &'static str, start: Point3<f64>) -> Self {
        Fixture {
            name,
            meshes: Vec::new(),
            labels: Labels::new(),
            params: GraphParams::new(start),
            landmarks: BTreeMap::new(),
        }
    }

    fn mesh(mut self, mesh: TriangleMesh) -> Self {
        self.meshes.push(mesh);
        self
    }

    fn obstacle(mut self, mesh: TriangleMesh) -> Self {
        self.labels.insert(mesh.name.clone(), SurfaceTag::Obstacle);
        self.meshes.push(mesh);
        self
    }

    fn landmark(mut self, name: &str, x: f64, y: f64, z: f64) -> Self {
        self.landmarks.insert(name.to_string(), Point3::new(x, y, z));
        self
    }

    pub fn scene(&self) -> Result<Scene> {
        Scene::build(self.meshes.clone(), Some(&self.labels))
    }

    pub fn landmark_point(&self, name: &str) -> Point3<f64> {
        self.landmarks[name]
    }

    pub fn write_obj<W: Write>(&self, w: &mut W) -> Result<()> {
        io::write_obj(w, &self.meshes)
    }

    pub fn labels_json(&self) -> String {
        serde_json::to_string_pretty(&self.labels).expect("labels serialize")
    }
}

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 12] = [
    "flat_floor",
    "wall",
    "stairs",
    "steep_ramp",
    "one_way_ramp",
    "curb",
    "ramp_corner",
    "hill",
    "kitchen",
    "corridor",
    "sphere",
    "building",
];

pub fn by_name(name: &str) -> Option<Fixture> {
    Some(match name {
        "flat_floor" => flat_floor(10.0),
        "wall" => wall(),
        "stairs" => stairs(12, 0.15),
        "steep_ramp" => steep_ramp(40.0),
        "one_way_ramp" => one_way_ramp(),
        "curb" => curb(),
        "ramp_corner" => ramp_corner(),
        "hill" => hill(0.5),
        "kitchen" => kitchen(),
        "corridor" => corridor(2.0),
        "sphere" => sphere(10.0),
        "building" => building(),
        _ => return None,
    })
}

fn rect(name: &str, x0: f64, y0: f64, x1: f64, y1: f64, z: f64) -> TriangleMesh {
    let mut m = TriangleMesh::new(name);
    m.push_polygon(&[
        Point3::new(x0, y0, z),
        Point3::new(x1, y0, z),
        Point3::new(x1, y1, z),
        Point3::new(x0, y1, z),
    ]);
    m
}

fn boxes(name: &str, parts: &[([f64; 3], [f64; 3])]) -> TriangleMesh {
    let mut m = TriangleMesh::new(name);
    for (lo, hi) in parts {
        m.push_box(Point3::from(*lo), Point3::from(*hi));
    }
    m
}

/// Walls of thickness `t` and height `h` enclosing `[x0, x1] x [y0, y1]`.
fn enclosure(name: &str, x0: f64, y0: f64, x1: f64, y1: f64, t: f64, h: f64) -> TriangleMesh {
    boxes(
        name,
        &[
            ([x0 - t, y0 - t, 0.0], [x1 + t, y0, h]),
            ([x0 - t, y1, 0.0], [x1 + t, y1 + t, h]),
            ([x0 - t, y0, 0.0], [x0, y1, h]),
            ([x1, y0, 0.0], [x1 + t, y1, h]),
        ],
    )
}

/// Regular grid of `cell`-sized squares over `[x0, x1] x [y0, y1]`, two
/// triangles each, with heights from `f`.
pub fn heightfield(name: &str, x0: f64, y0: f64, x1: f64, y1: f64, cell: f64, f: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let nx = ((x1 - x0) / cell).round() as u32;
    let ny = ((y1 - y0) / cell).round() as u32;
    let mut m = TriangleMesh::new(name);
    for j in 0..=ny {
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * f64::from(i) / f64::from(nx);
            let y = y0 + (y1 - y0) * f64::from(j) / f64::from(ny);
            m.push_vertex(Point3::new(x, y, f(x, y)));
        }
    }
    let id = |i: u32, j: u32| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            m.triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            m.triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    m
}

/// UV sphere centered at the origin.
pub fn uv_sphere(name: &str, radius: f64, rings: u32, segments: u32) -> TriangleMesh {
    use std::f64::consts::PI;
    let mut m = TriangleMesh::new(name);
    let top = m.push_vertex(Point3::new(0.0, 0.0, radius));
    for r in 1..rings {
        let theta = PI * f64::from(r) / f64::from(rings);
        for s in 0..segments {
            let phi = 2.0 * PI * f64::from(s) / f64::from(segments);
            m.push_vertex(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    let bottom = m.push_vertex(Point3::new(0.0, 0.0, -radius));
    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + s % segments;
    for s in 0..segments {
        m.triangles.push([top, ring(1, s), ring(1, s + 1)]);
        m.triangles.push([bottom, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            m.triangles.push([ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)]);
            m.triangles.push([ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)]);
        }
    }
    m
}

/// Square floor `[0, size]^2`, start near the center, landmarks at the
/// corners' nearest cell centers.
pub fn flat_floor(size: f64) -> Fixture {
    let c = size / 2.0 + 0.125;
    Fixture::new("flat_floor", Point3::new(c, c, 0.0))
        .mesh(rect("floor", 0.0, 0.0, size, size, 0.0))
        .landmark("sw", 0.125, 0.125, 0.0)
        .landmark("ne", size - 0.125, size - 0.125, 0.0)
}

/// Floor split by a 3 m wall at `x = 3`.
pub fn wall() -> Fixture {
    Fixture::new("wall", Point3::new(0.125, 0.125, 0.0))
        .mesh(rect("floor", 0.0, 0.0, 6.0, 4.0, 0.0))
        .obstacle(boxes("wall", &[([2.9, -0.5, 0.0], [3.1, 4.5, 3.0])]))
        .landmark("west", 0.125, 2.125, 0.0)
        .landmark("east", 5.875, 2.125, 0.0)
}

/// Straight flight of `risers` steps of height `rise`, one tread per grid
/// cell, between a lower floor and an upper floor.
pub fn stairs(risers: u32, rise: f64) -> Fixture {
    let tread = 0.25;
    let top = f64::from(risers) * rise;
    let run = f64::from(risers - 1) * tread;
    let mut parts = Vec::new();
    for k in 1..risers {
        let x0 = f64::from(k - 1) * tread;
        parts.push(([x0, -1.0, 0.0], [x0 + tread, 1.0, f64::from(k) * rise]));
    }
    parts.push(([run, -1.0, 0.0], [run + 2.0, 1.0, top]));
    Fixture::new("stairs", Point3::new(-1.125, 0.125, 0.0))
        .mesh(rect("lower", -2.0, -1.0, 0.0, 1.0, 0.0))
        .mesh(boxes("flight", &parts))
        .landmark("bottom", -1.125, 0.125, 0.0)
        .landmark("top", run + 1.125, 0.125, top)
}

/// Floating ramp strip narrower than one grid cell, inclined by `degrees`
/// along +x.
pub fn steep_ramp(degrees: f64) -> Fixture {
    let rise = 4.0 * degrees.to_radians().tan();
    let mut m = TriangleMesh::new("ramp");
    m.push_polygon(&[
        Point3::new(0.0, -0.05, 0.0),
        Point3::new(4.0, -0.05, rise),
        Point3::new(4.0, 0.05, rise),
        Point3::new(0.0, 0.05, 0.0),
    ]);
    let x = 2.0;
    Fixture::new("steep_ramp", Point3::new(x, 0.0, x * degrees.to_radians().tan())).mesh(m)
}

/// Lower floor, a 30 degree ramp and an upper floor. With `s_u = 20` the
/// ramp can be walked down but not up, diagonally included
/// (`atan(tan 30 / sqrt 2)` is about 22 degrees).
pub fn one_way_ramp() -> Fixture {
    let rise = 1.0;
    let run = rise / 30f64.to_radians().tan();
    let mut ramp = TriangleMesh::new("ramp");
    ramp.push_polygon(&[
        Point3::new(0.0, -1.0, 0.0),
        Point3::new(run, -1.0, rise),
        Point3::new(run, 1.0, rise),
        Point3::new(0.0, 1.0, 0.0),
    ]);
    let mut f = Fixture::new("one_way_ramp", Point3::new(run + 1.0, 0.125, rise))
        .mesh(rect("lower", -2.0, -1.0, 0.0, 1.0, 0.0))
        .mesh(ramp)
        .mesh(rect("upper", run, -1.0, run + 2.0, 1.0, rise))
        .landmark("bottom", -1.0, 0.125, 0.0)
        .landmark("top", run + 1.0, 0.125, rise);
    f.params.slope_down = -35.0;
    f
}

/// Floor with a thin 8 cm curb across it at `x = 1`, midway between two
/// grid columns.
pub fn curb() -> Fixture {
    Fixture::new("curb", Point3::new(0.125, 0.125, 0.0))
        .mesh(rect("floor", 0.0, 0.0, 4.0, 2.0, 0.0))
        .mesh(boxes("curb", &[([0.99, 0.0, 0.0], [1.01, 2.0, 0.08])]))
        .landmark("west", 0.125, 1.125, 0.0)
        .landmark("east", 1.875, 1.125, 0.0)
}

/// Grade of the [`ramp_corner`] ramp.
pub const RAMP_GRADE: f64 = 0.1;

/// Flat floor `x in [0, 4]`, a 10% ramp rising along +x over `[4, 8]`, and a
/// landing to `x = 8.5`; all 4 m wide.
pub fn ramp_corner() -> Fixture {
    let top = 4.0 * RAMP_GRADE;
    let mut ramp = TriangleMesh::new("ramp");
    ramp.push_polygon(&[
        Point3::new(4.0, 0.0, 0.0),
        Point3::new(8.0, 0.0, top),
        Point3::new(8.0, 4.0, top),
        Point3::new(4.0, 4.0, 0.0),
    ]);
    Fixture::new("ramp_corner", Point3::new(0.125, 0.125, 0.0))
        .mesh(rect("floor", 0.0, 0.0, 4.0, 4.0, 0.0))
        .mesh(ramp)
        .mesh(rect("landing", 8.0, 0.0, 8.5, 4.0, top))
        .landmark("start", 0.125, 0.125, 0.0)
        .landmark("goal", 8.375, 3.875, top)
}

/// Height of the [`hill`] summit and its Gaussian width.
pub const HILL_HEIGHT: f64 = 2.0;
pub const HILL_SIGMA: f64 = 2.0;

pub fn hill_height(x: f64, y: f64) -> f64 {
    HILL_HEIGHT * (-(x * x + y * y) / (2.0 * HILL_SIGMA * HILL_SIGMA)).exp()
}

/// Gaussian hill on a 16 m x 12 m terrain, sampled at grid spacing `a`.
pub fn hill(a: f64) -> Fixture {
    let mut f = Fixture::new("hill", Point3::new(-7.25, 0.25, 0.0))
        .mesh(heightfield("terrain", -8.0, -6.0, 8.0, 6.0, 0.25, hill_height))
        .landmark("west", -6.75, 0.25, hill_height(-6.75, 0.25))
        .landmark("east", 6.75, 0.25, hill_height(6.75, 0.25));
    f.params.spacing = a;
    f.params.slope_up = 35.0;
    f.params.slope_down = -35.0;
    f.params.eps_lift = 0.1;
    f
}

/// Kitchen with counters, a stove run and a table. The refrigerator, sink
/// and stove landmarks are 2.41 m, 3.40 m and 5.00 m apart.
pub fn kitchen() -> Fixture {
    let (a, b, c) = (2.41f64, 3.40f64, 5.0f64);
    let sx = (a * a - b * b + c * c) / (2.0 * c);
    let sy = (a * a - sx * sx).sqrt();
    Fixture::new("kitchen", Point3::new(0.0, 0.0, 0.0))
        .mesh(rect("floor", -1.0, -1.5, 6.0, 3.5, 0.0))
        .obstacle(enclosure("walls", -1.0, -1.5, 6.0, 3.5, 0.2, 2.7))
        .obstacle(boxes("counter", &[([-1.0, -1.5, 0.0], [6.0, -0.6, 0.9])]))
        .obstacle(boxes("stove_run", &[([1.2, 2.0, 0.0], [2.7, 2.6, 0.9])]))
        .obstacle(boxes("table", &[([3.5, 2.2, 0.0], [4.5, 3.2, 0.75])]))
        .landmark("refrigerator", 0.0, 0.0, 0.0)
        .landmark("sink", c, 0.0, 0.0)
        .landmark("stove", sx, sy, 0.0)
}

/// Straight 10 m corridor of the given width with 3 m walls, centered on
/// `y = 0`.
pub fn corridor(width: f64) -> Fixture {
    let h = width / 2.0;
    Fixture::new("corridor", Point3::new(0.125, 0.0, 0.0))
        .mesh(rect("floor", -5.0, -h, 5.0, h, 0.0))
        .obstacle(enclosure("walls", -5.0, -h, 5.0, h, 0.2, 3.0))
}

/// Small platform inside a closed sphere shell, placed so a 1.8 m eye above
/// the start node sits at the sphere's center.
pub fn sphere(radius: f64) -> Fixture {
    let eye = 1.8;
    let r = 0.5;
    Fixture::new("sphere", Point3::new(0.0, 0.0, -eye))
        .mesh(rect("platform", -r, -r, r, r, -eye))
        .obstacle(uv_sphere("shell", radius, 64, 128))
}

/// L-shaped corridor: an arm along x over `[0, 12] x [0, 3]` and an arm
/// along y over `[9, 12] x [0, 12]`, walled to 3 m.
pub fn building() -> Fixture {
    let t = 0.2;
    let h = 3.0;
    let mut floor = rect("floor", 0.0, 0.0, 12.0, 3.0, 0.0);
    floor.append(&rect("", 9.0, 3.0, 12.0, 12.0, 0.0));
    let walls = boxes(
        "walls",
        &[
            ([-t, -t, 0.0], [12.0 + t, 0.0, h]),
            ([-t, 0.0, 0.0], [0.0, 3.0 + t, h]),
            ([0.0, 3.0, 0.0], [9.0, 3.0 + t, h]),
            ([9.0 - t, 3.0 + t, 0.0], [9.0, 12.0 + t, h]),
            ([9.0, 12.0, 0.0], [12.0 + t, 12.0 + t, h]),
            ([12.0, 0.0, 0.0], [12.0 + t, 12.0, h]),
        ],
    );
    Fixture::new("building", Point3::new(1.125, 1.625, 0.0))
        .mesh(floor)
        .obstacle(walls)
        .landmark("west", 1.125, 1.625, 0.0)
        .landmark("north", 10.625, 10.875, 0.0)
}

/// Distance in the xy plane from `p` to the nearest wall face of
/// [`building`].
pub fn building_clearance(p: &Point3<f64>) -> f64 {
    let segments = [
        ((0.0, 0.0), (12.0, 0.0)),
        ((0.0, 0.0), (0.0, 3.0)),
        ((0.0, 3.0), (9.0, 3.0)),
        ((9.0, 3.0), (9.0, 12.0)),
        ((9.0, 12.0), (12.0, 12.0)),
        ((12.0, 0.0), (12.0, 12.0)),
    ];
    segments
        .iter()
        .map(|&((ax, ay), (bx, by))| {
            let (dx, dy) = (bx - ax, by - ay);
            let t = (((p.x - ax) * dx + (p.y - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            ((p.x - ax - t * dx).powi(2) + (p.y - ay - t * dy).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

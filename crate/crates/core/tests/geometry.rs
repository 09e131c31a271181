use accessgraph::fixtures;
use accessgraph::geometry::io::{read_obj, read_ply, write_obj, write_ply, UpAxis};
use accessgraph::geometry::{dst, Scene, EPS_GEO};
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use std::sync::OnceLock;

fn scenes() -> &'static Vec<Scene> {
    static SCENES: OnceLock<Vec<Scene>> = OnceLock::new();
    SCENES.get_or_init(|| {
        ["kitchen", "stairs", "hill", "building", "sphere"]
            .iter()
            .map(|n| fixtures::by_name(n).unwrap().scene().unwrap())
            .collect()
    })
}

fn unit(theta: f64, z: f64) -> Vector3<f64> {
    let r = (1.0 - z * z).sqrt();
    Vector3::new(r * theta.cos(), r * theta.sin(), z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn bvh_matches_exhaustive_scan(
        which in 0usize..5,
        u in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        theta in 0.0f64..std::f64::consts::TAU,
        z in -1.0f64..1.0,
    ) {
        let scene = &scenes()[which];
        let (lo, hi) = scene.bounds();
        let origin = Point3::new(
            lo.x + (hi.x - lo.x) * u.0,
            lo.y + (hi.y - lo.y) * u.1,
            lo.z + (hi.z - lo.z) * u.2,
        );
        let dir = unit(theta, z);
        let fast = scene.inter(&origin, &dir, 100.0);
        let slow = scene.inter_brute_force(&origin, &dir, 100.0);
        match (fast, slow) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                prop_assert!((a.distance - b.distance).abs() <= EPS_GEO);
                prop_assert_eq!((a.object_id, a.triangle_id), (b.object_id, b.triangle_id));
            }
            (a, b) => prop_assert!(false, "bvh {:?} vs scan {:?}", a, b),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hits_never_exceed_max_dist(
        which in 0usize..5,
        o in (-10.0f64..10.0, -10.0f64..10.0, -2.0f64..4.0),
        theta in 0.0f64..std::f64::consts::TAU,
        z in -1.0f64..1.0,
        max in 0.0f64..8.0,
    ) {
        let scene = &scenes()[which];
        let origin = Point3::new(o.0, o.1, o.2);
        if let Some(hit) = scene.inter(&origin, &unit(theta, z), max) {
            prop_assert!(hit.distance <= max);
            prop_assert!(hit.distance >= 0.0);
        }
    }

    #[test]
    fn dst_triangle_inequality(
        a in prop::array::uniform3(-100.0f64..100.0),
        b in prop::array::uniform3(-100.0f64..100.0),
        c in prop::array::uniform3(-100.0f64..100.0),
    ) {
        let (a, b, c) = (Point3::from(a), Point3::from(b), Point3::from(c));
        prop_assert!(dst(&a, &c) <= dst(&a, &b) + dst(&b, &c) + 1e-9);
        prop_assert_eq!(dst(&a, &b), dst(&b, &a));
    }
}

/// Triangles as coordinate triples, independent of vertex numbering.
fn corners(m: &accessgraph::TriangleMesh) -> Vec<[Point3<f64>; 3]> {
    m.triangles
        .iter()
        .map(|t| t.map(|i| m.vertices[i as usize]))
        .collect()
}

#[test]
fn obj_round_trip_preserves_geometry_and_labels() {
    let k = fixtures::kitchen();
    let mut buf = Vec::new();
    k.write_obj(&mut buf).unwrap();
    let meshes = read_obj(&mut buf.as_slice(), UpAxis::Z).unwrap();
    assert_eq!(meshes.len(), k.meshes.len());
    for (a, b) in meshes.iter().zip(&k.meshes) {
        assert_eq!(a.name, b.name);
        assert_eq!(corners(a), corners(b));
    }
    let scene = Scene::build(meshes, Some(&k.labels)).unwrap();
    assert_eq!(scene.walkable().len(), 1);
    let mut again = Vec::new();
    write_obj(&mut again, &k.meshes).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn ply_round_trip() {
    let hill = fixtures::hill(0.5);
    let mesh = &hill.meshes[0];
    let mut buf = Vec::new();
    write_ply(&mut buf, mesh, None).unwrap();
    let back = read_ply(&buf, "terrain", UpAxis::Z).unwrap();
    assert_eq!(back.vertices, mesh.vertices);
    assert_eq!(back.triangles, mesh.triangles);
}

#[test]
fn downcast_onto_stairs_lands_on_each_tread() {
    let stairs = fixtures::stairs(12, 0.15);
    let scene = stairs.scene().unwrap();
    for k in 1..12 {
        let x = 0.25 * f64::from(k - 1) + 0.125;
        let hit = scene.inter(&Point3::new(x, 0.0, 5.0), &-Vector3::z(), 10.0).unwrap();
        assert!((hit.point.z - 0.15 * f64::from(k)).abs() < EPS_GEO, "tread {k}");
    }
}

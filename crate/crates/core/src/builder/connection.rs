//! Candidate validation and connection classification between a parent
//! node and a candidate child.

use super::GraphParams;
use crate::geometry::{Scene, EPS_GEO};
use crate::graph::ConnectionType;
use nalgebra::{Point3, Vector3};

/// Classifies the movement needed to get from `p` to `c`, both on walkable
/// surfaces.
///
/// The straight segment between the nodes (both lifted by `eps_lift`) is
/// tried first. When it is blocked, the parent end is raised by `b_u` for
/// ascents and level step-overs, or by `|b_d|` for descents, and the
/// segment is tried again.
pub fn get_connection(scene: &Scene, params: &GraphParams, p: &Point3<f64>, c: &Point3<f64>) -> ConnectionType {
    let lift = Vector3::z() * params.eps_lift;
    let from = p + lift;
    let to = c + lift;
    if scene.segment_clear(&from, &to) {
        return ConnectionType::Direct;
    }
    let dz = c.z - p.z;
    let (raise, kind) = if dz.abs() <= params.eps_z {
        (params.step_up, ConnectionType::Over)
    } else if dz > 0.0 {
        (params.step_up, ConnectionType::Up)
    } else {
        (-params.step_down, ConnectionType::Down)
    };
    if scene.segment_clear(&(from + Vector3::z() * raise), &to) {
        kind
    } else {
        ConnectionType::Invalid
    }
}

/// True when the height change from `p` to `c` satisfies the gate for
/// connection type `t`: the slope band for DIRECT edges, the step band for
/// stepped ones.
pub fn within_limits(params: &GraphParams, t: ConnectionType, p: &Point3<f64>, c: &Point3<f64>) -> bool {
    let dz = c.z - p.z;
    match t {
        ConnectionType::Direct => {
            let run = (c.xy() - p.xy()).norm();
            let lo = params.slope_down.to_radians().tan() * run;
            let hi = params.slope_up.to_radians().tan() * run;
            lo - EPS_GEO <= dz && dz <= hi + EPS_GEO
        }
        ConnectionType::Up => dz > 0.0 && dz <= params.step_up + EPS_GEO,
        ConnectionType::Down => dz < 0.0 && dz >= params.step_down - EPS_GEO,
        ConnectionType::Over => dz.abs() <= params.eps_z,
        ConnectionType::Invalid => false,
    }
}

/// Validates candidate `candidate` (the parent's grid neighbor, lifted by
/// `h`) by casting straight down. Returns the connection type and the
/// landing point on success.
pub fn check_child(
    scene: &Scene,
    params: &GraphParams,
    parent: &Point3<f64>,
    candidate: &Point3<f64>,
) -> Option<(ConnectionType, Point3<f64>)> {
    let hit = scene.inter(candidate, &-Vector3::z(), params.max_drop())?;
    if !scene.is_walkable(hit.object_id) {
        return None;
    }
    let child = Point3::new(candidate.x, candidate.y, candidate.z - hit.distance);
    let t = get_connection(scene, params, parent, &child);
    within_limits(params, t, parent, &child).then_some((t, child))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Labels, SurfaceTag, TriangleMesh};

    fn floor(m: &mut TriangleMesh, x0: f64, x1: f64, z: f64) {
        m.push_polygon(&[
            Point3::new(x0, -2.0, z),
            Point3::new(x1, -2.0, z),
            Point3::new(x1, 2.0, z),
            Point3::new(x0, 2.0, z),
        ]);
    }

    fn params() -> GraphParams {
        let mut p = GraphParams::new(Point3::origin());
        p.step_up = 0.2;
        p.step_down = -0.2;
        p.slope_up = 20.0;
        p.slope_down = -20.0;
        p
    }

    #[test]
    fn open_floor_is_direct() {
        let mut m = TriangleMesh::new("floor");
        floor(&mut m, -2.0, 2.0, 0.0);
        let scene = Scene::build(vec![m], None).unwrap();
        let p = Point3::new(0.0, 0.0, 0.0);
        let c = Point3::new(0.25, 0.0, 0.0);
        assert_eq!(get_connection(&scene, &params(), &p, &c), ConnectionType::Direct);
        let (t, at) = check_child(&scene, &params(), &p, &Point3::new(0.25, 0.0, 1.7)).unwrap();
        assert_eq!(t, ConnectionType::Direct);
        assert!(at.z.abs() < EPS_GEO);
    }

    #[test]
    fn riser_below_limit_is_up() {
        // Lower floor to x = 0.125, upper floor 12 cm higher beyond it.
        let mut m = TriangleMesh::new("stairs");
        floor(&mut m, -2.0, 0.125, 0.0);
        m.push_box(Point3::new(0.125, -2.0, 0.0), Point3::new(2.0, 2.0, 0.12));
        let scene = Scene::build(vec![m], None).unwrap();
        let p = Point3::new(0.0, 0.0, 0.0);
        let (t, at) = check_child(&scene, &params(), &p, &Point3::new(0.25, 0.0, 1.7)).unwrap();
        assert_eq!(t, ConnectionType::Up);
        assert!((at.z - 0.12).abs() < EPS_GEO);
        // And back down.
        let (t, _) = check_child(&scene, &params(), &at, &Point3::new(0.0, 0.0, 1.82)).unwrap();
        assert_eq!(t, ConnectionType::Down);
    }

    #[test]
    fn riser_above_limit_is_rejected() {
        let mut m = TriangleMesh::new("stairs");
        floor(&mut m, -2.0, 0.125, 0.0);
        m.push_box(Point3::new(0.125, -2.0, 0.0), Point3::new(2.0, 2.0, 0.3));
        let scene = Scene::build(vec![m], None).unwrap();
        let p = Point3::new(0.0, 0.0, 0.0);
        assert!(check_child(&scene, &params(), &p, &Point3::new(0.25, 0.0, 1.7)).is_none());
    }

    #[test]
    fn curb_between_level_nodes_is_over() {
        let mut m = TriangleMesh::new("floor");
        floor(&mut m, -2.0, 2.0, 0.0);
        m.push_box(Point3::new(0.09, -2.0, 0.0), Point3::new(0.11, 2.0, 0.1));
        let scene = Scene::build(vec![m], None).unwrap();
        let p = Point3::new(0.0, 0.0, 0.0);
        let c = Point3::new(0.25, 0.0, 0.0);
        assert_eq!(get_connection(&scene, &params(), &p, &c), ConnectionType::Over);
        // Only the parent end is raised, so a curb close to the child blocks.
        let mut far = TriangleMesh::new("floor");
        floor(&mut far, -2.0, 2.0, 0.0);
        far.push_box(Point3::new(0.18, -2.0, 0.0), Point3::new(0.2, 2.0, 0.1));
        let far = Scene::build(vec![far], None).unwrap();
        assert_eq!(get_connection(&far, &params(), &p, &c), ConnectionType::Invalid);
        assert_eq!(get_connection(&far, &params(), &c, &p), ConnectionType::Over);
        let mut wheelchair = params();
        wheelchair.step_up = 0.0;
        wheelchair.step_down = 0.0;
        assert_eq!(get_connection(&scene, &wheelchair, &p, &c), ConnectionType::Invalid);
    }

    #[test]
    fn steep_wedge_fails_slope_gate() {
        // 30 degree descent with s_d = -20: the cast lands but the slope
        // gate rejects it.
        let drop = 0.25 * 30f64.to_radians().tan();
        let mut m = TriangleMesh::new("wedge");
        m.push_polygon(&[
            Point3::new(-1.0, -1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(-1.0, 1.0, 0.0),
        ]);
        m.push_polygon(&[
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(1.0, -1.0, -4.0 * drop),
            Point3::new(1.0, 1.0, -4.0 * drop),
            Point3::new(0.0, 1.0, 0.0),
        ]);
        let scene = Scene::build(vec![m], None).unwrap();
        let p = Point3::new(0.0, 0.0, 0.0);
        let candidate = Point3::new(0.25, 0.0, 1.7);
        assert!(scene.inter(&candidate, &-Vector3::z(), 10.0).is_some());
        assert!(check_child(&scene, &params(), &p, &candidate).is_none());
        let mut lenient = params();
        lenient.slope_down = -35.0;
        let (t, at) = check_child(&scene, &lenient, &p, &candidate).unwrap();
        assert_eq!(t, ConnectionType::Direct);
        assert!((at.z + drop).abs() < 1e-9);
    }

    #[test]
    fn wall_blocks_every_connection() {
        let mut m = TriangleMesh::new("floor");
        floor(&mut m, -2.0, 2.0, 0.0);
        m.push_box(Point3::new(0.1, -2.0, 0.0), Point3::new(0.15, 2.0, 2.5));
        let scene = Scene::build(vec![m], None).unwrap();
        let p = Point3::new(0.0, 0.0, 0.0);
        let c = Point3::new(0.25, 0.0, 0.0);
        assert_eq!(get_connection(&scene, &params(), &p, &c), ConnectionType::Invalid);
        assert!(check_child(&scene, &params(), &p, &Point3::new(0.25, 0.0, 1.7)).is_none());
    }

    #[test]
    fn landing_on_obstacle_is_rejected() {
        let mut f = TriangleMesh::new("floor");
        floor(&mut f, -2.0, 0.125, 0.0);
        let mut t = TriangleMesh::new("table");
        floor(&mut t, 0.125, 2.0, 0.0);
        let labels = Labels::from([("table".to_string(), SurfaceTag::Obstacle)]);
        let scene = Scene::build(vec![f, t], Some(&labels)).unwrap();
        let p = Point3::new(0.0, 0.0, 0.0);
        assert!(check_child(&scene, &params(), &p, &Point3::new(0.25, 0.0, 1.7)).is_none());
    }

    #[test]
    fn drop_beyond_max_drop_is_rejected() {
        let mut m = TriangleMesh::new("floor");
        floor(&mut m, -2.0, 2.0, 0.0);
        let scene = Scene::build(vec![m], None).unwrap();
        let mut p = params();
        p.max_drop = Some(1.0);
        assert!(check_child(&scene, &p, &Point3::origin(), &Point3::new(0.25, 0.0, 1.7)).is_none());
    }
}

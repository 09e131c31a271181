use nalgebra::{Point3, Vector3};

/// Barycentric slack so rays through shared edges of adjacent triangles
/// always register on at least one of them.
pub(crate) const BARY_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub(crate) struct Triangle {
    pub v: [Point3<f64>; 3],
    pub object: u32,
    pub local: u32,
}

impl Triangle {
    pub fn min(&self) -> Point3<f64> {
        self.v[0].inf(&self.v[1]).inf(&self.v[2])
    }

    pub fn max(&self) -> Point3<f64> {
        self.v[0].sup(&self.v[1]).sup(&self.v[2])
    }

    pub fn centroid(&self) -> Point3<f64> {
        Point3::from((self.v[0].coords + self.v[1].coords + self.v[2].coords) / 3.0)
    }

    /// Möller–Trumbore. Both faces count; returns the ray parameter `t >= 0`.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let e1 = self.v[1] - self.v[0];
        let e2 = self.v[2] - self.v[0];
        let pvec = dir.cross(&e2);
        let det = e1.dot(&pvec);
        if det.abs() <= 1e-12 * e1.norm() * e2.norm() {
            return None;
        }
        let inv = 1.0 / det;
        let tvec = origin - self.v[0];
        let u = tvec.dot(&pvec) * inv;
        if !(-BARY_SLACK..=1.0 + BARY_SLACK).contains(&u) {
            return None;
        }
        let qvec = tvec.cross(&e1);
        let v = dir.dot(&qvec) * inv;
        if v < -BARY_SLACK || u + v > 1.0 + BARY_SLACK {
            return None;
        }
        let t = e2.dot(&qvec) * inv;
        (t >= 0.0).then_some(t)
    }
}

pub(crate) fn area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

use crate::error::{Error, Result};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

/// Creation parameters for a graph build. JSON field names follow the
/// conventional short symbols (`tau`, `h`, `a`, `b_u`, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphParams {
    /// Start point; the first node is found by casting down from here.
    #[serde(rename = "tau", with = "point_serde")]
    pub start: Point3<f64>,
    /// Height above the parent from which candidate nodes are cast down.
    #[serde(rename = "h", default = "defaults::height")]
    pub height: f64,
    /// Grid spacing in x and y.
    #[serde(rename = "a", default = "defaults::spacing")]
    pub spacing: f64,
    /// Maximum ascent step, >= 0.
    #[serde(rename = "b_u", default = "defaults::step_up")]
    pub step_up: f64,
    /// Maximum descent step, <= 0.
    #[serde(rename = "b_d", default = "defaults::step_down")]
    pub step_down: f64,
    /// Maximum up slope in degrees, >= 0.
    #[serde(rename = "s_u", default = "defaults::slope_up")]
    pub slope_up: f64,
    /// Maximum down slope in degrees, <= 0.
    #[serde(rename = "s_d", default = "defaults::slope_down")]
    pub slope_down: f64,
    /// Optional cross-slope limit in degrees. When set, DIRECT edges whose
    /// cross-slope exceeds it are removed after the build.
    #[serde(rename = "s_c", default, skip_serializing_if = "Option::is_none")]
    pub cross_slope_limit: Option<f64>,
    /// Minimum number of valid children for a parent to keep any edges.
    #[serde(rename = "gamma", default)]
    pub min_children: usize,
    /// Neighbor offsets in grid units.
    #[serde(rename = "phi", default = "defaults::directions")]
    pub directions: Vec<(i32, i32)>,
    /// Longest downward cast; defaults to `4 * h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_drop: Option<f64>,
    /// Vertical distance under which nodes in one grid column merge;
    /// defaults to `a / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_tol: Option<f64>,
    /// Height difference treated as level for step-over classification.
    #[serde(default = "defaults::eps_z")]
    pub eps_z: f64,
    /// Lift applied to both ends of connection rays.
    #[serde(default = "defaults::eps_lift")]
    pub eps_lift: f64,
}

mod defaults {
    pub fn height() -> f64 {
        1.7
    }
    pub fn spacing() -> f64 {
        0.25
    }
    pub fn step_up() -> f64 {
        0.2
    }
    pub fn step_down() -> f64 {
        -0.2
    }
    pub fn slope_up() -> f64 {
        20.0
    }
    pub fn slope_down() -> f64 {
        -20.0
    }
    pub fn eps_z() -> f64 {
        1e-3
    }
    pub fn eps_lift() -> f64 {
        0.01
    }
    pub fn directions() -> Vec<(i32, i32)> {
        super::GraphParams::eight_neighbors()
    }
}

mod point_serde {
    use nalgebra::Point3;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Point3<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq([p.x, p.y, p.z])
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point3<f64>, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Point3::new(x, y, z))
    }
}

impl GraphParams {
    pub fn new(start: Point3<f64>) -> Self {
        GraphParams {
            start,
            height: defaults::height(),
            spacing: defaults::spacing(),
            step_up: defaults::step_up(),
            step_down: defaults::step_down(),
            slope_up: defaults::slope_up(),
            slope_down: defaults::slope_down(),
            cross_slope_limit: None,
            min_children: 0,
            directions: Self::eight_neighbors(),
            max_drop: None,
            merge_tol: None,
            eps_z: defaults::eps_z(),
            eps_lift: defaults::eps_lift(),
        }
    }

    /// `{-1,0,1} x {-1,0,1}` without the origin, in row-major order.
    pub fn eight_neighbors() -> Vec<(i32, i32)> {
        let mut dirs = Vec::with_capacity(8);
        for i in -1..=1 {
            for j in -1..=1 {
                if (i, j) != (0, 0) {
                    dirs.push((i, j));
                }
            }
        }
        dirs
    }

    pub fn max_drop(&self) -> f64 {
        self.max_drop.unwrap_or(4.0 * self.height)
    }

    pub fn merge_tol(&self) -> f64 {
        self.merge_tol.unwrap_or(self.spacing / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        let finite = [
            self.start.x,
            self.start.y,
            self.start.z,
            self.height,
            self.spacing,
            self.step_up,
            self.step_down,
            self.slope_up,
            self.slope_down,
            self.eps_z,
            self.eps_lift,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.spacing <= 0.0 {
            return bad("a must be > 0");
        }
        if self.height <= 0.0 {
            return bad("h must be > 0");
        }
        if !(self.step_down <= 0.0 && self.step_up >= 0.0) {
            return bad("step limits must satisfy b_d <= 0 <= b_u");
        }
        if !(self.slope_down <= 0.0 && self.slope_up >= 0.0) {
            return bad("slope limits must satisfy s_d <= 0 <= s_u");
        }
        if self.slope_up >= 90.0 || self.slope_down <= -90.0 {
            return bad("slope limits must lie strictly within (-90, 90) degrees");
        }
        if let Some(sc) = self.cross_slope_limit {
            if !(0.0..90.0).contains(&sc) {
                return bad("s_c must lie in [0, 90) degrees");
            }
        }
        if self.eps_z < 0.0 || self.eps_lift < 0.0 {
            return bad("tolerances must be >= 0");
        }
        if self.directions.is_empty() {
            return bad("phi must not be empty");
        }
        if self.directions.contains(&(0, 0)) {
            return bad("phi must not contain (0, 0)");
        }
        let mut sorted = self.directions.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.directions.len() {
            return bad("phi contains duplicate directions");
        }
        if self.min_children > self.directions.len() {
            return bad("gamma must not exceed |phi|");
        }
        if let Some(d) = self.max_drop {
            if !(d.is_finite() && d > 0.0) {
                return bad("max_drop must be > 0");
            }
        }
        if let Some(m) = self.merge_tol {
            if !(m.is_finite() && m > 0.0) {
                return bad("merge_tol must be > 0");
            }
        }
        Ok(())
    }

    /// Directions in the fixed expansion order (row-major by `(i, j)`).
    pub fn ordered_directions(&self) -> Vec<(i32, i32)> {
        let mut dirs = self.directions.clone();
        dirs.sort_unstable();
        dirs
    }
}

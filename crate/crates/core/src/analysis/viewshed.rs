//! Per-node ray fans recording the farthest and nearest visible distance.

use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::graph::AccessGraph;
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const VIEW_MAX: &str = "view_max";
pub const VIEW_MIN: &str = "view_min";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewshedConfig {
    #[serde(default = "defaults::eye_height")]
    pub eye_height: f64,
    #[serde(default = "defaults::ray_count")]
    pub ray_count: usize,
    /// Degrees, centered on +x.
    #[serde(default = "defaults::azimuth_span")]
    pub azimuth_span: f64,
    /// Half-width of the elevation band in degrees; rays lie within
    /// `[-elevation_span, +elevation_span]`.
    #[serde(default = "defaults::elevation_span")]
    pub elevation_span: f64,
    /// Distance recorded for rays that hit nothing. Defaults to the
    /// diameter of the scene's bounding sphere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_range: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn eye_height() -> f64 {
        1.8
    }
    pub fn ray_count() -> usize {
        2000
    }
    pub fn azimuth_span() -> f64 {
        360.0
    }
    pub fn elevation_span() -> f64 {
        40.0
    }
}

impl Default for ViewshedConfig {
    fn default() -> Self {
        ViewshedConfig {
            eye_height: defaults::eye_height(),
            ray_count: defaults::ray_count(),
            azimuth_span: defaults::azimuth_span(),
            elevation_span: defaults::elevation_span(),
            max_range: None,
            seed: 0,
        }
    }
}

impl ViewshedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.ray_count == 0 {
            return bad("ray_count must be > 0");
        }
        if !(self.eye_height.is_finite() && self.eye_height >= 0.0) {
            return bad("eye_height must be >= 0");
        }
        if !(self.azimuth_span > 0.0 && self.azimuth_span <= 360.0) {
            return bad("azimuth_span must lie in (0, 360]");
        }
        if !(0.0..=90.0).contains(&self.elevation_span) {
            return bad("elevation_span must lie in [0, 90]");
        }
        if let Some(r) = self.max_range {
            if !(r.is_finite() && r > 0.0) {
                return bad("max_range must be > 0");
            }
        }
        Ok(())
    }

    pub fn max_range_for(&self, scene: &Scene) -> f64 {
        self.max_range.unwrap_or_else(|| {
            let (lo, hi) = scene.bounds();
            (hi - lo).norm()
        })
    }
}

/// Fibonacci-lattice unit directions covering the azimuth and elevation
/// band. The lattice rotation comes from `seed`.
pub fn directions(config: &ViewshedConfig) -> Vec<Vector3<f64>> {
    let n = config.ray_count;
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let offset: f64 = ChaCha8Rng::seed_from_u64(config.seed).gen();
    let band = config.elevation_span.to_radians().sin();
    let span = config.azimuth_span.to_radians();
    (0..n)
        .map(|k| {
            let z = -band + 2.0 * band * (k as f64 + 0.5) / n as f64;
            let u = (offset + k as f64 * golden).fract();
            let azimuth = if config.azimuth_span >= 360.0 {
                u * span
            } else {
                (u - 0.5) * span
            };
            let r = (1.0 - z * z).max(0.0).sqrt();
            Vector3::new(r * azimuth.cos(), r * azimuth.sin(), z)
        })
        .collect()
}

/// Largest and smallest hit distance over `dirs` from `eye`; misses count
/// as `max_range`.
pub fn view_extent(scene: &Scene, eye: &Point3<f64>, dirs: &[Vector3<f64>], max_range: f64) -> (f64, f64) {
    dirs.iter()
        .map(|d| scene.inter(eye, d, max_range).map_or(max_range, |h| h.distance))
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), t| (hi.max(t), lo.min(t)))
}

/// Sets `view_max` and `view_min` on every vertex.
pub fn viewshed(graph: &mut AccessGraph, scene: &Scene, config: &ViewshedConfig) -> Result<()> {
    config.validate()?;
    let dirs = directions(config);
    let range = config.max_range_for(scene);
    let lift = Vector3::z() * config.eye_height;
    let extents: Vec<(f64, f64)> = graph
        .vertices()
        .par_iter()
        .map(|v| view_extent(scene, &(v.point + lift), &dirs, range))
        .collect();
    let (hi, lo): (Vec<f64>, Vec<f64>) = extents.into_iter().unzip();
    graph.set_attr(VIEW_MAX, hi)?;
    graph.set_attr(VIEW_MIN, lo)?;
    Ok(())
}

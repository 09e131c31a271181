//! Per-vertex scalar fields mapped onto a blue to red ramp.

use crate::costs::{node_score, CostCoefficients};
use crate::error::{Error, Result};
use crate::geometry::{io::write_ply, TriangleMesh};
use crate::graph::AccessGraph;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

/// What to color by.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    /// A stored vertex attribute.
    Attr(String),
    /// Weighted sum over each vertex's out-edges.
    NodeScore(CostCoefficients),
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Attr(name) => f.write_str(name),
            Metric::NodeScore(c) => {
                let parts: Vec<String> = c.rho.iter().map(|(k, v)| format!("{k}={v}")).collect();
                write!(f, "node_score:{}", parts.join(","))
            }
        }
    }
}

/// Parses `attr_name`, `node_score:energy` or
/// `node_score:distance=1,energy=0.5`.
impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidCostConfig(format!("bad metric `{s}`"));
        match s.strip_prefix("node_score:") {
            None if s.is_empty() => Err(bad()),
            None => Ok(Metric::Attr(s.to_string())),
            Some(spec) => {
                let mut factors = Vec::new();
                for part in spec.split(',').filter(|p| !p.is_empty()) {
                    let (name, weight) = match part.split_once('=') {
                        None => (part, 1.0),
                        Some((n, w)) => (n, w.trim().parse::<f64>().map_err(|_| bad())?),
                    };
                    factors.push((name.trim().to_string(), weight));
                }
                if factors.is_empty() {
                    return Err(bad());
                }
                let c = CostCoefficients {
                    rho: factors.into_iter().collect(),
                    threshold_rules: Vec::new(),
                };
                c.validate()?;
                Ok(Metric::NodeScore(c))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub metric: String,
    pub values: Vec<f64>,
    /// Values rescaled to `[0, 1]`; all 0.5 for a constant field.
    pub normalized: Vec<f64>,
    pub colors: Vec<[u8; 3]>,
    pub min: f64,
    pub max: f64,
}

/// Blue (0) through cyan, green and yellow to red (1).
pub fn ramp(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let stops = [
        [0.0, 0.0, 255.0],
        [0.0, 255.0, 255.0],
        [0.0, 255.0, 0.0],
        [255.0, 255.0, 0.0],
        [255.0, 0.0, 0.0],
    ];
    let x = t * 4.0;
    let k = (x.floor() as usize).min(3);
    let f = x - k as f64;
    let mix = |c: usize| (stops[k][c] + (stops[k + 1][c] - stops[k][c]) * f).round() as u8;
    [mix(0), mix(1), mix(2)]
}

pub fn metric_values(graph: &AccessGraph, metric: &Metric) -> Result<Vec<f64>> {
    match metric {
        Metric::Attr(name) => Ok(graph.attr(name)?.to_vec()),
        Metric::NodeScore(c) => (0..graph.vertex_count()).map(|v| node_score(graph, v, c)).collect(),
    }
}

pub fn heatmap(graph: &AccessGraph, metric: &Metric) -> Result<Heatmap> {
    let values = metric_values(graph, metric)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (min, max) = if values.is_empty() { (0.0, 0.0) } else { (min, max) };
    let normalized: Vec<f64> = values
        .iter()
        .map(|&v| if max > min { (v - min) / (max - min) } else { 0.5 })
        .collect();
    let colors = normalized.iter().map(|&t| ramp(t)).collect();
    Ok(Heatmap {
        metric: metric.to_string(),
        values,
        normalized,
        colors,
        min,
        max,
    })
}

impl Heatmap {
    /// Point-cloud PLY of the graph's nodes with per-vertex color.
    pub fn write_ply<W: Write>(&self, graph: &AccessGraph, w: &mut W) -> Result<()> {
        let mut mesh = TriangleMesh::new("heatmap");
        for v in graph.vertices() {
            mesh.push_vertex(v.point);
        }
        write_ply(w, &mesh, Some(&self.colors))
    }
}

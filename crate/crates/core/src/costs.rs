//! Edge cost factors: distance, gradient, cross-slope and walking energy,
//! plus node-attribute promotion and per-node aggregate scores.

use crate::error::{Error, Result};
use crate::graph::{AccessGraph, ConnectionType, Edge, Vertex, WeightVector};
use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Gradient range over which the energy polynomial is used.
pub const ENERGY_CLAMP: f64 = 0.5;

/// Floor applied before taking reciprocals of attributes.
pub const EPS_ATTR: f64 = 1e-6;

/// Walking cost in J/(kg m) at gradient `s`, from the quintic fit
/// `280.5 s^5 - 58.7 s^4 - 76.8 s^3 + 51.9 s^2 + 19.6 s + 2.5`.
/// The gradient is clamped to `[-clamp, clamp]` first.
pub fn energy_rate_clamped(gradient: f64, clamp: f64) -> (f64, bool) {
    let s = gradient.clamp(-clamp, clamp);
    let rate = ((((280.5 * s - 58.7) * s - 76.8) * s + 51.9) * s + 19.6) * s + 2.5;
    (rate, s != gradient)
}

pub fn energy_rate(gradient: f64) -> f64 {
    energy_rate_clamped(gradient, ENERGY_CLAMP).0
}

/// Distance, gradient and energy for an edge from `from` to `to`. The flag
/// reports whether the gradient was clamped.
pub fn edge_weights(from: &Point3<f64>, to: &Point3<f64>, step: ConnectionType, clamp: f64) -> (WeightVector, bool) {
    let mut w = WeightVector::with_step(step);
    let clamped = fill_base(&mut w, from, to, clamp);
    (w, clamped)
}

fn fill_base(w: &mut WeightVector, from: &Point3<f64>, to: &Point3<f64>, clamp: f64) -> bool {
    let run = (to.xy() - from.xy()).norm();
    w.distance = (to - from).norm();
    w.slope = if run > 0.0 { (to.z - from.z) / run } else { 0.0 };
    let (rate, clamped) = energy_rate_clamped(w.slope, clamp);
    w.energy = rate.max(0.0) * w.distance;
    clamped
}

/// Recomputes distance, gradient and energy on every edge. Returns the
/// number of clamped gradients, which is also stored on the graph.
pub fn set_base_costs(graph: &mut AccessGraph, clamp: f64) -> usize {
    let (vertices, rows) = graph.split_mut();
    let clamped: usize = rows
        .par_iter_mut()
        .enumerate()
        .map(|(v, row)| {
            row.iter_mut()
                .map(|e| usize::from(fill_base(&mut e.weights, &vertices[v].point, &vertices[e.to].point, clamp)))
                .sum::<usize>()
        })
        .sum();
    graph.clamped_gradients = clamped;
    clamped
}

fn offset(vertices: &[Vertex], from: usize, to: usize) -> (i64, i64) {
    let (a, b) = (vertices[from].key, vertices[to].key);
    (i64::from(b.i) - i64::from(a.i), i64::from(b.j) - i64::from(a.j))
}

fn row_cross_slopes(vertices: &[Vertex], from: usize, row: &[Edge]) -> Vec<f64> {
    row.iter()
        .map(|e| {
            let d = offset(vertices, from, e.to);
            let zj = vertices[e.to].point.z;
            row.iter()
                .filter(|o| o.to != e.to && o.weights.step == ConnectionType::Direct)
                .filter(|o| {
                    let k = offset(vertices, from, o.to);
                    d.0 * k.0 + d.1 * k.1 == 0
                })
                .map(|o| (zj - vertices[o.to].point.z).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Cross-slope of the edge `from -> to`: the largest height difference
/// between `to` and the heads of DIRECT sibling edges perpendicular to it
/// in the grid plane, or 0 when there are none.
pub fn cross_slope(graph: &AccessGraph, from: usize, to: usize) -> Result<f64> {
    let row = graph.out_subgraph(from)?.edges;
    let idx = row
        .iter()
        .position(|e| e.to == to)
        .ok_or(Error::UnknownVertex(to))?;
    Ok(row_cross_slopes(graph.vertices(), from, row)[idx])
}

/// Fills the cross-slope factor on every edge.
pub fn apply_cross_slope(graph: &mut AccessGraph) {
    let (vertices, rows) = graph.split_mut();
    rows.par_iter_mut().enumerate().for_each(|(v, row)| {
        let values = row_cross_slopes(vertices, v, row);
        for (e, c) in row.iter_mut().zip(values) {
            e.weights.cross_slope = c;
        }
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromoteMode {
    /// Head vertex value.
    ToNode,
    /// Tail vertex value.
    FromNode,
    /// `1 / max(head value, EPS_ATTR)`.
    Reciprocal,
}

/// Copies a vertex attribute onto every edge as `extras[attr]`.
pub fn promote_attr_to_edges(graph: &mut AccessGraph, attr: &str, mode: PromoteMode) -> Result<()> {
    let values = graph.attr(attr)?.to_vec();
    let (_, rows) = graph.split_mut();
    rows.par_iter_mut().enumerate().for_each(|(v, row)| {
        for e in row.iter_mut() {
            let x = match mode {
                PromoteMode::ToNode => values[e.to],
                PromoteMode::FromNode => values[v],
                PromoteMode::Reciprocal => 1.0 / values[e.to].max(EPS_ATTR),
            };
            e.weights.extras.insert(attr.to_string(), x);
        }
    });
    Ok(())
}

/// Multiplies the composed cost of every out-edge of a vertex whose
/// attribute lies below `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRule {
    pub attr: String,
    pub threshold: f64,
    pub multiplier: f64,
}

/// Factor importance weights and threshold transforms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCoefficients {
    #[serde(default)]
    pub rho: BTreeMap<String, f64>,
    #[serde(default)]
    pub threshold_rules: Vec<ThresholdRule>,
}

impl CostCoefficients {
    pub fn single(factor: &str) -> Self {
        Self::weighted(&[(factor, 1.0)])
    }

    pub fn weighted(factors: &[(&str, f64)]) -> Self {
        CostCoefficients {
            rho: factors.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            threshold_rules: Vec::new(),
        }
    }

    pub fn with_rule(mut self, attr: &str, threshold: f64, multiplier: f64) -> Self {
        self.threshold_rules.push(ThresholdRule {
            attr: attr.to_string(),
            threshold,
            multiplier,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.rho {
            if !v.is_finite() {
                return Err(Error::InvalidCostConfig(format!("coefficient `{k}` is not finite")));
            }
        }
        for r in &self.threshold_rules {
            if !r.threshold.is_finite() {
                return Err(Error::InvalidCostConfig(format!("threshold for `{}` is not finite", r.attr)));
            }
            if !(r.multiplier.is_finite() && r.multiplier > 0.0) {
                return Err(Error::InvalidCostConfig(format!("multiplier for `{}` must be > 0", r.attr)));
            }
        }
        Ok(())
    }

    /// `sum_k rho_k * w_k`. Zero coefficients are skipped, so a factor
    /// absent from an edge only matters when it is actually weighted.
    pub fn dot(&self, w: &WeightVector) -> Result<f64> {
        let mut total = 0.0;
        for (name, &coef) in &self.rho {
            if coef == 0.0 {
                continue;
            }
            let value = w.factor(name).ok_or_else(|| Error::MissingAttribute(name.clone()))?;
            total += coef * value;
        }
        Ok(total)
    }

    /// Composed cost of `edge` leaving `from`: the weighted sum, scaled by
    /// every threshold rule the tail vertex violates.
    pub fn edge_cost(&self, graph: &AccessGraph, from: usize, edge: &Edge) -> Result<f64> {
        let mut cost = self.dot(&edge.weights)?;
        for rule in &self.threshold_rules {
            if graph.attr(&rule.attr)?[from] < rule.threshold {
                cost *= rule.multiplier;
            }
        }
        Ok(cost)
    }
}

/// Cost configuration file: coefficients plus the energy clamp.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default)]
    pub rho: BTreeMap<String, f64>,
    #[serde(default)]
    pub threshold_rules: Vec<ThresholdRule>,
    #[serde(default)]
    pub energy: EnergyConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default = "default_clamp")]
    pub clamp: f64,
}

fn default_clamp() -> f64 {
    ENERGY_CLAMP
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig { clamp: ENERGY_CLAMP }
    }
}

impl CostConfig {
    pub fn coefficients(&self) -> CostCoefficients {
        CostCoefficients {
            rho: self.rho.clone(),
            threshold_rules: self.threshold_rules.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy.clamp.is_finite() && self.energy.clamp > 0.0) {
            return Err(Error::InvalidCostConfig("energy clamp must be > 0".into()));
        }
        self.coefficients().validate()
    }
}

/// Aggregate of `rho`-weighted costs over the outgoing edges of `v`.
pub fn node_score(graph: &AccessGraph, v: usize, rho: &CostCoefficients) -> Result<f64> {
    let sub = graph.out_subgraph(v)?;
    if sub.is_empty() {
        return Err(Error::ChildlessVertex(v));
    }
    sub.edges.iter().map(|e| rho.dot(&e.weights)).sum()
}

//! The weighted digraph of accessible locations.
//!
//! During a build the graph is an adjacency list indexed by vertex id, with
//! a `NodeKey -> id` map for identity. [`AccessGraph::finalize_csr`] packs
//! it into compressed sparse row arrays once the topology is complete.

mod csr;
pub mod export;

pub use csr::Csr;

use crate::error::{Error, Result};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// Grid identity of a vertex: column `i`, row `j` (offsets from the start
/// point in multiples of the grid spacing) and the z-cluster index at that
/// column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey {
    pub i: i32,
    pub j: i32,
    pub level: u32,
}

impl NodeKey {
    pub const fn new(i: i32, j: i32, level: u32) -> Self {
        NodeKey { i, j, level }
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.i, self.j, self.level)
    }
}

impl std::str::FromStr for NodeKey {
    type Err = Error;

    /// Parses `i,j,level`; the level may be omitted and defaults to 0.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("node key `{s}` is not `i,j[,level]`"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let (i, j, level) = match parts.as_slice() {
            [i, j] => (i, j, &"0"),
            [i, j, l] => (i, j, l),
            _ => return Err(bad()),
        };
        Ok(NodeKey {
            i: i.parse().map_err(|_| bad())?,
            j: j.parse().map_err(|_| bad())?,
            level: level.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConnectionType {
    Direct,
    Over,
    Up,
    Down,
    Invalid,
}

impl ConnectionType {
    pub fn is_step(self) -> bool {
        matches!(self, ConnectionType::Over | ConnectionType::Up | ConnectionType::Down)
    }

    /// Numeric code used in the CSR weight arrays.
    pub fn code(self) -> u8 {
        match self {
            ConnectionType::Direct => 0,
            ConnectionType::Over => 1,
            ConnectionType::Up => 2,
            ConnectionType::Down => 3,
            ConnectionType::Invalid => 255,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => ConnectionType::Direct,
            1 => ConnectionType::Over,
            2 => ConnectionType::Up,
            3 => ConnectionType::Down,
            _ => return None,
        })
    }
}

/// Per-edge costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    /// Metric length, meters.
    pub distance: f64,
    /// Signed rise over horizontal run.
    pub slope: f64,
    /// Cross-slope height difference, meters.
    pub cross_slope: f64,
    /// Walking energy over the whole edge, J/kg.
    pub energy: f64,
    pub step: ConnectionType,
    /// Attribute-derived and user costs, keyed by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

impl WeightVector {
    pub fn with_step(step: ConnectionType) -> Self {
        WeightVector {
            distance: 0.0,
            slope: 0.0,
            cross_slope: 0.0,
            energy: 0.0,
            step,
            extras: BTreeMap::new(),
        }
    }

    /// Value of a named factor. `step` (or `steps`) is the 0/1 step
    /// indicator.
    pub fn factor(&self, name: &str) -> Option<f64> {
        Some(match name {
            "distance" => self.distance,
            "slope" => self.slope,
            "cross_slope" => self.cross_slope,
            "energy" => self.energy,
            "step" | "steps" => f64::from(u8::from(self.step.is_step())),
            other => return self.extras.get(other).copied(),
        })
    }
}

/// Built-in factor names, in CSR array order.
pub const BASE_FACTORS: [&str; 5] = ["distance", "slope", "cross_slope", "energy", "step"];

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub key: NodeKey,
    pub point: Point3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub to: usize,
    pub weights: WeightVector,
}

/// Edge-induced subgraph on the outgoing edges of one vertex.
#[derive(Clone, Debug)]
pub struct Subgraph<'a> {
    pub parent: usize,
    pub edges: &'a [Edge],
}

impl Subgraph<'_> {
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Clone, Debug, Default)]
pub struct AccessGraph {
    vertices: Vec<Vertex>,
    index: HashMap<NodeKey, usize>,
    columns: HashMap<(i32, i32), Vec<usize>>,
    adj: Vec<Vec<Edge>>,
    attrs: BTreeMap<String, Vec<f64>>,
    csr: Option<Csr>,
    /// Gradients clamped while evaluating the energy polynomial.
    pub clamped_gradients: usize,
}

impl AccessGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Result<&Vertex> {
        self.vertices.get(v).ok_or(Error::UnknownVertex(v))
    }

    pub fn find(&self, key: &NodeKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn require(&self, key: &NodeKey) -> Result<usize> {
        self.find(key).ok_or(Error::UnknownKey(*key))
    }

    /// Adds a vertex with an explicit key. Re-adding a key returns the
    /// existing id.
    pub fn add_vertex(&mut self, key: NodeKey, point: Point3<f64>) -> usize {
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.vertices.len();
        self.vertices.push(Vertex { key, point });
        self.index.insert(key, id);
        self.columns.entry((key.i, key.j)).or_default().push(id);
        self.adj.push(Vec::new());
        for values in self.attrs.values_mut() {
            values.push(0.0);
        }
        self.csr = None;
        id
    }

    /// Returns the vertex at grid column `(i, j)` within `merge_tol`
    /// vertically of `point`, creating a new level if none is close enough.
    /// The flag is true when the vertex was created.
    pub fn resolve_node(&mut self, i: i32, j: i32, point: Point3<f64>, merge_tol: f64) -> (usize, bool) {
        let existing = self.columns.get(&(i, j)).and_then(|ids| {
            ids.iter()
                .copied()
                .filter(|&id| (self.vertices[id].point.z - point.z).abs() < merge_tol)
                .min_by(|&a, &b| {
                    let da = (self.vertices[a].point.z - point.z).abs();
                    let db = (self.vertices[b].point.z - point.z).abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
        });
        if let Some(id) = existing {
            return (id, false);
        }
        let level = self.columns.get(&(i, j)).map_or(0, Vec::len) as u32;
        (self.add_vertex(NodeKey::new(i, j, level), point), true)
    }

    pub fn add_edge(&mut self, parent: usize, child: usize, weights: WeightVector) -> Result<()> {
        if parent >= self.vertices.len() {
            return Err(Error::UnknownVertex(parent));
        }
        if child >= self.vertices.len() {
            return Err(Error::UnknownVertex(child));
        }
        if weights.step == ConnectionType::Invalid {
            return Err(Error::InvalidParams("INVALID connection cannot be stored".into()));
        }
        if self.adj[parent].iter().any(|e| e.to == child) {
            return Err(Error::DuplicateEdge { parent, child });
        }
        self.adj[parent].push(Edge { to: child, weights });
        self.csr = None;
        Ok(())
    }

    pub fn out_edges(&self, v: usize) -> &[Edge] {
        &self.adj[v]
    }

    pub fn out_subgraph(&self, v: usize) -> Result<Subgraph<'_>> {
        let edges = self.adj.get(v).ok_or(Error::UnknownVertex(v))?;
        Ok(Subgraph { parent: v, edges })
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        self.adj.get(from)?.iter().find(|e| e.to == to)
    }

    /// Vertices with at least one outgoing edge, in id order.
    pub fn parents(&self) -> Vec<usize> {
        (0..self.adj.len()).filter(|&v| !self.adj[v].is_empty()).collect()
    }

    pub fn is_parent(&self, v: usize) -> bool {
        self.adj.get(v).is_some_and(|row| !row.is_empty())
    }

    /// All edges as `(from, edge)` in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(v, row)| row.iter().map(move |e| (v, e)))
    }

    /// Mutable rows for cost passes. Invalidates the CSR.
    pub fn rows_mut(&mut self) -> &mut [Vec<Edge>] {
        self.csr = None;
        &mut self.adj
    }

    /// Vertices alongside mutable rows, for per-row cost passes.
    /// Invalidates the CSR.
    pub fn split_mut(&mut self) -> (&[Vertex], &mut [Vec<Edge>]) {
        self.csr = None;
        (&self.vertices, &mut self.adj)
    }

    /// Removes edges rejected by `keep`. Returns how many were removed.
    pub fn retain_edges(&mut self, mut keep: impl FnMut(usize, &Edge) -> bool) -> usize {
        let before = self.edge_count();
        for (v, row) in self.adj.iter_mut().enumerate() {
            row.retain(|e| keep(v, e));
        }
        self.csr = None;
        before - self.edge_count()
    }

    pub fn attrs(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.attrs
    }

    pub fn attr(&self, name: &str) -> Result<&[f64]> {
        self.attrs
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingAttribute(name.to_string()))
    }

    pub fn set_attr(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.vertices.len() {
            return Err(Error::InvalidParams(format!(
                "attribute `{name}` has {} values for {} vertices",
                values.len(),
                self.vertices.len()
            )));
        }
        self.attrs.insert(name, values);
        Ok(())
    }

    pub fn finalize_csr(&mut self) -> &Csr {
        if self.csr.is_none() {
            self.csr = Some(Csr::from_rows(&self.adj));
        }
        self.csr.as_ref().expect("just built")
    }

    pub fn csr(&self) -> Option<&Csr> {
        self.csr.as_ref()
    }

    /// Rebuilds a graph from finalized arrays.
    pub(crate) fn from_parts(
        vertices: Vec<Vertex>,
        csr: Csr,
        attrs: BTreeMap<String, Vec<f64>>,
        clamped_gradients: usize,
    ) -> Result<Self> {
        let mut graph = AccessGraph::new();
        for v in vertices {
            let key = v.key;
            if graph.find(&key).is_some() {
                return Err(Error::MalformedGraph(format!("duplicate node key {key}")));
            }
            graph.add_vertex(key, v.point);
        }
        let rows = csr.to_rows(graph.vertex_count())?;
        for (v, row) in rows.into_iter().enumerate() {
            for e in row {
                graph.add_edge(v, e.to, e.weights).map_err(|e| Error::MalformedGraph(e.to_string()))?;
            }
        }
        for (name, values) in attrs {
            graph.set_attr(name, values).map_err(|e| Error::MalformedGraph(e.to_string()))?;
        }
        graph.clamped_gradients = clamped_gradients;
        graph.csr = Some(csr);
        Ok(graph)
    }
}

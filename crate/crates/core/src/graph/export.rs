//! Graph persistence.
//!
//! # Binary CSR layout
//!
//! All integers and floats are little-endian.
//!
//! | field            | type                 | notes                              |
//! |------------------|----------------------|------------------------------------|
//! | magic            | `[u8; 8]`            | `b"AGRAPHCS"`                      |
//! | version          | `u32`                | currently 1                        |
//! | vertex_count `V` | `u64`                |                                    |
//! | edge_count `E`   | `u64`                |                                    |
//! | factor_count `F` | `u32`                | five base factors plus extras      |
//! | attr_count `A`   | `u32`                | per-vertex attributes              |
//! | clamped          | `u64`                | energy gradient clamp counter      |
//! | vertices         | `V x (i32,i32,u32,f64,f64,f64)` | key then point          |
//! | offsets          | `(V+1) x u64`        |                                    |
//! | columns          | `E x u32`            |                                    |
//! | factors          | `F x (u32 len, name, E x f64)` | base order then sorted extras |
//! | attrs            | `A x (u32 len, name, V x f64)` | sorted by name            |
//!
//! Writing the same graph twice yields identical bytes.

use super::{AccessGraph, ConnectionType, Csr, NodeKey, Vertex, WeightVector, BASE_FACTORS};
use crate::error::{Error, Result};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const MAGIC: &[u8; 8] = b"AGRAPHCS";
pub const VERSION: u32 = 1;

pub fn write_binary(graph: &mut AccessGraph) -> Vec<u8> {
    let clamped = graph.clamped_gradients as u64;
    let vertices = graph.vertices().to_vec();
    let attrs = graph.attrs().clone();
    let csr = graph.finalize_csr();
    let factors = csr.factor_arrays();

    let mut out = Vec::with_capacity(
        64 + vertices.len() * 44 + csr.edge_count() * (4 + 8 * factors.len()),
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(vertices.len() as u64).to_le_bytes());
    out.extend_from_slice(&(csr.edge_count() as u64).to_le_bytes());
    out.extend_from_slice(&(factors.len() as u32).to_le_bytes());
    out.extend_from_slice(&(attrs.len() as u32).to_le_bytes());
    out.extend_from_slice(&clamped.to_le_bytes());
    for v in &vertices {
        out.extend_from_slice(&v.key.i.to_le_bytes());
        out.extend_from_slice(&v.key.j.to_le_bytes());
        out.extend_from_slice(&v.key.level.to_le_bytes());
        for c in [v.point.x, v.point.y, v.point.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for o in &csr.offsets {
        out.extend_from_slice(&o.to_le_bytes());
    }
    for c in &csr.columns {
        out.extend_from_slice(&c.to_le_bytes());
    }
    let mut named = |name: &str, values: &[f64]| {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        for x in values {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    for (name, values) in factors {
        named(name, values);
    }
    for (name, values) in &attrs {
        named(name, values);
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::MalformedGraph(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // Every counted item takes at least four bytes.
        if n > (self.data.len() / 4) as u64 {
            return Err(Error::MalformedGraph(format!("implausible count {n}")));
        }
        Ok(n as usize)
    }

    fn name(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::MalformedGraph("factor name is not utf-8".into()))
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn read_binary(data: &[u8]) -> Result<AccessGraph> {
    let mut r = Reader { data, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::MalformedGraph("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::MalformedGraph(format!("unsupported version {version}")));
    }
    let v_count = r.count()?;
    let e_count = r.count()?;
    let f_count = r.u32()? as usize;
    let a_count = r.u32()? as usize;
    let clamped = r.u64()? as usize;
    if f_count < BASE_FACTORS.len() {
        return Err(Error::MalformedGraph("missing base factors".into()));
    }
    let mut vertices = Vec::with_capacity(v_count);
    for _ in 0..v_count {
        let key = NodeKey::new(r.i32()?, r.i32()?, r.u32()?);
        let point = Point3::new(r.f64()?, r.f64()?, r.f64()?);
        vertices.push(Vertex { key, point });
    }
    let offsets = (0..=v_count).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let columns = (0..e_count).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let mut base = Vec::with_capacity(BASE_FACTORS.len());
    for expected in BASE_FACTORS {
        let name = r.name()?;
        if name != expected {
            return Err(Error::MalformedGraph(format!("expected factor `{expected}`, found `{name}`")));
        }
        base.push(r.floats(e_count)?);
    }
    let mut extras = BTreeMap::new();
    for _ in BASE_FACTORS.len()..f_count {
        let name = r.name()?;
        extras.insert(name, r.floats(e_count)?);
    }
    let mut attrs = BTreeMap::new();
    for _ in 0..a_count {
        let name = r.name()?;
        attrs.insert(name, r.floats(v_count)?);
    }
    if r.pos != data.len() {
        return Err(Error::MalformedGraph("trailing bytes".into()));
    }
    let mut base = base.into_iter();
    let mut next = || base.next().expect("five base factors");
    let csr = Csr {
        offsets,
        columns,
        distance: next(),
        slope: next(),
        cross_slope: next(),
        energy: next(),
        step: next(),
        extras,
    };
    AccessGraph::from_parts(vertices, csr, attrs, clamped)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexJson {
    pub id: usize,
    pub key: [i64; 3],
    pub point: [f64; 3],
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub from: usize,
    pub to: usize,
    #[serde(flatten)]
    pub weights: WeightVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub format: String,
    pub version: u32,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub clamped_gradients: usize,
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<EdgeJson>,
}

pub fn vertex_json(graph: &AccessGraph, id: usize) -> VertexJson {
    let v = &graph.vertices()[id];
    VertexJson {
        id,
        key: [v.key.i.into(), v.key.j.into(), v.key.level.into()],
        point: [v.point.x, v.point.y, v.point.z],
        attrs: graph
            .attrs()
            .iter()
            .map(|(n, vals)| (n.clone(), vals[id]))
            .collect(),
    }
}

pub fn to_json(graph: &AccessGraph) -> GraphJson {
    GraphJson {
        format: "accessgraph".into(),
        version: VERSION,
        vertex_count: graph.vertex_count(),
        edge_count: graph.edge_count(),
        clamped_gradients: graph.clamped_gradients,
        vertices: (0..graph.vertex_count()).map(|id| vertex_json(graph, id)).collect(),
        edges: graph
            .edges()
            .map(|(from, e)| EdgeJson {
                from,
                to: e.to,
                weights: e.weights.clone(),
            })
            .collect(),
    }
}

pub fn from_json(doc: &GraphJson) -> Result<AccessGraph> {
    let mut g = AccessGraph::new();
    for (expected, v) in doc.vertices.iter().enumerate() {
        if v.id != expected {
            return Err(Error::MalformedGraph(format!("vertex ids must be dense, found {}", v.id)));
        }
        let key = NodeKey::new(
            i32::try_from(v.key[0]).map_err(|_| Error::MalformedGraph("key out of range".into()))?,
            i32::try_from(v.key[1]).map_err(|_| Error::MalformedGraph("key out of range".into()))?,
            u32::try_from(v.key[2]).map_err(|_| Error::MalformedGraph("key out of range".into()))?,
        );
        if g.find(&key).is_some() {
            return Err(Error::MalformedGraph(format!("duplicate node key {key}")));
        }
        g.add_vertex(key, Point3::from(v.point));
    }
    for e in &doc.edges {
        if e.weights.step == ConnectionType::Invalid {
            return Err(Error::MalformedGraph("INVALID edge in document".into()));
        }
        g.add_edge(e.from, e.to, e.weights.clone())
            .map_err(|err| Error::MalformedGraph(err.to_string()))?;
    }
    let names: std::collections::BTreeSet<&String> =
        doc.vertices.iter().flat_map(|v| v.attrs.keys()).collect();
    for name in names {
        let values = doc
            .vertices
            .iter()
            .map(|v| v.attrs.get(name).copied().ok_or_else(|| Error::MissingAttribute(name.clone())))
            .collect::<Result<Vec<_>>>()?;
        g.set_attr(name.clone(), values)?;
    }
    g.clamped_gradients = doc.clamped_gradients;
    Ok(g)
}

/// JSON Schema for [`GraphJson`].
pub const GRAPH_SCHEMA: &str = include_str!("../../schema/graph.schema.json");

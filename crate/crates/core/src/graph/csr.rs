use super::{ConnectionType, Edge, WeightVector};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};

/// Compressed sparse row adjacency with one weight array per factor,
/// parallel to `columns`. Row order is insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub offsets: Vec<u64>,
    pub columns: Vec<u32>,
    pub distance: Vec<f64>,
    pub slope: Vec<f64>,
    pub cross_slope: Vec<f64>,
    pub energy: Vec<f64>,
    /// `ConnectionType::code` as a float.
    pub step: Vec<f64>,
    /// Named extra costs; `NaN` marks an edge without that entry.
    pub extras: BTreeMap<String, Vec<f64>>,
}

impl Csr {
    pub(crate) fn from_rows(rows: &[Vec<Edge>]) -> Csr {
        let edge_count: usize = rows.iter().map(Vec::len).sum();
        let names: BTreeSet<&String> = rows
            .iter()
            .flatten()
            .flat_map(|e| e.weights.extras.keys())
            .collect();
        let mut csr = Csr {
            offsets: Vec::with_capacity(rows.len() + 1),
            columns: Vec::with_capacity(edge_count),
            distance: Vec::with_capacity(edge_count),
            slope: Vec::with_capacity(edge_count),
            cross_slope: Vec::with_capacity(edge_count),
            energy: Vec::with_capacity(edge_count),
            step: Vec::with_capacity(edge_count),
            extras: names
                .into_iter()
                .map(|n| (n.clone(), Vec::with_capacity(edge_count)))
                .collect(),
        };
        csr.offsets.push(0);
        for row in rows {
            for e in row {
                let w = &e.weights;
                csr.columns.push(e.to as u32);
                csr.distance.push(w.distance);
                csr.slope.push(w.slope);
                csr.cross_slope.push(w.cross_slope);
                csr.energy.push(w.energy);
                csr.step.push(f64::from(w.step.code()));
                for (name, values) in csr.extras.iter_mut() {
                    values.push(w.extras.get(name).copied().unwrap_or(f64::NAN));
                }
            }
            csr.offsets.push(csr.columns.len() as u64);
        }
        csr
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v] as usize..self.offsets[v + 1] as usize
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.columns[self.row(v)]
    }

    /// Factor arrays in file order: the five base factors then extras.
    pub fn factor_arrays(&self) -> Vec<(&str, &[f64])> {
        let mut out: Vec<(&str, &[f64])> = vec![
            ("distance", &self.distance),
            ("slope", &self.slope),
            ("cross_slope", &self.cross_slope),
            ("energy", &self.energy),
            ("step", &self.step),
        ];
        out.extend(self.extras.iter().map(|(n, v)| (n.as_str(), v.as_slice())));
        out
    }

    pub(crate) fn to_rows(&self, vertex_count: usize) -> Result<Vec<Vec<Edge>>> {
        let bad = |m: String| Error::MalformedGraph(m);
        if self.offsets.len() != vertex_count + 1 || self.offsets.first() != Some(&0) {
            return Err(bad("offset array does not match vertex count".into()));
        }
        let e = self.columns.len();
        if *self.offsets.last().unwrap() as usize != e {
            return Err(bad("last offset does not match edge count".into()));
        }
        for (name, arr) in self.factor_arrays() {
            if arr.len() != e {
                return Err(bad(format!("factor `{name}` has {} entries for {e} edges", arr.len())));
            }
        }
        let mut rows = Vec::with_capacity(vertex_count);
        for v in 0..vertex_count {
            let (lo, hi) = (self.offsets[v] as usize, self.offsets[v + 1] as usize);
            if lo > hi || hi > e {
                return Err(bad(format!("offsets of row {v} are not monotone")));
            }
            let mut row = Vec::with_capacity(hi - lo);
            for k in lo..hi {
                let to = self.columns[k] as usize;
                if to >= vertex_count {
                    return Err(bad(format!("column {to} out of range")));
                }
                let code = self.step[k];
                let step = ConnectionType::from_code(code as u8)
                    .filter(|_| code.fract() == 0.0 && (0.0..=3.0).contains(&code))
                    .ok_or_else(|| bad(format!("invalid step code {code}")))?;
                let extras = self
                    .extras
                    .iter()
                    .filter(|(_, vals)| !vals[k].is_nan())
                    .map(|(n, vals)| (n.clone(), vals[k]))
                    .collect();
                row.push(Edge {
                    to,
                    weights: WeightVector {
                        distance: self.distance[k],
                        slope: self.slope[k],
                        cross_slope: self.cross_slope[k],
                        energy: self.energy[k],
                        step,
                        extras,
                    },
                });
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

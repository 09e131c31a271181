//! Least-cost paths over composed edge costs.

use crate::costs::CostCoefficients;
use crate::error::{Error, Result};
use crate::graph::{AccessGraph, NodeKey, WeightVector, BASE_FACTORS};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathVertex {
    pub id: usize,
    pub key: NodeKey,
    pub point: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathEdge {
    pub from: NodeKey,
    pub to: NodeKey,
    /// Composed cost used by the search.
    pub cost: f64,
    #[serde(flatten)]
    pub weights: WeightVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub vertices: Vec<PathVertex>,
    pub edges: Vec<PathEdge>,
    /// Per-factor sums over the path.
    pub totals: BTreeMap<String, f64>,
    /// `rho`-weighted sum of the path's weight vectors.
    pub score: f64,
    /// Search objective including threshold multipliers.
    pub cost: f64,
    /// Meters.
    pub length: f64,
    pub steps: usize,
}

impl PathResult {
    pub fn vertex_ids(&self) -> Vec<usize> {
        self.vertices.iter().map(|v| v.id).collect()
    }

    /// Polyline OBJ: one `v` line per vertex and a single `l` element.
    pub fn write_obj<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "o path")?;
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.point[0], v.point[1], v.point[2])?;
        }
        if self.vertices.len() > 1 {
            write!(w, "l")?;
            for k in 1..=self.vertices.len() {
                write!(w, " {k}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn edge_weights<'a>(graph: &'a AccessGraph, from: usize, to: usize) -> Result<&'a WeightVector> {
    graph
        .edge(from, to)
        .map(|e| &e.weights)
        .ok_or_else(|| Error::MalformedGraph(format!("no edge {from} -> {to}")))
}

/// `sum over the path of rho . w`.
pub fn path_score(graph: &AccessGraph, path: &[usize], rho: &CostCoefficients) -> Result<f64> {
    let mut total = 0.0;
    for pair in path.windows(2) {
        total += rho.dot(edge_weights(graph, pair[0], pair[1])?)?;
    }
    Ok(total)
}

/// Number of stepped (non-DIRECT) edges along the path.
pub fn count_steps(graph: &AccessGraph, path: &[usize]) -> Result<usize> {
    let mut n = 0;
    for pair in path.windows(2) {
        n += usize::from(edge_weights(graph, pair[0], pair[1])?.step.is_step());
    }
    Ok(n)
}

/// Composed cost of every edge, row by row. Fails if any cost is not a
/// finite positive number.
pub fn edge_costs(graph: &AccessGraph, cost: &CostCoefficients) -> Result<Vec<Vec<f64>>> {
    cost.validate()?;
    (0..graph.vertex_count())
        .map(|v| {
            graph
                .out_edges(v)
                .iter()
                .map(|e| {
                    let c = cost.edge_cost(graph, v, e)?;
                    if c.is_finite() && c > 0.0 {
                        Ok(c)
                    } else {
                        Err(Error::NonPositiveEdgeCost {
                            from: graph.vertices()[v].key,
                            to: graph.vertices()[e.to].key,
                            cost: c,
                        })
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Label {
    cost: f64,
    hops: usize,
    pred: usize,
}

const NONE: usize = usize::MAX;

/// Compares the key sequences of the tree paths ending at `a` and `b`,
/// which have equal hop counts.
fn compare_chains(graph: &AccessGraph, labels: &[Option<Label>], a: usize, b: usize) -> Ordering {
    let chain = |mut v: usize| {
        let mut out = Vec::new();
        while v != NONE {
            out.push(graph.vertices()[v].key);
            v = labels[v].map_or(NONE, |l| l.pred);
        }
        out.reverse();
        out
    };
    chain(a).cmp(&chain(b))
}

/// Dijkstra with a total order on paths: cost, then edge count, then the
/// lexicographic sequence of node keys.
fn dijkstra(graph: &AccessGraph, costs: &[Vec<f64>], start: usize, goal: usize) -> Option<Vec<usize>> {
    let n = graph.vertex_count();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    labels[start] = Some(Label {
        cost: 0.0,
        hops: 0,
        pred: NONE,
    });
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Total(0.0), 0usize, start)));
    while let Some(Reverse((Total(c), hops, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        let lu = labels[u].expect("queued vertices are labeled");
        if lu.cost != c || lu.hops != hops {
            continue;
        }
        done[u] = true;
        if u == goal {
            break;
        }
        for (e, &w) in graph.out_edges(u).iter().zip(&costs[u]) {
            let v = e.to;
            if done[v] {
                continue;
            }
            let cand = Label {
                cost: lu.cost + w,
                hops: lu.hops + 1,
                pred: u,
            };
            let better = match labels[v] {
                None => true,
                Some(old) => match cand.cost.total_cmp(&old.cost).then(cand.hops.cmp(&old.hops)) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => compare_chains(graph, &labels, u, old.pred) == Ordering::Less,
                },
            };
            if better {
                labels[v] = Some(cand);
                heap.push(Reverse((Total(cand.cost), cand.hops, v)));
            }
        }
    }
    labels[goal]?;
    let mut path = vec![goal];
    let mut v = goal;
    while let Some(Label { pred, .. }) = labels[v] {
        if pred == NONE {
            break;
        }
        path.push(pred);
        v = pred;
    }
    path.reverse();
    Some(path)
}

#[derive(Clone, Copy, PartialEq)]
struct Total(f64);

impl Eq for Total {}

impl PartialOrd for Total {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Total {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Least-cost path from `start` to `goal`, or `None` when the goal is
/// unreachable.
pub fn shortest_path(graph: &AccessGraph, start: usize, goal: usize, cost: &CostCoefficients) -> Result<Option<PathResult>> {
    graph.vertex(start)?;
    graph.vertex(goal)?;
    let costs = edge_costs(graph, cost)?;
    match dijkstra(graph, &costs, start, goal) {
        None => Ok(None),
        Some(path) => describe(graph, &path, cost).map(Some),
    }
}

/// Same as [`shortest_path`], addressing vertices by key.
pub fn shortest_path_by_key(
    graph: &AccessGraph,
    start: &NodeKey,
    goal: &NodeKey,
    cost: &CostCoefficients,
) -> Result<Option<PathResult>> {
    shortest_path(graph, graph.require(start)?, graph.require(goal)?, cost)
}

/// Full description of a vertex path under `cost`.
pub fn describe(graph: &AccessGraph, path: &[usize], cost: &CostCoefficients) -> Result<PathResult> {
    let mut edges = Vec::with_capacity(path.len().saturating_sub(1));
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    let mut total_cost = 0.0;
    let mut steps = 0;
    let mut extras: Option<Vec<String>> = None;
    for pair in path.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let edge = graph
            .edge(a, b)
            .ok_or_else(|| Error::MalformedGraph(format!("no edge {a} -> {b}")))?;
        let c = cost.edge_cost(graph, a, edge)?;
        total_cost += c;
        steps += usize::from(edge.weights.step.is_step());
        let names: Vec<String> = edge.weights.extras.keys().cloned().collect();
        extras = Some(match extras {
            None => names,
            Some(prev) => prev.into_iter().filter(|n| names.contains(n)).collect(),
        });
        edges.push(PathEdge {
            from: graph.vertices()[a].key,
            to: graph.vertices()[b].key,
            cost: c,
            weights: edge.weights.clone(),
        });
    }
    let mut names: Vec<String> = BASE_FACTORS.iter().map(|s| s.to_string()).collect();
    names.extend(extras.unwrap_or_default());
    for name in names {
        let sum = edges.iter().map(|e| e.weights.factor(&name).unwrap_or(0.0)).sum();
        totals.insert(name, sum);
    }
    let vertices = path
        .iter()
        .map(|&id| {
            let v = &graph.vertices()[id];
            PathVertex {
                id,
                key: v.key,
                point: [v.point.x, v.point.y, v.point.z],
            }
        })
        .collect();
    Ok(PathResult {
        vertices,
        score: path_score(graph, path, cost)?,
        cost: total_cost,
        length: totals["distance"],
        steps,
        totals,
        edges,
    })
}

/// Vertex nearest to `p`, ties resolved to the smaller key.
pub fn nearest_vertex(graph: &AccessGraph, p: &Point3<f64>) -> Option<usize> {
    graph
        .vertices()
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (a.point - p)
                .norm_squared()
                .total_cmp(&(b.point - p).norm_squared())
                .then(a.key.cmp(&b.key))
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::edge_weights;
    use crate::graph::ConnectionType;

    fn line(n: i32) -> AccessGraph {
        let mut g = AccessGraph::new();
        for i in 0..n {
            g.add_vertex(NodeKey::new(i, 0, 0), Point3::new(f64::from(i), 0.0, 0.0));
        }
        for i in 0..n as usize - 1 {
            for (a, b) in [(i, i + 1), (i + 1, i)] {
                let step = if i == 1 { ConnectionType::Over } else { ConnectionType::Direct };
                let (w, _) = edge_weights(&g.vertices()[a].point, &g.vertices()[b].point, step, 0.5);
                g.add_edge(a, b, w).unwrap();
            }
        }
        g
    }

    #[test]
    fn start_equals_goal() {
        let g = line(3);
        let p = shortest_path(&g, 1, 1, &CostCoefficients::single("distance")).unwrap().unwrap();
        assert!(p.edges.is_empty());
        assert_eq!(p.score, 0.0);
        assert_eq!(p.length, 0.0);
        assert_eq!(p.vertex_ids(), vec![1]);
    }

    #[test]
    fn line_path_totals() {
        let g = line(4);
        let p = shortest_path(&g, 0, 3, &CostCoefficients::single("distance")).unwrap().unwrap();
        assert_eq!(p.vertex_ids(), vec![0, 1, 2, 3]);
        assert_eq!(p.length, 3.0);
        assert_eq!(p.totals["distance"], p.length);
        assert_eq!(p.steps, 1);
        assert_eq!(count_steps(&g, &p.vertex_ids()).unwrap(), 1);
        assert_eq!(path_score(&g, &p.vertex_ids(), &CostCoefficients::default()).unwrap(), 0.0);
    }

    #[test]
    fn zero_cost_edges_are_rejected() {
        let g = line(3);
        let err = shortest_path(&g, 0, 2, &CostCoefficients::single("slope")).unwrap_err();
        assert!(matches!(err, Error::NonPositiveEdgeCost { .. }));
        let err = shortest_path(&g, 0, 0, &CostCoefficients::single("slope")).unwrap_err();
        assert!(matches!(err, Error::NonPositiveEdgeCost { .. }));
    }

    #[test]
    fn unreachable_goal_is_none() {
        let mut g = line(3);
        g.add_vertex(NodeKey::new(10, 0, 0), Point3::new(10.0, 0.0, 0.0));
        assert!(shortest_path(&g, 0, 3, &CostCoefficients::single("distance")).unwrap().is_none());
    }

    #[test]
    fn equal_cost_ties_prefer_smaller_keys() {
        // Diamond: 0 -> {1, 2} -> 3 with equal costs; key (1,-1) < (1,1).
        let mut g = AccessGraph::new();
        let pts = [(0, 0), (1, 1), (1, -1), (2, 0)];
        for (i, j) in pts {
            g.add_vertex(NodeKey::new(i, j, 0), Point3::new(f64::from(i), f64::from(j), 0.0));
        }
        for (a, b) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            let (w, _) = edge_weights(&g.vertices()[a].point, &g.vertices()[b].point, ConnectionType::Direct, 0.5);
            g.add_edge(a, b, w).unwrap();
        }
        let p = shortest_path(&g, 0, 3, &CostCoefficients::single("distance")).unwrap().unwrap();
        assert_eq!(p.vertex_ids(), vec![0, 2, 3]);
    }

    #[test]
    fn obj_export_is_a_polyline() {
        let g = line(3);
        let p = shortest_path(&g, 0, 2, &CostCoefficients::single("distance")).unwrap().unwrap();
        let mut buf = Vec::new();
        p.write_obj(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert!(text.contains("l 1 2 3"));
    }

    #[test]
    fn nearest_vertex_tie_prefers_smaller_key() {
        let g = line(3);
        assert_eq!(nearest_vertex(&g, &Point3::new(0.5, 0.0, 0.0)), Some(0));
        assert_eq!(nearest_vertex(&g, &Point3::new(1.9, 0.3, 0.0)), Some(2));
    }
}

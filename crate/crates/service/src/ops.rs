//! Operations shared by the CLI and the HTTP API.

use crate::error::{Result, ServiceError};
use crate::store::{graph_id, params_hash, GraphRecord, ProjectStore, SceneRecord, ViewshedLayer};
use accessgraph::analysis::viewshed::{VIEW_MAX, VIEW_MIN};
use accessgraph::analysis::{heatmap, nearest_vertex, shortest_path, viewshed, Heatmap, Metric, PathResult, ViewshedConfig};
use accessgraph::builder::{build_graph_with, start_node, BuildOptions};
use accessgraph::costs::{apply_cross_slope, node_score, promote_attr_to_edges, set_base_costs, PromoteMode, ThresholdRule};
use accessgraph::costs::{EnergyConfig, ENERGY_CLAMP};
use accessgraph::graph::export::{to_json, vertex_json, EdgeJson, VertexJson};
use accessgraph::graph::BASE_FACTORS;
use accessgraph::{AccessGraph, BuildReport, CostCoefficients, GraphParams, NodeKey, Scene};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

pub const DEFAULT_PAGE: usize = 50_000;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BuildRequest {
    /// Scene id or name.
    pub scene: String,
    pub params: GraphParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// A validated build, ready to run.
pub struct PreparedBuild {
    pub scene_record: SceneRecord,
    pub scene: Scene,
    pub params: GraphParams,
    pub graph_id: String,
    pub name: Option<String>,
}

/// Validates parameters and the start point. Returns the stored graph
/// when the same scene and parameters were built before.
pub fn prepare_build(store: &ProjectStore, req: &BuildRequest) -> Result<Result<GraphRecord, PreparedBuild>> {
    req.params.validate()?;
    let scene_record = store.scene(&req.scene)?;
    let id = graph_id(&scene_record.id, &req.params);
    if let Some(name) = &req.name {
        store.check_graph_name(name, &id)?;
    }
    if store.graph_exists(&id) {
        return Ok(Ok(store.graph(&id)?));
    }
    let scene = store.load_scene(&scene_record)?;
    start_node(&scene, &req.params)?;
    Ok(Err(PreparedBuild {
        scene_record,
        scene,
        params: req.params.clone(),
        graph_id: id,
        name: req.name.clone(),
    }))
}

pub fn run_build(store: &ProjectStore, build: PreparedBuild, threads: Option<usize>) -> Result<GraphRecord> {
    let opts = BuildOptions {
        threads,
        record_frontier: false,
    };
    let (mut graph, report) = build_graph_with(&build.scene, &build.params, &opts)?;
    let record = GraphRecord {
        id: build.graph_id,
        name: build.name,
        scene: build.scene_record.id,
        params_hash: params_hash(&build.params),
        report,
        imported: false,
    };
    store.put_graph(record, &mut graph, Some(&build.params))
}

/// Builds synchronously, or returns the cached graph. The flag is true
/// for a cache hit.
pub fn build(store: &ProjectStore, req: &BuildRequest, threads: Option<usize>) -> Result<(GraphRecord, bool)> {
    match prepare_build(store, req)? {
        Ok(record) => Ok((record, true)),
        Err(prepared) => Ok((run_build(store, prepared, threads)?, false)),
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Promotion {
    pub attr: String,
    #[serde(default = "default_mode")]
    pub mode: PromoteMode,
}

fn default_mode() -> PromoteMode {
    PromoteMode::ToNode
}

/// Cost composition shared by path, costs and heatmap requests.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    #[serde(default)]
    pub rho: BTreeMap<String, f64>,
    #[serde(default)]
    pub threshold_rules: Vec<ThresholdRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyConfig>,
    /// Vertex attributes copied onto edges before costing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub promote: Vec<Promotion>,
}

impl CostSpec {
    pub fn coefficients(&self) -> CostCoefficients {
        CostCoefficients {
            rho: self.rho.clone(),
            threshold_rules: self.threshold_rules.clone(),
        }
    }

    /// The graph with energy clamp and promotions applied. Borrowed as-is
    /// when neither changes anything.
    pub fn apply(&self, graph: &Arc<AccessGraph>) -> Result<Arc<AccessGraph>> {
        let clamp = self.energy.as_ref().map_or(ENERGY_CLAMP, |e| e.clamp);
        if !(clamp.is_finite() && clamp > 0.0) {
            return Err(ServiceError::BadRequest("energy.clamp must be > 0".into()));
        }
        if clamp == ENERGY_CLAMP && self.promote.is_empty() {
            return Ok(graph.clone());
        }
        let mut g = (**graph).clone();
        if clamp != ENERGY_CLAMP {
            set_base_costs(&mut g, clamp);
            apply_cross_slope(&mut g);
        }
        for p in &self.promote {
            promote_attr_to_edges(&mut g, &p.attr, p.mode)?;
        }
        Ok(Arc::new(g))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PathRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_key: Option<NodeKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_key: Option<NodeKey>,
    /// Alternative to `start_key`: snapped to the nearest vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_point: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_point: Option<[f64; 3]>,
    #[serde(flatten)]
    pub cost: CostSpec,
}

fn endpoint(graph: &AccessGraph, key: Option<NodeKey>, point: Option<[f64; 3]>, which: &str) -> Result<usize> {
    match (key, point) {
        (Some(k), None) => Ok(graph.require(&k)?),
        (None, Some(p)) => nearest_vertex(graph, &Point3::from(p))
            .ok_or_else(|| ServiceError::BadRequest("graph has no vertices".into())),
        (Some(_), Some(_)) => Err(ServiceError::BadRequest(format!("give either {which}_key or {which}_point"))),
        (None, None) => Err(ServiceError::BadRequest(format!("{which}_key is required"))),
    }
}

/// Least-cost path. `Ok(None)` when the goal is unreachable.
pub fn path(store: &ProjectStore, graph_ref: &str, req: &PathRequest) -> Result<Option<PathResult>> {
    let record = store.graph(graph_ref)?;
    let graph = req.cost.apply(&store.load_graph(&record)?)?;
    let cost = req.cost.coefficients();
    if cost.rho.is_empty() {
        return Err(ServiceError::BadRequest("rho must select at least one factor".into()));
    }
    let start = endpoint(&graph, req.start_key, req.start_point, "start")?;
    let goal = endpoint(&graph, req.goal_key, req.goal_point, "goal")?;
    Ok(shortest_path(&graph, start, goal, &cost)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sum: f64,
}

impl Stats {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Stats> {
        let mut n = 0usize;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for v in values {
            n += 1;
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        (n > 0).then(|| Stats {
            min,
            max,
            mean: sum / n as f64,
            sum,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostSummary {
    pub graph: String,
    pub edge_count: usize,
    pub clamped_gradients: usize,
    pub factors: BTreeMap<String, Stats>,
    /// Per-vertex score statistics when `rho` is non-empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_score: Option<Stats>,
}

/// Per-factor statistics over all edges after applying the cost spec.
pub fn costs(store: &ProjectStore, graph_ref: &str, spec: &CostSpec) -> Result<CostSummary> {
    let record = store.graph(graph_ref)?;
    let graph = spec.apply(&store.load_graph(&record)?)?;
    let mut names: Vec<String> = BASE_FACTORS.iter().map(|s| s.to_string()).collect();
    names.extend(spec.promote.iter().map(|p| p.attr.clone()));
    let mut factors = BTreeMap::new();
    for name in names {
        let values = graph.edges().filter_map(|(_, e)| e.weights.factor(&name));
        if let Some(s) = Stats::of(values) {
            factors.insert(name, s);
        }
    }
    let coeffs = spec.coefficients();
    let node_score = if coeffs.rho.is_empty() {
        None
    } else {
        coeffs.validate()?;
        let scores = graph
            .parents()
            .into_iter()
            .map(|v| node_score(&graph, v, &coeffs))
            .collect::<accessgraph::Result<Vec<f64>>>()?;
        Stats::of(scores)
    };
    Ok(CostSummary {
        graph: record.id,
        edge_count: graph.edge_count(),
        clamped_gradients: graph.clamped_gradients,
        factors,
        node_score,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ViewshedSummary {
    pub graph: String,
    pub config: ViewshedConfig,
    pub view_max: Option<Stats>,
    pub view_min: Option<Stats>,
}

/// Computes and stores the viewshed layer for a graph.
pub fn run_viewshed(store: &ProjectStore, graph_ref: &str, config: &ViewshedConfig, threads: Option<usize>) -> Result<ViewshedSummary> {
    config.validate()?;
    let record = store.graph(graph_ref)?;
    let scene = store.load_scene(&store.scene(&record.scene)?)?;
    let mut graph = (*store.load_graph(&record)?).clone();
    accessgraph::with_threads(threads, || viewshed(&mut graph, &scene, config))?;
    let layer = ViewshedLayer {
        config: config.clone(),
        view_max: graph.attr(VIEW_MAX)?.to_vec(),
        view_min: graph.attr(VIEW_MIN)?.to_vec(),
    };
    store.put_viewshed(&record, &layer)?;
    Ok(ViewshedSummary {
        graph: record.id,
        config: config.clone(),
        view_max: Stats::of(layer.view_max.iter().copied()),
        view_min: Stats::of(layer.view_min.iter().copied()),
    })
}

pub fn parse_metric(metric: &str) -> Result<Metric> {
    metric.parse().map_err(|e: accessgraph::Error| ServiceError::BadRequest(e.to_string()))
}

pub fn run_heatmap(store: &ProjectStore, graph_ref: &str, metric: &Metric) -> Result<(Arc<AccessGraph>, Heatmap)> {
    let record = store.graph(graph_ref)?;
    let graph = store.load_graph(&record)?;
    let h = heatmap(&graph, metric)?;
    Ok((graph, h))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphReport {
    #[serde(flatten)]
    pub record: GraphRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<GraphParams>,
    pub attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewshed: Option<ViewshedConfig>,
}

pub fn report(store: &ProjectStore, graph_ref: &str) -> Result<GraphReport> {
    let record = store.graph(graph_ref)?;
    let graph = store.load_graph(&record)?;
    Ok(GraphReport {
        params: store.params(&record)?,
        attributes: graph.attrs().keys().cloned().collect(),
        viewshed: store.viewshed(&record)?.map(|l| l.config),
        record,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphPage {
    pub id: String,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub offset: usize,
    pub limit: usize,
    /// Offset of the following page, absent on the last one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<usize>,
    pub vertices: Vec<VertexJson>,
    /// Out-edges of the vertices on this page.
    pub edges: Vec<EdgeJson>,
}

pub fn graph_page(store: &ProjectStore, graph_ref: &str, offset: usize, limit: Option<usize>) -> Result<GraphPage> {
    let limit = limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 {
        return Err(ServiceError::BadRequest("limit must be > 0".into()));
    }
    let record = store.graph(graph_ref)?;
    let graph = store.load_graph(&record)?;
    let n = graph.vertex_count();
    let end = offset.saturating_add(limit).min(n);
    let ids = offset.min(n)..end;
    let edges = ids
        .clone()
        .flat_map(|v| {
            graph.out_edges(v).iter().map(move |e| EdgeJson {
                from: v,
                to: e.to,
                weights: e.weights.clone(),
            })
        })
        .collect();
    Ok(GraphPage {
        id: record.id,
        vertex_count: n,
        edge_count: graph.edge_count(),
        offset,
        limit,
        next: (end < n).then_some(end),
        vertices: ids.map(|v| vertex_json(&graph, v)).collect(),
        edges,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Bin,
}

impl std::str::FromStr for ExportFormat {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "bin" | "csr" => Ok(ExportFormat::Bin),
            _ => Err(ServiceError::BadRequest(format!("unknown export format `{s}`"))),
        }
    }
}

/// Graph file contents. Binary exports are the stored CSR bytes.
pub fn export(store: &ProjectStore, graph_ref: &str, format: ExportFormat) -> Result<Vec<u8>> {
    let record = store.graph(graph_ref)?;
    match format {
        ExportFormat::Bin => store.graph_bytes(&record),
        ExportFormat::Json => {
            let graph = store.load_graph(&record)?;
            Ok(serde_json::to_vec(&to_json(&graph)).map_err(|e| ServiceError::Internal(e.to_string()))?)
        }
    }
}

/// Registers an exported graph file under an existing scene. The id
/// hashes the scene id and the graph contents.
pub fn import_graph(
    store: &ProjectStore,
    scene_ref: &str,
    data: &[u8],
    params: Option<&GraphParams>,
    name: Option<String>,
) -> Result<GraphRecord> {
    use accessgraph::graph::export::{from_json, read_binary, write_binary};
    let scene = store.scene(scene_ref)?;
    let mut graph = if data.starts_with(b"{") {
        from_json(&serde_json::from_slice(data)?)?
    } else {
        read_binary(data)?
    };
    let bytes = write_binary(&mut graph);
    let params_hash = match params {
        Some(p) => {
            p.validate()?;
            params_hash(p)
        }
        None => crate::store::sha256_hex(&[b"imported", &bytes]),
    };
    let id = crate::store::sha256_hex(&[b"graph", scene.id.as_bytes(), params_hash.as_bytes(), &bytes]);
    let report = BuildReport {
        vertex_count: graph.vertex_count(),
        edge_count: graph.edge_count(),
        terminated_early: graph.vertex_count() == 1,
        clamped_gradients: graph.clamped_gradients,
        ..BuildReport::default()
    };
    let record = GraphRecord {
        id,
        name,
        scene: scene.id,
        params_hash,
        report,
        imported: true,
    };
    store.put_graph(record, &mut graph, params)
}

//! Command-line front end.

use crate::api::{router, AppState};
use crate::error::{Result, ServiceError};
use crate::ops::{self, BuildRequest, CostSpec, ExportFormat, PathRequest, Promotion};
use crate::store::{MeshFormat, ProjectStore, STORE_ENV};
use accessgraph::analysis::ViewshedConfig;
use accessgraph::costs::{PromoteMode, ThresholdRule};
use accessgraph::fixtures;
use accessgraph::geometry::io::{read_labels, UpAxis};
use accessgraph::{GraphParams, NodeKey};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Parser)]
#[command(name = "accessgraph", version, about = "Build and analyze accessibility graphs over 3D scenes")]
pub struct Cli {
    /// Project store directory.
    #[arg(long, env = STORE_ENV, default_value = "shape-store", global = true)]
    pub store: PathBuf,
    /// Worker threads per computation; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Store a scene mesh, a built-in fixture, or an exported graph.
    Import(ImportArgs),
    /// Build an accessibility graph over a stored scene.
    Build(BuildArgs),
    /// Summarize edge cost factors, optionally with a custom energy clamp,
    /// attribute promotion and node scores.
    Costs(CostsArgs),
    /// Compute view_max / view_min for every vertex of a graph.
    Viewshed(ViewshedArgs),
    /// Least-cost path between two vertices.
    Path(PathArgs),
    /// Per-vertex heatmap of an attribute or node score.
    Heatmap(HeatmapArgs),
    /// Write a stored graph as JSON or binary CSR.
    Export(ExportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Mesh file (.obj or .ply), or graph file with --graph.
    pub file: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    /// JSON map of object name to surface tag.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = "z")]
    pub up: UpAxis,
    /// Import a built-in fixture scene instead of a file.
    #[arg(long, conflicts_with_all = ["file", "graph"])]
    pub fixture: Option<String>,
    /// Treat FILE as an exported graph (binary CSR or JSON).
    #[arg(long, requires = "scene")]
    pub graph: bool,
    /// Scene the imported graph belongs to.
    #[arg(long)]
    pub scene: Option<String>,
    /// Parameters the imported graph was built with.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Scene id or name.
    #[arg(long)]
    pub scene: String,
    /// GraphParams JSON file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Start point `x,y,z`; overrides `tau` from --params.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct CostArgs {
    /// Factor weights, `name=weight[,name=weight...]`.
    #[arg(long)]
    pub rho: Option<String>,
    /// Threshold rule `attr<threshold*multiplier`; repeatable.
    #[arg(long = "rule")]
    pub rules: Vec<String>,
    /// Promote a vertex attribute onto edges, `attr[:to_node|from_node|reciprocal]`; repeatable.
    #[arg(long = "promote")]
    pub promote: Vec<String>,
    /// Gradient clamp for the energy polynomial.
    #[arg(long)]
    pub energy_clamp: Option<f64>,
    /// JSON file with `rho`, `threshold_rules`, `energy` and `promote`;
    /// flags add to it.
    #[arg(long)]
    pub cost: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostsArgs {
    #[arg(long)]
    pub graph: String,
    #[command(flatten)]
    pub cost: CostArgs,
}

#[derive(Debug, Args)]
pub struct ViewshedArgs {
    #[arg(long)]
    pub graph: String,
    /// ViewshedConfig JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rays: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub graph: String,
    /// Start node key `i,j[,level]`.
    #[arg(long)]
    pub start_key: Option<NodeKey>,
    #[arg(long)]
    pub goal_key: Option<NodeKey>,
    /// Start point `x,y,z`, snapped to the nearest vertex.
    #[arg(long)]
    pub start_point: Option<String>,
    #[arg(long)]
    pub goal_point: Option<String>,
    /// Full PathRequest JSON file; other path flags are ignored.
    #[arg(long)]
    pub request: Option<PathBuf>,
    #[command(flatten)]
    pub cost: CostArgs,
    /// Also write the path as a polyline OBJ.
    #[arg(long)]
    pub obj: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub graph: String,
    /// `attr`, `node_score:factor` or `node_score:f1=w1,f2=w2`.
    #[arg(long)]
    pub metric: String,
    /// Also write a colored point-cloud PLY.
    #[arg(long)]
    pub ply: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub graph: String,
    /// `json` or `bin`.
    #[arg(long, default_value = "bin")]
    pub format: ExportFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port; the bound port is printed.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Concurrent builds; defaults to the core count.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| ServiceError::BadRequest(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_file(path)?)
        .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, data: &[u8]) -> Result<()> {
    std::fs::write(path, data).map_err(|e| ServiceError::BadRequest(format!("cannot write {}: {e}", path.display())))
}

pub fn parse_point(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| ServiceError::BadRequest(format!("point `{s}` is not `x,y,z`")))?;
    match parts.as_slice() {
        [x, y, z] => Ok([*x, *y, *z]),
        _ => Err(ServiceError::BadRequest(format!("point `{s}` is not `x,y,z`"))),
    }
}

pub fn parse_rho(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (name, w) = p.split_once('=').unwrap_or((p, "1"));
            let w = w
                .trim()
                .parse()
                .map_err(|_| ServiceError::BadRequest(format!("weight in `{p}` is not a number")))?;
            Ok((name.trim().to_string(), w))
        })
        .collect()
}

/// `attr<threshold*multiplier`.
pub fn parse_rule(s: &str) -> Result<ThresholdRule> {
    let bad = || ServiceError::BadRequest(format!("rule `{s}` is not `attr<threshold*multiplier`"));
    let (attr, rest) = s.split_once('<').ok_or_else(bad)?;
    let (threshold, multiplier) = rest.split_once('*').ok_or_else(bad)?;
    Ok(ThresholdRule {
        attr: attr.trim().to_string(),
        threshold: threshold.trim().parse().map_err(|_| bad())?,
        multiplier: multiplier.trim().parse().map_err(|_| bad())?,
    })
}

pub fn parse_promotion(s: &str) -> Result<Promotion> {
    let (attr, mode) = s.split_once(':').unwrap_or((s, "to_node"));
    let mode = match mode {
        "to_node" => PromoteMode::ToNode,
        "from_node" => PromoteMode::FromNode,
        "reciprocal" => PromoteMode::Reciprocal,
        other => return Err(ServiceError::BadRequest(format!("unknown promotion mode `{other}`"))),
    };
    Ok(Promotion {
        attr: attr.to_string(),
        mode,
    })
}

impl CostArgs {
    pub fn spec(&self) -> Result<CostSpec> {
        let mut spec: CostSpec = match &self.cost {
            Some(path) => read_json(path)?,
            None => CostSpec::default(),
        };
        if let Some(rho) = &self.rho {
            spec.rho.extend(parse_rho(rho)?);
        }
        for r in &self.rules {
            spec.threshold_rules.push(parse_rule(r)?);
        }
        for p in &self.promote {
            spec.promote.push(parse_promotion(p)?);
        }
        if let Some(clamp) = self.energy_clamp {
            spec.energy = Some(accessgraph::costs::EnergyConfig { clamp });
        }
        Ok(spec)
    }
}

/// Compact JSON text, as printed on stdout and returned by the API.
pub fn to_json_text<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| ServiceError::Internal(e.to_string()))
}

/// Runs a parsed command. Returns the JSON document to print; `serve`
/// returns once the server shuts down.
pub fn run(cli: Cli) -> Result<String> {
    let store = Arc::new(ProjectStore::open(&cli.store)?);
    let threads = cli.threads;
    let to_value = |v: Value| to_json_text(&v);
    match cli.command {
        Command::Import(args) => to_value(import(&store, args)?),
        Command::Build(args) => {
            let mut params: GraphParams = match &args.params {
                Some(p) => read_json(p)?,
                None => {
                    let start = args
                        .start
                        .as_deref()
                        .ok_or_else(|| ServiceError::BadRequest("give --params or --start".into()))?;
                    GraphParams::new(parse_point(start)?.into())
                }
            };
            if let (Some(start), Some(_)) = (&args.start, &args.params) {
                params.start = parse_point(start)?.into();
            }
            let req = BuildRequest {
                scene: args.scene,
                params,
                name: args.name,
            };
            let (record, cached) = ops::build(&store, &req, threads)?;
            to_value(json!({ "graph": record, "cached": cached }))
        }
        Command::Costs(args) => to_json_text(&ops::costs(&store, &args.graph, &args.cost.spec()?)?),
        Command::Viewshed(args) => {
            let mut config: ViewshedConfig = match &args.config {
                Some(p) => read_json(p)?,
                None => ViewshedConfig::default(),
            };
            if let Some(r) = args.rays {
                config.ray_count = r;
            }
            if let Some(s) = args.seed {
                config.seed = s;
            }
            to_json_text(&ops::run_viewshed(&store, &args.graph, &config, threads)?)
        }
        Command::Path(args) => {
            let req = match &args.request {
                Some(p) => read_json(p)?,
                None => PathRequest {
                    start_key: args.start_key,
                    goal_key: args.goal_key,
                    start_point: args.start_point.as_deref().map(parse_point).transpose()?,
                    goal_point: args.goal_point.as_deref().map(parse_point).transpose()?,
                    cost: args.cost.spec()?,
                },
            };
            let result = accessgraph::with_threads(threads, || ops::path(&store, &args.graph, &req))?;
            if let (Some(out), Some(p)) = (&args.obj, &result) {
                let mut buf = Vec::new();
                p.write_obj(&mut buf)?;
                write_file(out, &buf)?;
            }
            to_json_text(&result)
        }
        Command::Heatmap(args) => {
            let metric = ops::parse_metric(&args.metric)?;
            let (graph, h) = ops::run_heatmap(&store, &args.graph, &metric)?;
            if let Some(out) = &args.ply {
                let mut buf = Vec::new();
                h.write_ply(&graph, &mut buf)?;
                write_file(out, &buf)?;
            }
            to_json_text(&h)
        }
        Command::Export(args) => {
            let data = ops::export(&store, &args.graph, args.format)?;
            write_file(&args.out, &data)?;
            to_value(json!({ "graph": store.graph(&args.graph)?.id, "format": args.format, "bytes": data.len(), "out": args.out }))
        }
        Command::Serve(args) => to_value(serve(store, args, threads)?),
    }
}

fn import(store: &ProjectStore, args: ImportArgs) -> Result<Value> {
    if let Some(name) = &args.fixture {
        let f = fixtures::by_name(name).ok_or_else(|| {
            ServiceError::BadRequest(format!("unknown fixture `{name}`; one of {}", fixtures::NAMES.join(", ")))
        })?;
        let mut obj = Vec::new();
        f.write_obj(&mut obj)?;
        let scene_name = args.name.as_deref().unwrap_or(name);
        let (record, created) = store.add_scene(scene_name, MeshFormat::Obj, &obj, Some(&f.labels), UpAxis::Z)?;
        let landmarks: serde_json::Map<String, Value> =
            f.landmarks.iter().map(|(k, p)| (k.clone(), json!([p.x, p.y, p.z]))).collect();
        return Ok(json!({ "scene": record, "created": created, "params": f.params, "landmarks": landmarks }));
    }
    let file = args.file.ok_or_else(|| ServiceError::BadRequest("give a FILE or --fixture".into()))?;
    let data = read_file(&file)?;
    if args.graph {
        let scene = args.scene.as_deref().expect("clap requires --scene");
        let params: Option<GraphParams> = args.params.as_deref().map(read_json).transpose()?;
        let record = ops::import_graph(store, scene, &data, params.as_ref(), args.name)?;
        return Ok(json!({ "graph": record }));
    }
    let labels = match &args.labels {
        Some(p) => {
            let text = String::from_utf8(read_file(p)?).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            Some(read_labels(&text)?)
        }
        None => None,
    };
    let name = match args.name {
        Some(n) => n,
        None => file
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_string)
            .ok_or_else(|| ServiceError::BadRequest("give --name".into()))?,
    };
    let format = MeshFormat::from_path(&file)?;
    let (record, created) = store.add_scene(&name, format, &data, labels.as_ref(), args.up)?;
    Ok(json!({ "scene": record, "created": created }))
}

fn serve(store: Arc<ProjectStore>, args: ServeArgs, threads: Option<usize>) -> Result<Value> {
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| ServiceError::BadRequest(format!("cannot bind {}:{}: {e}", args.host, args.port)))?;
        let addr = listener.local_addr()?;
        let line = json!({ "listening": addr.to_string(), "port": addr.port() });
        {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{line}")?;
            out.flush()?;
        }
        let app = router(AppState::new(store, workers, threads));
        axum::serve(listener, app)
            .with_graceful_shutdown(shutdown_signal())
            .await?;
        Ok(json!({ "stopped": addr.to_string() }))
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

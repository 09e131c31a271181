//! On-disk project store.
//!
//! Layout under the root:
//!
//! ```text
//! registry.json
//! scenes/<scene id>/mesh.obj | mesh.ply
//! scenes/<scene id>/labels.json
//! graphs/<graph id>/graph.bin
//! graphs/<graph id>/params.json
//! graphs/<graph id>/viewshed.json
//! ```
//!
//! Scene ids are SHA-256 hashes of the mesh bytes, labels and up axis.
//! Graph ids hash the scene id together with the build parameters, so a
//! repeated build request resolves to the stored graph.

use crate::error::{Result, ServiceError};
use accessgraph::analysis::viewshed::{VIEW_MAX, VIEW_MIN};
use accessgraph::analysis::ViewshedConfig;
use accessgraph::geometry::io::{read_obj, read_ply, UpAxis};
use accessgraph::geometry::Labels;
use accessgraph::graph::export::{read_binary, write_binary};
use accessgraph::{AccessGraph, BuildReport, GraphParams, Scene};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

pub const STORE_ENV: &str = "SHAPE_STORE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    fn file_name(self) -> &'static str {
        match self {
            MeshFormat::Obj => "mesh.obj",
            MeshFormat::Ply => "mesh.ply",
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(ServiceError::BadRequest(format!("{} is not an .obj or .ply file", path.display()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: String,
    pub name: String,
    pub format: MeshFormat,
    pub up: UpAxis,
    pub triangle_count: usize,
    pub objects: Vec<String>,
    pub walkable: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Id (content hash) of the source scene.
    pub scene: String,
    pub params_hash: String,
    pub report: BuildReport,
    /// True when the graph came from an exported file rather than a build.
    #[serde(default)]
    pub imported: bool,
}

/// Viewshed attributes, stored apart from the immutable graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewshedLayer {
    pub config: ViewshedConfig,
    pub view_max: Vec<f64>,
    pub view_min: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct Registry {
    scenes: BTreeMap<String, SceneRecord>,
    graphs: BTreeMap<String, GraphRecord>,
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    format!("{:x}", h.finalize())
}

pub fn params_hash(params: &GraphParams) -> String {
    let json = serde_json::to_vec(params).expect("params serialize");
    sha256_hex(&[b"params", &json])
}

pub fn graph_id(scene_id: &str, params: &GraphParams) -> String {
    sha256_hex(&[b"graph", scene_id.as_bytes(), params_hash(params).as_bytes()])
}

pub fn parse_meshes(format: MeshFormat, data: &[u8], up: UpAxis) -> Result<Vec<accessgraph::TriangleMesh>> {
    Ok(match format {
        MeshFormat::Obj => read_obj(&mut &data[..], up)?,
        MeshFormat::Ply => vec![read_ply(data, "mesh", up)?],
    })
}

pub struct ProjectStore {
    root: PathBuf,
    registry: RwLock<Registry>,
    graphs: Mutex<HashMap<String, Arc<AccessGraph>>>,
}

impl ProjectStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("scenes"))?;
        fs::create_dir_all(root.join("graphs"))?;
        let path = root.join("registry.json");
        let registry = if path.exists() {
            serde_json::from_slice(&fs::read(&path)?)
                .map_err(|e| ServiceError::Internal(format!("corrupt registry {}: {e}", path.display())))?
        } else {
            Registry::default()
        };
        Ok(ProjectStore {
            root,
            registry: RwLock::new(registry),
            graphs: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn save(&self, registry: &Registry) -> Result<()> {
        let json = serde_json::to_vec_pretty(registry).map_err(|e| ServiceError::Internal(e.to_string()))?;
        write_atomic(&self.root.join("registry.json"), &json)
    }

    fn scene_dir(&self, id: &str) -> PathBuf {
        self.root.join("scenes").join(id)
    }

    fn graph_dir(&self, id: &str) -> PathBuf {
        self.root.join("graphs").join(id)
    }

    /// Stores a mesh. Identical content returns the existing record with
    /// `false`; a name already bound to other content is a conflict.
    pub fn add_scene(
        &self,
        name: &str,
        format: MeshFormat,
        data: &[u8],
        labels: Option<&Labels>,
        up: UpAxis,
    ) -> Result<(SceneRecord, bool)> {
        check_name(name)?;
        let labels_json = serde_json::to_vec(&labels.cloned().unwrap_or_default()).expect("labels serialize");
        let up_tag: &[u8] = match up {
            UpAxis::Z => b"z",
            UpAxis::Y => b"y",
        };
        let id = sha256_hex(&[b"scene", format.file_name().as_bytes(), data, &labels_json, up_tag]);
        let scene = Scene::build(parse_meshes(format, data, up)?, labels)?;
        let mut reg = self.registry.write().expect("registry lock");
        if let Some(existing) = reg.scenes.get(&id) {
            return Ok((existing.clone(), false));
        }
        if reg.scenes.values().any(|s| s.name == name) {
            return Err(ServiceError::Conflict(format!("scene name `{name}` is already taken")));
        }
        let dir = self.scene_dir(&id);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(format.file_name()), data)?;
        write_atomic(&dir.join("labels.json"), &labels_json)?;
        let record = SceneRecord {
            id: id.clone(),
            name: name.to_string(),
            format,
            up,
            triangle_count: scene.triangle_count(),
            objects: scene.objects().iter().map(|o| o.mesh.name.clone()).collect(),
            walkable: scene.walkable().iter().map(|&k| scene.objects()[k].mesh.name.clone()).collect(),
        };
        reg.scenes.insert(id, record.clone());
        self.save(&reg)?;
        Ok((record, true))
    }

    /// Looks a scene up by id or name.
    pub fn scene(&self, reference: &str) -> Result<SceneRecord> {
        let reg = self.registry.read().expect("registry lock");
        reg.scenes
            .get(reference)
            .or_else(|| reg.scenes.values().find(|s| s.name == reference))
            .cloned()
            .ok_or_else(|| ServiceError::not_found("scene", reference))
    }

    pub fn scenes(&self) -> Vec<SceneRecord> {
        self.registry.read().expect("registry lock").scenes.values().cloned().collect()
    }

    pub fn scene_bytes(&self, record: &SceneRecord) -> Result<Vec<u8>> {
        Ok(fs::read(self.scene_dir(&record.id).join(record.format.file_name()))?)
    }

    pub fn load_scene(&self, record: &SceneRecord) -> Result<Scene> {
        let dir = self.scene_dir(&record.id);
        let data = fs::read(dir.join(record.format.file_name()))?;
        let labels: Labels = serde_json::from_slice(&fs::read(dir.join("labels.json"))?)
            .map_err(|e| ServiceError::Internal(format!("corrupt labels for scene {}: {e}", record.id)))?;
        Ok(Scene::build(parse_meshes(record.format, &data, record.up)?, Some(&labels))?)
    }

    /// Looks a graph up by id or name.
    pub fn graph(&self, reference: &str) -> Result<GraphRecord> {
        let reg = self.registry.read().expect("registry lock");
        reg.graphs
            .get(reference)
            .or_else(|| reg.graphs.values().find(|g| g.name.as_deref() == Some(reference)))
            .cloned()
            .ok_or_else(|| ServiceError::not_found("graph", reference))
    }

    pub fn graphs(&self) -> Vec<GraphRecord> {
        self.registry.read().expect("registry lock").graphs.values().cloned().collect()
    }

    pub fn graph_exists(&self, id: &str) -> bool {
        self.registry.read().expect("registry lock").graphs.contains_key(id)
    }

    /// Fails with a conflict when `name` is bound to a graph other than `id`.
    pub fn check_graph_name(&self, name: &str, id: &str) -> Result<()> {
        check_name(name)?;
        let reg = self.registry.read().expect("registry lock");
        if reg.graphs.values().any(|g| g.name.as_deref() == Some(name) && g.id != id) {
            return Err(ServiceError::Conflict(format!("graph name `{name}` is already taken")));
        }
        Ok(())
    }

    /// Persists a graph. Stored graphs are never rewritten; a second put of
    /// the same id returns the existing record.
    pub fn put_graph(
        &self,
        mut record: GraphRecord,
        graph: &mut AccessGraph,
        params: Option<&GraphParams>,
    ) -> Result<GraphRecord> {
        if let Some(name) = &record.name {
            self.check_graph_name(name, &record.id)?;
        }
        let bytes = write_binary(graph);
        let mut reg = self.registry.write().expect("registry lock");
        if let Some(existing) = reg.graphs.get(&record.id) {
            return Ok(existing.clone());
        }
        if !reg.scenes.contains_key(&record.scene) {
            return Err(ServiceError::not_found("scene", record.scene));
        }
        let dir = self.graph_dir(&record.id);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("graph.bin"), &bytes)?;
        if let Some(p) = params {
            write_atomic(&dir.join("params.json"), &serde_json::to_vec_pretty(p).expect("params serialize"))?;
        }
        record.report.vertex_count = graph.vertex_count();
        record.report.edge_count = graph.edge_count();
        reg.graphs.insert(record.id.clone(), record.clone());
        self.save(&reg)?;
        Ok(record)
    }

    pub fn params(&self, record: &GraphRecord) -> Result<Option<GraphParams>> {
        let path = self.graph_dir(&record.id).join("params.json");
        if !path.exists() {
            return Ok(None);
        }
        let params = serde_json::from_slice(&fs::read(path)?)
            .map_err(|e| ServiceError::Internal(format!("corrupt params for graph {}: {e}", record.id)))?;
        Ok(Some(params))
    }

    /// Raw CSR bytes as stored, without the viewshed layer.
    pub fn graph_bytes(&self, record: &GraphRecord) -> Result<Vec<u8>> {
        Ok(fs::read(self.graph_dir(&record.id).join("graph.bin"))?)
    }

    /// The stored graph with its viewshed layer, if any, applied as
    /// vertex attributes.
    pub fn load_graph(&self, record: &GraphRecord) -> Result<Arc<AccessGraph>> {
        if let Some(g) = self.graphs.lock().expect("cache lock").get(&record.id) {
            return Ok(g.clone());
        }
        let mut graph = read_binary(&self.graph_bytes(record)?)?;
        if let Some(layer) = self.viewshed(record)? {
            graph.set_attr(VIEW_MAX, layer.view_max)?;
            graph.set_attr(VIEW_MIN, layer.view_min)?;
        }
        let graph = Arc::new(graph);
        self.graphs.lock().expect("cache lock").insert(record.id.clone(), graph.clone());
        Ok(graph)
    }

    pub fn viewshed(&self, record: &GraphRecord) -> Result<Option<ViewshedLayer>> {
        let path = self.graph_dir(&record.id).join("viewshed.json");
        if !path.exists() {
            return Ok(None);
        }
        let layer = serde_json::from_slice(&fs::read(path)?)
            .map_err(|e| ServiceError::Internal(format!("corrupt viewshed for graph {}: {e}", record.id)))?;
        Ok(Some(layer))
    }

    pub fn put_viewshed(&self, record: &GraphRecord, layer: &ViewshedLayer) -> Result<()> {
        let json = serde_json::to_vec(layer).map_err(|e| ServiceError::Internal(e.to_string()))?;
        write_atomic(&self.graph_dir(&record.id).join("viewshed.json"), &json)?;
        self.graphs.lock().expect("cache lock").remove(&record.id);
        Ok(())
    }
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.len() > 128 || name.chars().any(|c| c.is_control() || c == '/') {
        return Err(ServiceError::BadRequest(format!("invalid name `{name}`")));
    }
    Ok(())
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, data)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use accessgraph::fixtures;

    fn kitchen_obj() -> (Vec<u8>, Labels) {
        let f = fixtures::kitchen();
        let mut buf = Vec::new();
        f.write_obj(&mut buf).unwrap();
        (buf, f.labels)
    }

    #[test]
    fn scenes_are_content_addressed() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProjectStore::open(dir.path()).unwrap();
        let (obj, labels) = kitchen_obj();
        let (a, created) = store.add_scene("kitchen", MeshFormat::Obj, &obj, Some(&labels), UpAxis::Z).unwrap();
        assert!(created);
        let (b, created) = store.add_scene("kitchen", MeshFormat::Obj, &obj, Some(&labels), UpAxis::Z).unwrap();
        assert!(!created);
        assert_eq!(a, b);
        assert_eq!(a.walkable, vec!["floor".to_string()]);
        let err = store.add_scene("kitchen", MeshFormat::Obj, &obj, None, UpAxis::Z).unwrap_err();
        assert_eq!(err.status(), 409);
        assert_eq!(store.scene("kitchen").unwrap().id, a.id);
        assert_eq!(store.scene(&a.id).unwrap().name, "kitchen");
        assert!(matches!(store.scene("nope"), Err(ServiceError::NotFound { .. })));
    }

    #[test]
    fn registry_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let (obj, labels) = kitchen_obj();
        let id = {
            let store = ProjectStore::open(dir.path()).unwrap();
            store.add_scene("k", MeshFormat::Obj, &obj, Some(&labels), UpAxis::Z).unwrap().0.id
        };
        let store = ProjectStore::open(dir.path()).unwrap();
        let record = store.scene("k").unwrap();
        assert_eq!(record.id, id);
        assert!(store.load_scene(&record).unwrap().triangle_count() > 0);
    }

    #[test]
    fn graph_ids_depend_on_scene_and_params() {
        let p = GraphParams::new(nalgebra::Point3::origin());
        let mut q = p.clone();
        q.step_up = 0.0;
        assert_eq!(graph_id("s", &p), graph_id("s", &p));
        assert_ne!(graph_id("s", &p), graph_id("t", &p));
        assert_ne!(graph_id("s", &p), graph_id("s", &q));
        assert_eq!(params_hash(&p).len(), 64);
    }

    #[test]
    fn malformed_names_are_rejected() {
        assert!(check_name("").is_err());
        assert!(check_name("a/b").is_err());
        assert!(check_name("ok-name_1").is_ok());
    }
}

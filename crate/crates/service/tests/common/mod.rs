#![allow(dead_code)]

use accessgraph::fixtures::Fixture;
use accessgraph_service::api::{router, AppState};
use accessgraph_service::ProjectStore;
use serde_json::{json, Value};
use std::net::SocketAddr;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

pub const BIN: &str = env!("CARGO_BIN_EXE_accessgraph");

pub fn obj_text(f: &Fixture) -> String {
    let mut buf = Vec::new();
    f.write_obj(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Body for `POST /scenes` carrying a fixture's mesh and labels.
pub fn scene_upload(name: &str, f: &Fixture) -> Value {
    json!({ "name": name, "obj": obj_text(f), "labels": f.labels })
}

/// Serves the API over `store` on an ephemeral port.
pub async fn spawn_server(store: &Path, workers: usize) -> SocketAddr {
    let store = Arc::new(ProjectStore::open(store).unwrap());
    let app = router(AppState::new(store, workers, None));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    addr
}

/// Runs the CLI against `store`.
pub fn cli(store: &Path, args: &[&str]) -> Output {
    Command::new(BIN).env("SHAPE_STORE", store).args(args).output().unwrap()
}

pub fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

mod common;

use accessgraph::fixtures;
use common::{cli, scene_upload, spawn_server};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use std::net::SocketAddr;
use std::time::Duration;

fn xyz(p: &nalgebra::Point3<f64>) -> [f64; 3] {
    [p.x, p.y, p.z]
}

struct Api {
    base: String,
    http: Client,
}

impl Api {
    async fn start(store: &std::path::Path, workers: usize) -> Api {
        let addr: SocketAddr = spawn_server(store, workers).await;
        Api { base: format!("http://{addr}"), http: Client::new() }
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(body).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }

    async fn post_text(&self, path: &str, body: &Value) -> (StatusCode, String) {
        let r = self.http.post(format!("{}{path}", self.base)).json(body).send().await.unwrap();
        let status = r.status();
        (status, r.text().await.unwrap())
    }

    /// Uploads a fixture and builds its graph, waiting for the job.
    async fn build_fixture(&self, name: &str) -> Value {
        let f = fixtures::by_name(name).unwrap();
        let (status, scene) = self.post("/scenes", &scene_upload(name, &f)).await;
        assert!(status.is_success(), "{scene}");
        let req = json!({ "scene": name, "params": f.params, "name": name });
        let (status, accepted) = self.post("/graphs", &req).await;
        if status == StatusCode::OK {
            return accepted["graph"].clone();
        }
        assert_eq!(status, StatusCode::ACCEPTED, "{accepted}");
        self.wait(accepted["job_id"].as_str().unwrap()).await;
        let (status, report) = self.get(&format!("/graphs/{}/report", accepted["graph_id"].as_str().unwrap())).await;
        assert_eq!(status, StatusCode::OK);
        report
    }

    async fn wait(&self, job: &str) -> Value {
        for _ in 0..600 {
            let (status, j) = self.get(&format!("/jobs/{job}")).await;
            assert_eq!(status, StatusCode::OK);
            match j["status"].as_str().unwrap() {
                "done" | "failed" => return j,
                _ => tokio::time::sleep(Duration::from_millis(50)).await,
            }
        }
        panic!("job {job} did not finish");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn scene_upload_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::start(dir.path(), 2).await;
    let curb = fixtures::curb();
    let (status, rec) = api.post("/scenes", &scene_upload("curb", &curb)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(rec["triangle_count"].as_u64().unwrap() > 0);
    let (status, again) = api.post("/scenes", &scene_upload("curb", &curb)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["id"], rec["id"]);
    let (status, err) = api.post("/scenes", &scene_upload("curb", &fixtures::by_name("stairs").unwrap())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "Conflict");
    let (status, err) = api.post("/scenes", &json!({ "name": "x" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"], "BadRequest");
    let (status, err) = api.post("/scenes", &json!({ "name": "x", "obj": "v 0 0 0", "bogus": 1 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{err}");

    let (status, list) = api.get("/scenes").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
    let (status, mesh) = api.get("/scenes/curb").await;
    assert_eq!(status, StatusCode::OK);
    let tris = mesh["triangle_count"].as_u64().unwrap() as usize;
    assert_eq!(mesh["indices"].as_array().unwrap().len(), 3 * tris);
    assert_eq!(mesh["object_ids"].as_array().unwrap().len(), tris);
    let verts = mesh["positions"].as_array().unwrap().len() / 3;
    assert!(mesh["indices"].as_array().unwrap().iter().all(|i| (i.as_u64().unwrap() as usize) < verts));
    assert_eq!(api.get("/scenes/nope").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn graph_jobs_cache_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::start(dir.path(), 1).await;
    let f = fixtures::by_name("stairs").unwrap();
    api.post("/scenes", &scene_upload("stairs", &f)).await;

    let req = json!({ "scene": "stairs", "params": f.params });
    let (status, accepted) = api.post("/graphs", &req).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(accepted["status"], "queued");
    assert_eq!(accepted["cached"], false);
    let job = api.wait(accepted["job_id"].as_str().unwrap()).await;
    assert_eq!(job["status"], "done", "{job}");
    assert!(job["report"]["vertex_count"].as_u64().unwrap() > 0);

    let (status, cached) = api.post("/graphs", &req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cached["cached"], true);
    assert_eq!(cached["graph_id"], accepted["graph_id"]);

    let mut bad_start = req.clone();
    bad_start["params"]["tau"] = json!([40.0, 40.0, 0.0]);
    let (status, err) = api.post("/graphs", &bad_start).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "InvalidStart");
    assert_eq!(err["tau"], json!([40.0, 40.0, 0.0]));

    let mut bad = req.clone();
    bad["params"]["a"] = json!(-1.0);
    assert_eq!(api.post("/graphs", &bad).await.0, StatusCode::BAD_REQUEST);
    let unknown = json!({ "scene": "nowhere", "params": f.params });
    assert_eq!(api.post("/graphs", &unknown).await.0, StatusCode::NOT_FOUND);
    assert_eq!(api.get("/jobs/job-999").await.0, StatusCode::NOT_FOUND);
    assert_eq!(api.get("/graphs/nope").await.0, StatusCode::NOT_FOUND);

    let (status, list) = api.get("/graphs").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_duplicate_builds_share_a_graph() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::start(dir.path(), 2).await;
    let f = fixtures::kitchen();
    api.post("/scenes", &scene_upload("kitchen", &f)).await;
    let req = json!({ "scene": "kitchen", "params": f.params });
    let replies = post_concurrently(&api, &req, 6).await;
    let ids: Vec<&Value> = replies.iter().map(|r| &r["graph_id"]).collect();
    assert!(ids.iter().all(|id| *id == ids[0]));
    let jobs: std::collections::BTreeSet<String> =
        replies.iter().filter_map(|r| r["job_id"].as_str().map(str::to_owned)).collect();
    assert!(jobs.len() <= 1, "{jobs:?}");
    for j in &jobs {
        assert_eq!(api.wait(j).await["status"], "done");
    }
}

async fn post_concurrently(api: &Api, req: &Value, n: usize) -> Vec<Value> {
    let mut set = tokio::task::JoinSet::new();
    for _ in 0..n {
        let (http, url, body) = (api.http.clone(), format!("{}/graphs", api.base), req.clone());
        set.spawn(async move { http.post(url).json(&body).send().await.unwrap().json::<Value>().await.unwrap() });
    }
    let mut out = Vec::new();
    while let Some(r) = set.join_next().await {
        out.push(r.unwrap());
    }
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn graph_pages_and_binary_export() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::start(dir.path(), 1).await;
    let g = api.build_fixture("curb").await;
    let id = g["id"].as_str().unwrap();
    let total = g["report"]["vertex_count"].as_u64().unwrap() as usize;
    let edges = g["report"]["edge_count"].as_u64().unwrap() as usize;
    let (mut offset, mut seen, mut seen_edges) = (0usize, 0usize, 0usize);
    loop {
        let (status, page) = api.get(&format!("/graphs/{id}?offset={offset}&limit=7")).await;
        assert_eq!(status, StatusCode::OK);
        seen += page["vertices"].as_array().unwrap().len();
        seen_edges += page["edges"].as_array().unwrap().len();
        match page["next"].as_u64() {
            Some(n) => offset = n as usize,
            None => break,
        }
    }
    assert_eq!(seen, total);
    assert_eq!(seen_edges, edges);
    assert_eq!(api.get(&format!("/graphs/{id}?limit=0")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(api.get(&format!("/graphs/{id}?format=xml")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(api.get(&format!("/graphs/{id}?limit=abc")).await.0, StatusCode::BAD_REQUEST);

    let r = api.http.get(format!("{}/graphs/{id}?format=bin", api.base)).send().await.unwrap();
    assert_eq!(r.headers()["content-type"], "application/octet-stream");
    let bytes = r.bytes().await.unwrap();
    let stored = std::fs::read(dir.path().join("graphs").join(id).join("graph.bin")).unwrap();
    assert_eq!(bytes.as_ref(), stored.as_slice());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn path_endpoint_contract() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::start(dir.path(), 1).await;
    let g = api.build_fixture("curb").await;
    let id = g["id"].as_str().unwrap();
    let (_, page) = api.get(&format!("/graphs/{id}?limit=1")).await;
    let key = page["vertices"][0]["key"].clone();

    let (status, p) = api.post(&format!("/graphs/{id}/paths"), &json!({ "start_key": key, "goal_key": key, "rho": { "distance": 1.0 } })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["score"], 0.0);
    assert_eq!(p["edges"].as_array().unwrap().len(), 0);

    let curb = fixtures::curb();
    let ends = json!({ "start_point": xyz(&curb.landmarks["west"]), "goal_point": xyz(&curb.landmarks["east"]) });
    let mut req = ends.clone();
    req["rho"] = json!({ "distance": 1.0 });
    let (status, p) = api.post(&format!("/graphs/{id}/paths"), &req).await;
    assert_eq!(status, StatusCode::OK);
    assert!(p["length"].as_f64().unwrap() > 1.5);

    let mut steps = ends.clone();
    steps["rho"] = json!({ "steps": 1.0 });
    let (status, err) = api.post(&format!("/graphs/{id}/paths"), &steps).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "NonPositiveEdgeCost");

    let missing = json!({ "start_key": { "i": 999, "j": 999, "level": 0 }, "goal_key": key, "rho": { "distance": 1.0 } });
    let (status, err) = api.post(&format!("/graphs/{id}/paths"), &missing).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"], "UnknownKey");
    assert_eq!(api.post("/graphs/nope/paths", &req).await.0, StatusCode::NOT_FOUND);
    let (status, _) = api.post(&format!("/graphs/{id}/paths"), &json!({ "start_key": key, "goal_key": key })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn unreachable_goal_is_null() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::start(dir.path(), 1).await;
    let g = api.build_fixture("one_way_ramp").await;
    let f = fixtures::one_way_ramp();
    let req = json!({
        "start_point": xyz(&f.landmarks["bottom"]),
        "goal_point": xyz(&f.landmarks["top"]),
        "rho": { "distance": 1.0 },
    });
    let (status, text) = api.post_text(&format!("/graphs/{}/paths", g["id"].as_str().unwrap()), &req).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(text, "null");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn viewshed_heatmap_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::start(dir.path(), 1).await;
    let g = api.build_fixture("building").await;
    let id = g["id"].as_str().unwrap();

    let (status, _) = api.get(&format!("/graphs/{id}/heatmap?metric=view_max")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, report) = api.get(&format!("/graphs/{id}/report")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(report.get("viewshed").is_none());

    let config = json!({ "ray_count": 120, "seed": 9 });
    let (status, summary) = api.post(&format!("/graphs/{id}/viewshed"), &config).await;
    assert_eq!(status, StatusCode::OK, "{summary}");
    assert!(summary["view_max"]["max"].as_f64().unwrap() >= summary["view_min"]["max"].as_f64().unwrap());
    let (status, _) = api.post(&format!("/graphs/{id}/viewshed"), &json!({ "ray_count": 0 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, h) = api.get(&format!("/graphs/{id}/heatmap?metric=view_max")).await;
    assert_eq!(status, StatusCode::OK);
    let n = g["report"]["vertex_count"].as_u64().unwrap() as usize;
    assert_eq!(h["values"].as_array().unwrap().len(), n);
    assert_eq!(h["colors"].as_array().unwrap().len(), n);
    assert_eq!(api.get(&format!("/graphs/{id}/heatmap")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(api.get(&format!("/graphs/{id}/heatmap?metric=nonsense")).await.0, StatusCode::BAD_REQUEST);

    let (_, report) = api.get(&format!("/graphs/{id}/report")).await;
    assert_eq!(report["viewshed"]["ray_count"], 120);
    let attrs: Vec<&str> = report["attributes"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
    assert!(attrs.contains(&"view_max") && attrs.contains(&"view_min"));
    assert!(report["params"]["a"].as_f64().is_some());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn api_and_cli_paths_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let api = Api::start(dir.path(), 1).await;
    let g = api.build_fixture("kitchen").await;
    let id = g["id"].as_str().unwrap().to_owned();
    let f = fixtures::kitchen();
    let (a, b) = (f.landmarks["stove"], f.landmarks["sink"]);
    let req = json!({
        "start_point": [a.x, a.y, a.z],
        "goal_point": [b.x, b.y, b.z],
        "rho": { "distance": 1.0, "energy": 0.5 },
    });
    let (status, text) = api.post_text(&format!("/graphs/{id}/paths"), &req).await;
    assert_eq!(status, StatusCode::OK);

    let req_file = dir.path().join("req.json");
    std::fs::write(&req_file, req.to_string()).unwrap();
    let store = dir.path().to_owned();
    let out = tokio::task::spawn_blocking(move || {
        cli(&store, &["path", "--graph", &id, "--request", req_file.to_str().unwrap()])
    })
    .await
    .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), text);
}

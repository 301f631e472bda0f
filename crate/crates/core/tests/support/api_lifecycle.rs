// Drives the HTTP router in-process: create, run, poll, fetch, restart.

use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use nextsense_core::api::{router, Registry};
use nextsense_core::runner::read_dataset;
use nextsense_core::scenario::ExperimentSpec;
use serde_json::Value;
use sha2::{Digest, Sha256};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>, key: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(k) = key {
        req = req.header("Idempotency-Key", k);
    }
    let req = req.header("content-type", "application/json").body(Body::from(body.unwrap_or("").to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap_or(Value::Null)
}

fn check(ok: bool, what: &str) -> Result<(), String> {
    if ok { Ok(()) } else { Err(what.to_string()) }
}

async fn lifecycle() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let registry = Registry::open(dir.path(), 2).map_err(|e| e.to_string())?;
    let app = router(registry.clone(), None);

    let spec = ExperimentSpec { duration: 0.4, snapshot_interval: 0.001, ..ExperimentSpec::default() };
    let body = spec.to_json_pretty();
    let (status, created) = call(&app, "POST", "/v1/experiments", Some(&body), Some("k1")).await;
    check(status == StatusCode::CREATED, &format!("create returned {status}"))?;
    let created = json(&created);
    let id = created["run_id"].as_str().ok_or("no run_id")?.to_string();
    check(created["state"] == "queued" && created["progress"] == 0.0, "new run is not queued at progress 0")?;

    let (status, again) = call(&app, "POST", "/v1/experiments", Some(&body), Some("k1")).await;
    check(status == StatusCode::OK && json(&again)["run_id"] == id.as_str(), "idempotent resubmit made a new run")?;

    let (status, _) = call(&app, "POST", &format!("/v1/experiments/{id}/run"), None, None).await;
    check(status == StatusCode::ACCEPTED, &format!("run returned {status}"))?;

    let deadline = Instant::now() + Duration::from_secs(120);
    let mut progress = Vec::new();
    let mut states = Vec::new();
    loop {
        let (status, view) = call(&app, "GET", &format!("/v1/runs/{id}"), None, None).await;
        check(status == StatusCode::OK, "status poll failed")?;
        let view = json(&view);
        progress.push(view["progress"].as_f64().ok_or("no progress")?);
        let state = view["state"].as_str().unwrap_or("").to_string();
        if states.last() != Some(&state) {
            states.push(state.clone());
        }
        if state == "completed" || state == "failed" {
            check(state == "completed", &format!("run failed: {}", view["error"]))?;
            break;
        }
        check(Instant::now() < deadline, "run did not finish in time")?;
        std::thread::sleep(Duration::from_millis(5));
    }
    let monotone = progress.windows(2).all(|w| w[0] <= w[1]);
    check(monotone && progress.last() == Some(&1.0), "progress not monotone or not ending at 1")?;
    let allowed = [vec!["queued", "running", "completed"], vec!["running", "completed"], vec!["queued", "completed"], vec!["completed"]];
    check(allowed.iter().any(|a| *a == states), &format!("bad state sequence {states:?}"))?;

    let (status, manifest) = call(&app, "GET", &format!("/v1/runs/{id}/artifacts/manifest"), None, None).await;
    let on_disk = std::fs::read(registry.dataset_dir(&id).join("manifest.json")).map_err(|e| e.to_string())?;
    check(status == StatusCode::OK && manifest == on_disk, "manifest artifact differs from disk")?;
    let (_, iq) = call(&app, "GET", &format!("/v1/runs/{id}/artifacts/iq"), None, None).await;
    let digest = hex::encode(Sha256::digest(&iq));
    check(json(&manifest)["digests"]["iq_sha256"] == digest.as_str(), "iq artifact digest mismatch")?;

    registry.shutdown();
    drop(app);

    let reopened = Registry::open(dir.path(), 1).map_err(|e| e.to_string())?;
    let app = router(reopened.clone(), None);
    let (_, list) = call(&app, "GET", "/v1/runs", None, None).await;
    let list = json(&list);
    let runs = list["runs"].as_array().ok_or("no run list")?;
    check(runs.len() == 1 && runs[0]["run_id"] == id.as_str() && runs[0]["state"] == "completed", "completed run not listed after restart")?;
    let (status, manifest2) = call(&app, "GET", &format!("/v1/runs/{id}/artifacts/manifest"), None, None).await;
    check(status == StatusCode::OK && manifest2 == manifest, "manifest changed across restart")?;
    read_dataset(reopened.dataset_dir(&id)).map_err(|e| format!("integrity after restart: {e}"))?;
    reopened.shutdown();

    Ok(format!("{} polls, states {states:?}, digest and manifest intact across restart", progress.len()))
}

pub fn run() -> Result<String, String> {
    tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?.block_on(lifecycle())
}

#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use aclrag::gateway::{ChatModel, Embedder, HashingEmbedder, JaccardReranker};
use aclrag::index::HnswParams;
use aclrag::repository::FixtureLine;
use aclrag_service::{Models, Service, ServiceConfig, UserEntry};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const DIM: usize = 256;

pub fn config(users: &[&str]) -> ServiceConfig {
    let mut cfg = ServiceConfig::default();
    cfg.users = users
        .iter()
        .map(|u| UserEntry { user_id: (*u).into(), display_name: String::new(), token: format!("token-{u}") })
        .collect();
    cfg.gateway.dimension = DIM;
    cfg.hnsw = HnswParams { m: 8, ef_construction: 64, ef_search: 200, seed: 7 };
    cfg.sync.workers = 1;
    cfg.sync.retry_base_delay = Duration::from_millis(5);
    cfg.agent.fixed_date = chrono::NaiveDate::from_ymd_opt(2025, 6, 1);
    cfg
}

pub fn models(chat: Arc<dyn ChatModel>) -> Models {
    Models {
        embedder: Arc::new(HashingEmbedder::new(DIM, 1)),
        reranker: Arc::new(JaccardReranker),
        chat,
    }
}

pub fn models_with_embedder(embedder: Arc<dyn Embedder>, chat: Arc<dyn ChatModel>) -> Models {
    Models { embedder, reranker: Arc::new(JaccardReranker), chat }
}

/// A service with `lines` imported from an NDJSON file and fully indexed.
pub fn service_with(lines: &[FixtureLine], cfg: ServiceConfig, models: Models) -> (Service, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.ndjson");
    std::fs::write(&path, aclrag::fixtures::to_ndjson(lines)).unwrap();
    let cfg = ServiceConfig { fixture: Some(path), ..cfg };
    let service = Service::new(cfg, models).unwrap();
    assert!(service.wait_synced(Duration::from_secs(60)), "fixture indexing timed out");
    (service, dir)
}

pub async fn call(app: &Router, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

pub async fn raw(app: &Router, uri: &str, token: &str, body: &str) -> StatusCode {
    let req = Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header("authorization", format!("Bearer {token}"))
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    app.clone().oneshot(req).await.unwrap().status()
}

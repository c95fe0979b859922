#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use emagent_service::{router, AppState, Backend, ServiceConfig};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn fixture_config() -> ServiceConfig {
    ServiceConfig {
        corpus: Some(data("corpus.jsonl")),
        inventory: Some(data("inventory.csv")),
        ef_guidelines: Some(data("ef_guidelines.jsonl")),
        ef_literature: Some(data("ef_literature.jsonl")),
        benchmark: Some(data("benchmark.jsonl")),
        stub_fixtures: Some(data("stub_fixtures.json")),
        provider: Some("stub".into()),
        ..ServiceConfig::default()
    }
}

pub fn fixture_state() -> Arc<AppState> {
    let backend = Backend::load(&fixture_config()).expect("fixture backend loads");
    AppState::new(backend, Duration::from_secs(600))
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).expect("JSON body") };
    (status, value)
}

pub async fn post(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

pub fn app() -> (Router, Arc<AppState>) {
    let state = fixture_state();
    (router(Arc::clone(&state)), state)
}

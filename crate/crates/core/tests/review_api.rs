use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dermaudit::manifest::{DatasetManifest, ImageRecord};
use dermaudit::review::server::{router, ReviewState};
use dermaudit::review::{ReviewSession, VerdictLog};
use dermaudit::SimilarityPair;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn queue(n: usize) -> Vec<SimilarityPair> {
    (0..n)
        .map(|i| SimilarityPair::new(format!("a{i}"), format!("b{i}"), 0.99 - 0.001 * i as f64))
        .collect()
}

fn app(dir: &Path, n: usize) -> Router {
    let log = VerdictLog::open(dir.join("verdicts.log")).unwrap();
    let session = ReviewSession::new(queue(n), log).unwrap();
    let mut records: Vec<ImageRecord> = Vec::new();
    for i in 0..n {
        for side in ["a", "b"] {
            let mut r = ImageRecord::new(format!("{side}{i}"), "psoriasis");
            r.fst = 3;
            r.group_id = Some(format!("g{i}"));
            records.push(r);
        }
    }
    let m = DatasetManifest::from_records("t", records).unwrap();
    router(Arc::new(ReviewState::new(session).with_manifest(m).with_image_root(dir)))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, body) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

async fn post(app: &Router, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/api/verdicts")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, body) = call(app, req).await;
    (s, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

fn verdict(i: usize, who: &str, value: &str) -> Value {
    json!({ "a": format!("a{i}"), "b": format!("b{i}"), "annotator": who, "value": value })
}

#[tokio::test]
async fn next_pair_advances_only_on_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), 3);
    let (s, first) = get(&app, "/api/pairs/next?annotator=A").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(first["position"], 0);
    assert_eq!(first["a"]["image_id"], "a0");
    assert_eq!(first["a"]["diagnosis"], "psoriasis");
    assert_eq!(first["a"]["url"], "/api/images/a0");
    let (_, again) = get(&app, "/api/pairs/next?annotator=A").await;
    assert_eq!(again, first);

    let (s, ack) = post(&app, verdict(0, "A", "duplicate")).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(ack["stored"], 1);
    assert_eq!(get(&app, "/api/pairs/next?annotator=A").await.1["position"], 1);
    assert_eq!(get(&app, "/api/pairs/next?annotator=B").await.1["position"], 0);

    for i in 1..3 {
        assert_eq!(post(&app, verdict(i, "A", "different")).await.0, StatusCode::CREATED);
    }
    let (_, done) = get(&app, "/api/pairs/next?annotator=A").await;
    assert_eq!(done["done"], true);
}

#[tokio::test]
async fn verdict_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), 2);
    assert_eq!(post(&app, verdict(0, "A", "duplicate")).await.0, StatusCode::CREATED);
    assert_eq!(post(&app, verdict(0, "A", "duplicate")).await.0, StatusCode::CONFLICT);
    assert_eq!(post(&app, verdict(7, "A", "duplicate")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, verdict(1, "A", "maybe")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(&app, json!({ "a": "a1" })).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/pairs/next").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/api/pairs/next?annotator=A&session=nope").await.0, StatusCode::NOT_FOUND);
    let log = std::fs::read_to_string(dir.path().join("verdicts.log")).unwrap();
    assert_eq!(log.lines().count(), 1);
    assert!(log.ends_with("\tA\ta0\tb0\tduplicate\n"));
}

#[tokio::test]
async fn stats_report_progress_and_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), 4);
    let (_, s) = get(&app, "/api/stats").await;
    assert_eq!(s["total"], 4);
    assert_eq!(s["annotators"].as_array().unwrap().len(), 0);

    post(&app, verdict(0, "A", "duplicate")).await;
    let (_, s) = get(&app, "/api/stats").await;
    assert_eq!(s["annotators"][0]["answered"], 1);
    assert!(s["agreement"].as_array().unwrap().is_empty());

    post(&app, verdict(1, "A", "different")).await;
    post(&app, verdict(0, "B", "duplicate")).await;
    post(&app, verdict(1, "B", "different")).await;
    let (_, s) = get(&app, "/api/stats").await;
    let pair = &s["agreement"][0];
    assert_eq!(pair["common"], 2);
    assert_eq!(pair["agreement"], 1.0);
    assert_eq!(pair["kappa"], 1.0);

    let (_, info) = get(&app, "/api/session").await;
    assert_eq!(info["session_id"], s["session_id"]);
    assert_eq!(info["verdicts"], 4);
}

#[tokio::test]
async fn restart_resumes_from_the_log() {
    let dir = tempfile::tempdir().unwrap();
    {
        let app = app(dir.path(), 5);
        for i in 0..3 {
            post(&app, verdict(i, "A", "duplicate")).await;
        }
    }
    let app = app(dir.path(), 5);
    assert_eq!(get(&app, "/api/pairs/next?annotator=A").await.1["position"], 3);
    assert_eq!(post(&app, verdict(2, "A", "duplicate")).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn images_and_index_are_served() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), 1);
    image::RgbImage::from_pixel(4, 3, image::Rgb([200, 10, 10])).save(dir.path().join("a0.png")).unwrap();
    let (s, bytes) = call(&app, Request::get("/api/images/a0").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(image::load_from_memory(&bytes).unwrap().width(), 4);
    let (s, _) = call(&app, Request::get("/api/images/b0").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, html) = call(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(html).unwrap().contains("/api/"));
}

#[tokio::test]
async fn concurrent_duplicate_submissions_store_one() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), 2);
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { post(&app, verdict(0, "A", "unclear")).await.0 })
        })
        .collect();
    let mut created = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::CREATED => created += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected status {other}"),
        }
    }
    assert_eq!(created, 1);
}

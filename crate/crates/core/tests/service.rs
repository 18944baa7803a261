use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::Engine;
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use adlens::aesthetics::{decode_image, encode_png, extract_features, FeatureVector};
use adlens::model::predict;
use adlens::pipeline::{Pipeline, ServingArtifacts};
use adlens::service::router;
use adlens::synth::{mini_spec, procedural_image, write_fixture};
use adlens::tuner::{suggest, whatif, TunerParams};

/// Artifact directory of a trained mini fixture, shared by every test here.
fn artifact_dir() -> &'static PathBuf {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        let fx = write_fixture(&dir, &mini_spec()).unwrap();
        let p = Pipeline::from_config_file(&fx.config_path).unwrap();
        p.run().unwrap();
        p.config().artifact_path()
    })
}

fn artifacts() -> ServingArtifacts {
    ServingArtifacts::load(artifact_dir()).unwrap()
}

async fn call(method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(artifacts()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn sample() -> (String, FeatureVector) {
    let a = artifacts();
    let png = encode_png(&procedural_image(&mut ChaCha8Rng::seed_from_u64(99), 80, 120));
    let x = extract_features(&decode_image(&png).unwrap(), &a.registry).unwrap();
    (base64::engine::general_purpose::STANDARD.encode(png), x)
}

fn as_map(a: &ServingArtifacts, x: &FeatureVector) -> Value {
    let m: BTreeMap<&str, f64> = a.registry.ids().zip(x.values.iter().copied()).collect();
    json!(m)
}

#[tokio::test]
async fn health_and_registry() {
    let (s, v) = call("GET", "/v1/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"status": "ok"}));
    let (s, v) = call("GET", "/v1/registry", None).await;
    assert_eq!(s, StatusCode::OK);
    let manifest: Value = serde_json::from_str(&artifacts().registry.to_manifest_json()).unwrap();
    assert_eq!(v, manifest);
}

#[tokio::test]
async fn score_matches_library() {
    let a = artifacts();
    let (b64, x) = sample();
    let (s, v) = call("POST", "/v1/score", Some(json!({"image": b64}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["features"], as_map(&a, &x));
    assert_eq!(v["predicted"].as_f64().unwrap(), predict(&a.model, &x).unwrap());
}

#[tokio::test]
async fn whatif_agrees_with_tuner() {
    let a = artifacts();
    let (_, x) = sample();
    let deltas: BTreeMap<String, f64> = [("mean_saturation".into(), 15.0), ("aspect_ratio".into(), -10.0)].into();
    let (s, v) = call("POST", "/v1/whatif", Some(json!({"features": as_map(&a, &x), "deltas": deltas}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let w = whatif(&a.model, &a.registry, &x, &deltas).unwrap();
    assert_eq!(v["predicted"].as_f64().unwrap(), w.predicted);
    assert_eq!(v["adjusted"], as_map(&a, &w.adjusted));
}

#[tokio::test]
async fn whatif_unknown_feature_is_422() {
    let a = artifacts();
    let (_, x) = sample();
    let (s, v) = call("POST", "/v1/whatif", Some(json!({"features": as_map(&a, &x), "deltas": {"sparkle": 5.0}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "unknown_feature");
    let (s, v) = call("POST", "/v1/whatif", Some(json!({"features": {}, "deltas": {"sparkle": 5.0}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "unknown_feature");
    let mut feats = as_map(&a, &x);
    feats["sparkle"] = json!(1.0);
    let (s, v) = call("POST", "/v1/whatif", Some(json!({"features": feats, "deltas": {}}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "unknown_feature");
}

#[tokio::test]
async fn tune_from_features_and_image_agree_with_library() {
    let a = artifacts();
    let (b64, x) = sample();
    let want = suggest(&a.model, &a.registry, &x, &TunerParams::new(2, 20.0, 5.0)).unwrap();
    let (s, v) = call("POST", "/v1/tune", Some(json!({"features": as_map(&a, &x), "k": 2, "s": 20.0, "t": 5.0}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v, serde_json::to_value(&want).unwrap());
    let (s, v2) = call("POST", "/v1/tune", Some(json!({"image": b64, "k": 2, "s": 20.0, "t": 5.0}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v2, v);
}

#[tokio::test]
async fn bad_requests_have_structured_errors() {
    let (s, v) = call("POST", "/v1/tune", Some(json!({"k": 1, "s": 10.0, "t": 5.0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad_request");
    let (s, v) = call("POST", "/v1/score", Some(json!({"image": "@@@"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["message"].is_string());
    let (s, v) = call("POST", "/v1/score", Some(json!({"image": "aGVsbG8="}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "bad_image");
    let (s, v) = call("POST", "/v1/tune", Some(json!({"features": {}, "k": 99, "s": 10.0, "t": 5.0}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
}

fn snapshot(dir: &std::path::Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.clone(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[tokio::test]
async fn requests_leave_artifacts_untouched() {
    let before = snapshot(artifact_dir());
    let a = artifacts();
    let (b64, x) = sample();
    call("POST", "/v1/score", Some(json!({"image": b64}))).await;
    call("POST", "/v1/whatif", Some(json!({"features": as_map(&a, &x), "deltas": {"brightness": 30}}))).await;
    call("POST", "/v1/tune", Some(json!({"features": as_map(&a, &x), "k": 1, "s": 10.0, "t": 5.0}))).await;
    call("GET", "/v1/registry", None).await;
    assert_eq!(snapshot(artifact_dir()), before);
}

//! Read-only HTTP API over a loaded registry and regression model.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::aesthetics::{decode_image, extract_features, FeatureVector};
use crate::model::predict;
use crate::pipeline::ServingArtifacts;
use crate::tuner::{suggest, whatif, TunerError, TunerParams, TuningSuggestion};

pub const BODY_LIMIT: usize = 32 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.code, "message": self.message}))).into_response()
    }
}

impl From<TunerError> for ApiError {
    fn from(e: TunerError) -> Self {
        let code = match &e {
            TunerError::UnknownFeature(_) => "unknown_feature",
            TunerError::BudgetExceeded { .. } => "budget_exceeded",
            TunerError::BadParams(_) => "bad_params",
            TunerError::Model(_) => "model_error",
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

type Shared = Arc<ServingArtifacts>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub features: BTreeMap<String, f64>,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRequest {
    #[serde(default)]
    pub image: Option<String>,
    #[serde(default)]
    pub features: Option<BTreeMap<String, f64>>,
    pub k: usize,
    pub s: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub features: BTreeMap<String, f64>,
    #[serde(default)]
    pub deltas: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub predicted: f64,
    pub adjusted: BTreeMap<String, f64>,
}

/// Routes over shared, immutable artifacts.
pub fn router(artifacts: ServingArtifacts) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/registry", get(registry))
        .route("/v1/score", post(score))
        .route("/v1/tune", post(tune))
        .route("/v1/whatif", post(whatif_handler))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(Arc::new(artifacts))
}

/// Binds and serves until the process is stopped.
pub async fn serve(artifacts: ServingArtifacts, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(artifacts)).await
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn to_map(a: &ServingArtifacts, x: &FeatureVector) -> BTreeMap<String, f64> {
    a.registry.ids().map(String::from).zip(x.values.iter().copied()).collect()
}

/// Feature map to vector; every registry id must be present and nothing else.
fn from_map(a: &ServingArtifacts, m: &BTreeMap<String, f64>) -> Result<FeatureVector, ApiError> {
    if let Some(unknown) = m.keys().find(|k| a.registry.index_of(k).is_none()) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "unknown_feature",
            format!("unknown feature id {unknown:?}"),
        ));
    }
    let values = a
        .registry
        .ids()
        .map(|id| {
            m.get(id).copied().filter(|v| v.is_finite()).ok_or_else(|| {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "missing_feature", format!("missing or non-finite feature {id:?}"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureVector {
        registry_hash: a.registry.hash().to_string(),
        values,
    })
}

fn features_from_image(a: &ServingArtifacts, b64: &str) -> Result<FeatureVector, ApiError> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64.trim())
        .map_err(|e| ApiError::bad_request(format!("image is not base64: {e}")))?;
    let img = decode_image(&bytes).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_image", e.to_string()))?;
    extract_features(&img, &a.registry).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_image", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn registry(State(a): State<Shared>) -> Response {
    ([(axum::http::header::CONTENT_TYPE, "application/json")], a.registry.to_manifest_json()).into_response()
}

async fn score(State(a): State<Shared>, body: Bytes) -> Result<Json<ScoreResponse>, ApiError> {
    let req: ScoreRequest = parse(&body)?;
    blocking(move || {
        let x = features_from_image(&a, &req.image)?;
        let predicted = predict(&a.model, &x).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "model_error", e.to_string()))?;
        Ok(Json(ScoreResponse {
            features: to_map(&a, &x),
            predicted,
        }))
    })
    .await
}

async fn tune(State(a): State<Shared>, body: Bytes) -> Result<Json<TuningSuggestion>, ApiError> {
    let req: TuneRequest = parse(&body)?;
    blocking(move || {
        let x = match (&req.image, &req.features) {
            (Some(img), None) => features_from_image(&a, img)?,
            (None, Some(m)) => from_map(&a, m)?,
            _ => return Err(ApiError::bad_request("give exactly one of image or features")),
        };
        let params = TunerParams::new(req.k, req.s, req.t);
        Ok(Json(suggest(&a.model, &a.registry, &x, &params)?))
    })
    .await
}

async fn whatif_handler(State(a): State<Shared>, body: Bytes) -> Result<Json<WhatIfResponse>, ApiError> {
    let req: WhatIfRequest = parse(&body)?;
    if let Some(id) = req.deltas.keys().find(|k| a.registry.index_of(k).is_none()) {
        return Err(TunerError::UnknownFeature(id.clone()).into());
    }
    let x = from_map(&a, &req.features)?;
    let w = whatif(&a.model, &a.registry, &x, &req.deltas)?;
    Ok(Json(WhatIfResponse {
        predicted: w.predicted,
        adjusted: to_map(&a, &w.adjusted),
    }))
}

//! Prediction HTTP service.
//!
//! The model is loaded once and shared read-only by every handler, so a
//! response depends only on the checkpoint and the request body.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use uisal::features::{RgbImage, UiElement, UiScreen};
use uisal::model::{ProviderRegistry, SaliencyModel};
use uisal::toolkit::{model_version, Checkpoint};

/// Request bodies above this size are rejected before parsing.
pub const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;

pub struct AppState {
    pub model: SaliencyModel,
    pub registry: ProviderRegistry,
    pub model_version: String,
}

impl AppState {
    pub fn from_checkpoint_bytes(bytes: &[u8], registry: ProviderRegistry) -> uisal::Result<Self> {
        let model = Checkpoint::from_bytes(bytes)?.to_model(&registry)?;
        Ok(Self {
            model,
            registry,
            model_version: model_version(bytes),
        })
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub image_png_base64: String,
    pub elements: Vec<UiElement>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRequest {
    pub variants: Vec<PredictRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementValue {
    pub id: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub saliency: Vec<ElementValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDelta {
    pub id: u32,
    /// `None` when the element does not exist in variant 0.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub saliency: Vec<ElementValue>,
    pub deltas: Vec<ElementDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub variants: Vec<VariantResult>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

/// Scores one request; the status codes follow the public API contract.
pub fn predict_request(state: &AppState, req: &PredictRequest) -> Result<Vec<ElementValue>, ApiError> {
    if req.elements.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "no elements"));
    }
    let png = base64::engine::general_purpose::STANDARD
        .decode(req.image_png_base64.trim())
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("image is not base64: {e}")))?;
    let image = RgbImage::decode_png(&png)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("image is not a PNG: {e}")))?;
    let screen = UiScreen::new("request", image, req.elements.clone())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let pred = state
        .model
        .predict_ui(&screen, &state.registry)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(screen
        .elements
        .iter()
        .zip(pred.values())
        .map(|(e, &value)| ElementValue { id: e.id, value })
        .collect())
}

pub fn compare_request(state: &AppState, req: &CompareRequest) -> Result<CompareResponse, ApiError> {
    if req.variants.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "no variants"));
    }
    let scored = req
        .variants
        .iter()
        .map(|v| predict_request(state, v))
        .collect::<Result<Vec<_>, _>>()?;
    let base = &scored[0];
    let variants = scored
        .iter()
        .map(|s| VariantResult {
            deltas: s
                .iter()
                .map(|e| ElementDelta {
                    id: e.id,
                    delta: base.iter().find(|b| b.id == e.id).map(|b| e.value - b.value),
                })
                .collect(),
            saliency: s.clone(),
        })
        .collect();
    Ok(CompareResponse { variants })
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "model_version": state.model_version }))
}

async fn blocking<T, F>(state: Arc<AppState>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<PredictResponse>, ApiError> {
    let req: PredictRequest = parse(&body)?;
    let saliency = blocking(state, move |s| predict_request(s, &req)).await?;
    Ok(Json(PredictResponse { saliency }))
}

async fn compare(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<CompareResponse>, ApiError> {
    let req: CompareRequest = parse(&body)?;
    Ok(Json(blocking(state, move |s| compare_request(s, &req)).await?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/predict", post(predict))
        .route("/api/compare", post(compare))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

pub async fn serve(state: AppState, host: &str, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!(
        "serving model {} on http://{}",
        state.model_version,
        listener.local_addr()?
    );
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}

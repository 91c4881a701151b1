//! JSON-over-HTTP inference service.
//!
//! Endpoints live under `/api`: multipart `POST /api/predict` and
//! `POST /api/recommend`, plus `GET /api/health` and `GET /api/model`.
//! The deployed checkpoint is a shared read-only snapshot; reloading swaps
//! it atomically, so a request sees either the old or the new model.

mod deployment;
mod error;

use std::future::Future;
use std::path::Path;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::extract::multipart::MultipartRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use healthcam_core::recommendation::{RuleTable, Symptom, SymptomProfile};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use deployment::{
    Deployment, InputContract, ModelMetadata, ModelSummary, PredictResponse, RecommendResponse,
    MIN_IMAGE_SIDE,
};
pub use error::{ApiError, ErrorBody};

pub const DEFAULT_BODY_LIMIT: usize = 10 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub body_limit: usize,
    /// Allowed browser origins; empty allows any origin.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            body_limit: DEFAULT_BODY_LIMIT,
            cors_origins: Vec::new(),
        }
    }
}

struct Shared {
    deployment: RwLock<Option<Arc<Deployment>>>,
    rules: RuleTable,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl AppState {
    pub fn new(rules: RuleTable) -> Self {
        Self {
            shared: Arc::new(Shared {
                deployment: RwLock::new(None),
                rules,
            }),
        }
    }

    pub fn with_deployment(self, deployment: Deployment) -> Self {
        self.install(deployment);
        self
    }

    pub fn rules(&self) -> &RuleTable {
        &self.shared.rules
    }

    pub fn current(&self) -> Option<Arc<Deployment>> {
        self.shared
            .deployment
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    /// Swaps in a fully loaded deployment.
    pub fn install(&self, deployment: Deployment) {
        let next = Arc::new(deployment);
        *self
            .shared
            .deployment
            .write()
            .unwrap_or_else(|e| e.into_inner()) = Some(next);
    }

    /// Loads `path` off to the side and installs it only if loading succeeds;
    /// returns the new checkpoint hash.
    pub fn reload(&self, path: &Path) -> healthcam_core::Result<String> {
        let deployment = Deployment::load(path)?;
        let hash = deployment.sha256().to_owned();
        self.install(deployment);
        Ok(hash)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub checkpoint_loaded: bool,
    pub checkpoint_sha256: Option<String>,
    pub version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelResponse {
    #[serde(flatten)]
    pub metadata: ModelMetadata,
    pub symptoms: Vec<String>,
    pub rules_policy: String,
    pub aqi_table: String,
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let cors = if config.cors_origins.is_empty() {
        CorsLayer::new().allow_origin(Any)
    } else {
        let origins: Vec<HeaderValue> = config
            .cors_origins
            .iter()
            .filter_map(|o| HeaderValue::from_str(o).ok())
            .collect();
        CorsLayer::new().allow_origin(AllowOrigin::list(origins))
    }
    .allow_methods(Any)
    .allow_headers(Any);

    let limit = config.body_limit;
    Router::new()
        .route("/api/health", get(health))
        .route("/api/model", get(model))
        .route("/api/predict", post(move |s, m| predict(s, m, limit)))
        .route("/api/recommend", post(move |s, m| recommend(s, m, limit)))
        .fallback(|| async { ApiError::not_found() })
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    config: &ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state, config))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_owned();
    let started = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        target: "healthcam::request",
        method = %method,
        path = %path,
        status = response.status().as_u16(),
        latency_ms = started.elapsed().as_secs_f64() * 1e3,
    );
    response
}

async fn health(State(state): State<AppState>) -> Json<HealthResponse> {
    let current = state.current();
    Json(HealthResponse {
        status: if current.is_some() { "ok" } else { "degraded" }.to_owned(),
        checkpoint_loaded: current.is_some(),
        checkpoint_sha256: current.map(|d| d.sha256().to_owned()),
        version: env!("CARGO_PKG_VERSION").to_owned(),
    })
}

async fn model(State(state): State<AppState>) -> Result<Json<ModelResponse>, ApiError> {
    let deployment = state.current().ok_or_else(ApiError::no_checkpoint)?;
    let rules = state.rules();
    Ok(Json(ModelResponse {
        metadata: deployment.metadata(),
        symptoms: Symptom::vocabulary()
            .into_iter()
            .map(str::to_owned)
            .collect(),
        rules_policy: rules.policy.clone(),
        aqi_table: rules.aqi.name.clone(),
    }))
}

#[derive(Default)]
struct Upload {
    image: Option<Vec<u8>>,
    symptoms: Option<String>,
}

fn multipart_error(status: StatusCode, text: String, limit: usize) -> ApiError {
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::payload_too_large(limit)
    } else {
        ApiError::bad_request(text)
    }
}

async fn read_upload(
    multipart: Result<Multipart, MultipartRejection>,
    limit: usize,
) -> Result<Upload, ApiError> {
    let mut multipart = multipart.map_err(|e| multipart_error(e.status(), e.body_text(), limit))?;
    let mut upload = Upload::default();
    loop {
        let field = multipart
            .next_field()
            .await
            .map_err(|e| multipart_error(e.status(), e.body_text(), limit))?;
        let Some(field) = field else { break };
        let name = field.name().map(str::to_owned);
        let bytes = field
            .bytes()
            .await
            .map_err(|e| multipart_error(e.status(), e.body_text(), limit))?;
        match name.as_deref() {
            Some("image") => upload.image = Some(bytes.to_vec()),
            Some("symptoms") => {
                let text = String::from_utf8(bytes.to_vec())
                    .map_err(|_| ApiError::bad_request("field `symptoms` is not UTF-8"))?;
                upload.symptoms = Some(text);
            }
            _ => {}
        }
    }
    Ok(upload)
}

async fn run_blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(ApiError::internal)?
}

async fn predict(
    State(state): State<AppState>,
    multipart: Result<Multipart, MultipartRejection>,
    limit: usize,
) -> Result<Json<PredictResponse>, ApiError> {
    let upload = read_upload(multipart, limit).await?;
    let image = upload.image.ok_or_else(ApiError::missing_image)?;
    let deployment = state.current().ok_or_else(ApiError::no_checkpoint)?;
    let aqi = state.rules().aqi.clone();
    run_blocking(move || deployment.predict_bytes(&image, &aqi))
        .await
        .map(Json)
}

async fn recommend(
    State(state): State<AppState>,
    multipart: Result<Multipart, MultipartRejection>,
    limit: usize,
) -> Result<Json<RecommendResponse>, ApiError> {
    let upload = read_upload(multipart, limit).await?;
    let profile = SymptomProfile::parse(upload.symptoms.as_deref().unwrap_or_default()).map_err(
        |e| match e {
            healthcam_core::Error::UnknownSymptom(token) => ApiError::unknown_symptom(&token),
            other => ApiError::bad_request(other.to_string()),
        },
    )?;
    let image = upload.image.ok_or_else(ApiError::missing_image)?;
    let deployment = state.current().ok_or_else(ApiError::no_checkpoint)?;
    let rules = state.rules().clone();
    run_blocking(move || deployment.recommend_bytes(&image, &profile, &rules))
        .await
        .map(Json)
}

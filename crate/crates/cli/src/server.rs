//! Stateless HTTP/JSON service.
//!
//! Handlers share only the immutable [`AppConfig`]. Model work runs on the
//! blocking pool so `/healthz` stays responsive while fits and searches run.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::api::{self, ApiError, ChangepointRequest, SearchRequest, SimulateRequest};
use crate::config::AppConfig;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

/// Parses a JSON body, reporting malformed input as a 400.
fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("malformed JSON body: {e}")))
}

async fn blocking<T, F>(f: F) -> Result<Json<T>, ApiError>
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?.map(Json)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn policies() -> Json<serde_json::Value> {
    Json(json!({ "policies": api::policies() }))
}

async fn simulate(body: Bytes) -> Result<Json<api::SimulateResponse>, ApiError> {
    let req: SimulateRequest = parse(&body)?;
    blocking(move || api::simulate(&req)).await
}

async fn search(State(cfg): State<Arc<AppConfig>>, body: Bytes) -> Result<Json<api::SearchResponse>, ApiError> {
    let req: SearchRequest = parse(&body)?;
    blocking(move || api::search(&req, cfg.search_cap)).await
}

async fn changepoint(
    State(cfg): State<Arc<AppConfig>>,
    body: Bytes,
) -> Result<Json<pandemic::changepoint::FitReport>, ApiError> {
    let req: ChangepointRequest = parse(&body)?;
    blocking(move || api::changepoint(&req, cfg.data_dir.as_deref(), cfg.default_seed)).await
}

fn cors(cfg: &AppConfig) -> CorsLayer {
    let origin = match cfg.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(v)) => AllowOrigin::exact(v),
        Some(Err(_)) => {
            log::warn!("ignoring unparseable CORS origin {:?}", cfg.cors_origin);
            AllowOrigin::any()
        }
        None => AllowOrigin::any(),
    };
    CorsLayer::new().allow_origin(origin).allow_methods([Method::GET, Method::POST]).allow_headers([header::CONTENT_TYPE])
}

pub fn router(cfg: AppConfig) -> Router {
    let layer = cors(&cfg);
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/policies", get(policies))
        .route("/api/simulate", post(simulate))
        .route("/api/search", post(search))
        .route("/api/changepoint", post(changepoint))
        .with_state(Arc::new(cfg))
        .layer(layer)
}

/// Serves on an already bound listener until the process is interrupted.
pub async fn serve_on(listener: TcpListener, cfg: AppConfig) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(cfg))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Binds `0.0.0.0:<port>` and serves.
pub async fn serve(cfg: AppConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(("0.0.0.0", cfg.port)).await?;
    serve_on(listener, cfg).await
}

//! HTTP API over the study store.
//!
//! | method | path | result |
//! |---|---|---|
//! | POST | `/api/studies` | 201 summary (body = image bytes, `X-Format: dicom\|pgm`) |
//! | GET | `/api/studies/{id}` | summary |
//! | GET | `/api/studies/{id}/render` | 8-bit PGM, `X-WW`/`X-WL`/`X-Warning` headers |
//! | GET | `/api/studies/{id}/auto-window` | JSON window |
//! | GET, PUT | `/api/studies/{id}/mask` | mask PGM / 204 |
//! | GET | `/api/studies/{id}/histogram` | JSON counts |
//! | GET | `/healthz` | `ok` |

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use iwin_core::ingest::SourceKind;
use iwin_core::pgm::PgmImage;
use iwin_core::suppression::load_external_mask;
use iwin_core::windowing::AutoWindowStrategy;
use iwin_core::WindowSettings;
use serde::Serialize;
use tower_http::services::ServeDir;

use crate::store::{StudyHandle, StudyStore};
use crate::study::Study;

pub const PGM_CONTENT_TYPE: &str = "image/x-portable-graymap";
const DEFAULT_HISTOGRAM_BINS: usize = 256;
const MAX_HISTOGRAM_BINS: usize = 65536;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    pub store_dir: Option<PathBuf>,
    pub max_body_bytes: usize,
    pub default_strategy: AutoWindowStrategy,
    /// Directory holding the viewer bundle served at `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            store_dir: None,
            max_body_bytes: 64 * 1024 * 1024,
            default_strategy: AutoWindowStrategy::default(),
            ui_dir: None,
        }
    }
}

pub struct AppState {
    pub store: StudyStore,
    pub config: ServiceConfig,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    name: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, name: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            name: name.to_string(),
            message: message.into(),
        }
    }

    fn unprocessable(name: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, name, message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body {
            error: String,
            message: String,
        }
        (
            self.status,
            Json(Body {
                error: self.name,
                message: self.message,
            }),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Builds the router. Opens the persistent store when `store_dir` is set.
pub fn router(config: ServiceConfig) -> anyhow::Result<Router> {
    let store = match &config.store_dir {
        Some(dir) => StudyStore::open(dir)?,
        None => StudyStore::in_memory(),
    };
    Ok(router_with_store(store, config))
}

pub fn router_with_store(store: StudyStore, config: ServiceConfig) -> Router {
    let limit = config.max_body_bytes;
    let ui_dir = config.ui_dir.clone();
    let state = Arc::new(AppState { store, config });
    let api = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/studies", axum::routing::post(upload))
        .route("/api/studies/{id}", get(summary))
        .route("/api/studies/{id}/render", get(render))
        .route("/api/studies/{id}/auto-window", get(auto_window))
        .route("/api/studies/{id}/mask", get(get_mask).put(put_mask))
        .route("/api/studies/{id}/histogram", get(histogram))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(placeholder_ui),
    }
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], config.port));
    let app = router(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn placeholder_ui(uri: axum::http::Uri) -> Response {
    if uri.path() == "/" || uri.path() == "/index.html" {
        Html(
            "<!doctype html><title>iwin</title>\
             <p>The viewer bundle is not installed. Start the service with \
             <code>--ui-dir</code> pointing at it, or use the <code>/api</code> endpoints.</p>",
        )
        .into_response()
    } else {
        StatusCode::NOT_FOUND.into_response()
    }
}

fn lookup(state: &AppState, id: &str) -> ApiResult<StudyHandle> {
    state
        .store
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("no study {id:?}")))
}

fn parse_bool(q: &HashMap<String, String>, key: &str) -> ApiResult<bool> {
    match q.get(key).map(|s| s.to_ascii_lowercase()) {
        None => Ok(false),
        Some(v) => match v.as_str() {
            "" | "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(ApiError::unprocessable("InvalidParameter", format!("{key}={v}"))),
        },
    }
}

fn parse_strategy(state: &AppState, q: &HashMap<String, String>) -> ApiResult<AutoWindowStrategy> {
    match q.get("strategy") {
        None => Ok(state.config.default_strategy),
        Some(s) => s
            .parse()
            .map_err(|e: iwin_core::windowing::WindowError| ApiError::unprocessable(e.name(), e.to_string())),
    }
}

fn parse_f64(q: &HashMap<String, String>, key: &str) -> ApiResult<Option<f64>> {
    q.get(key)
        .map(|v| {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ApiError::unprocessable("InvalidParameter", format!("{key}={v}")))
        })
        .transpose()
}

fn header_value(s: &str) -> HeaderValue {
    HeaderValue::from_str(s).unwrap_or_else(|_| HeaderValue::from_static("invalid"))
}

async fn upload(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let kind = match headers.get("x-format") {
        Some(v) => v
            .to_str()
            .unwrap_or("")
            .parse::<SourceKind>()
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.name(), e.to_string()))?,
        None => SourceKind::sniff(&body),
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let study = tokio::task::spawn_blocking(move || Study::ingest(id, body.to_vec(), kind))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.name(), e.to_string()))?;
    let summary = study.summary();
    state.store.insert(study).map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn summary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let study = lookup(&state, &id)?;
    let s = study.read().summary();
    Ok(Json(s).into_response())
}

async fn render(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let study = lookup(&state, &id)?;
    let suppress = parse_bool(&q, "suppress")?;
    let strategy = parse_strategy(&state, &q)?;
    let explicit = match (parse_f64(&q, "ww")?, parse_f64(&q, "wl")?) {
        (Some(ww), Some(wl)) => Some(
            WindowSettings::new(wl, ww)
                .map_err(|e| ApiError::unprocessable(e.name(), e.to_string()))?,
        ),
        (None, None) => None,
        _ => {
            return Err(ApiError::unprocessable(
                "InvalidParameter",
                "ww and wl must be given together",
            ))
        }
    };
    let rendered = tokio::task::spawn_blocking(move || study.read().render(explicit, suppress, &strategy))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| ApiError::unprocessable(e.name(), e.to_string()))?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(PGM_CONTENT_TYPE));
    headers.insert("x-ww", header_value(&rendered.settings.width().to_string()));
    headers.insert("x-wl", header_value(&rendered.settings.level().to_string()));
    if !rendered.warnings.is_empty() {
        headers.insert("x-warning", header_value(&rendered.warnings.join("; ")));
    }
    Ok((headers, rendered.pgm).into_response())
}

#[derive(Debug, Serialize)]
struct AutoWindowResponse {
    ww: f64,
    wl: f64,
    strategy: AutoWindowStrategy,
    suppress: bool,
    foreground_fraction: Option<f64>,
    warnings: Vec<String>,
}

async fn auto_window(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let study = lookup(&state, &id)?;
    let suppress = parse_bool(&q, "suppress")?;
    let strategy = parse_strategy(&state, &q)?;
    let study = study.read();
    let outcome = study
        .auto_window(&strategy, suppress)
        .map_err(|e| ApiError::unprocessable(e.name(), e.to_string()))?;
    Ok(Json(AutoWindowResponse {
        ww: outcome.settings.width(),
        wl: outcome.settings.level(),
        strategy,
        suppress,
        foreground_fraction: study.mask().map(|m| m.foreground_fraction()),
        warnings: outcome.warnings,
    })
    .into_response())
}

async fn get_mask(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let study = lookup(&state, &id)?;
    let study = study.read();
    let mask = study
        .mask()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NoMask", "study has no mask"))?;
    let bytes = PgmImage::from_mask(mask).encode();
    Ok(([(header::CONTENT_TYPE, PGM_CONTENT_TYPE)], bytes).into_response())
}

async fn put_mask(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let study = lookup(&state, &id)?;
    let pgm = PgmImage::decode(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.name(), e.to_string()))?;
    let mut study = study.write();
    let mask = load_external_mask(study.dims(), &pgm)
        .map_err(|e| ApiError::unprocessable(e.name(), e.to_string()))?;
    study
        .set_external_mask(mask)
        .map_err(|e| ApiError::unprocessable(e.name(), e.to_string()))?;
    state.store.persist(&study).map_err(ApiError::internal)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn histogram(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let study = lookup(&state, &id)?;
    let suppress = parse_bool(&q, "suppress")?;
    let bins = match q.get("bins") {
        None => DEFAULT_HISTOGRAM_BINS,
        Some(b) => b
            .parse::<usize>()
            .ok()
            .filter(|&n| (1..=MAX_HISTOGRAM_BINS).contains(&n))
            .ok_or_else(|| ApiError::unprocessable("InvalidParameter", format!("bins={b}")))?,
    };
    let report = study
        .read()
        .histogram(suppress, bins)
        .map_err(|e| ApiError::unprocessable(e.name(), e.to_string()))?;
    Ok(Json(report).into_response())
}

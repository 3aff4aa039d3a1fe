//! HTTP front end for the engine.
//!
//! | route                | body                                  | response          |
//! |----------------------|---------------------------------------|-------------------|
//! | `GET /api/model`     |                                       | model info        |
//! | `POST /api/classify` | image bytes or `{"preset": "<id>"}`   | trace document    |
//! | `POST /api/conv-demo`| `{"in", "kernel", "stride", "padding"}` | shape report + steps |
//! | `GET /`              |                                       | UI bundle         |

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use cnn_lens_core::model::DEFAULT_SEED;
use cnn_lens_core::{Engine, Error, Model};
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

/// Uploads larger than this are rejected before decoding.
pub const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

const PLACEHOLDER_INDEX: &str = include_str!("placeholder_index.html");

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub model_path: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
}

/// Error raised while loading weights; the CLI maps it to its own exit code.
#[derive(Debug)]
pub struct ModelLoadError(pub String);

impl std::fmt::Display for ModelLoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ModelLoadError {}

/// Loads the weights at `path`, or the seeded model when no path is given.
pub fn load_engine(path: Option<&Path>) -> Result<Engine, ModelLoadError> {
    let model = match path {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| ModelLoadError(format!("reading {}: {e}", path.display())))?;
            Model::load(&bytes).map_err(|e| ModelLoadError(format!("{}: {e}", path.display())))?
        }
        None => {
            tracing::warn!(seed = DEFAULT_SEED, "no weights file configured; using seeded model");
            Model::seeded(DEFAULT_SEED)
        }
    };
    Ok(Engine::new(model))
}

#[derive(Clone)]
struct AppState {
    engine: Arc<Engine>,
}

fn json(body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json; charset=utf-8")], body).into_response()
}

fn error_response(err: &Error) -> Response {
    let status = match err {
        Error::Decode(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
        Error::Parse(_) | Error::Config(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    let body = serde_json::json!({ "error": err.to_string() });
    (status, axum::Json(body)).into_response()
}

async fn model_info(State(state): State<AppState>) -> Response {
    json(state.engine.model_info_json())
}

async fn classify(State(state): State<AppState>, body: Bytes) -> Response {
    let engine = Arc::clone(&state.engine);
    let result = tokio::task::spawn_blocking(move || engine.classify_bytes(&body)).await;
    match result {
        Ok(Ok(doc)) => json(doc),
        Ok(Err(e)) => error_response(&e),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn conv_demo(State(state): State<AppState>, body: Bytes) -> Response {
    match state.engine.conv_demo_bytes(&body) {
        Ok(doc) => json(doc),
        Err(e) => error_response(&e),
    }
}

async fn placeholder_index() -> Html<&'static str> {
    Html(PLACEHOLDER_INDEX)
}

pub fn router(engine: Arc<Engine>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/model", get(model_info))
        .route("/api/classify", post(classify))
        .route("/api/conv-demo", post(conv_demo))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(AppState { engine });
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api.route("/", get(placeholder_index)),
    }
}

/// Binds `addr` and starts serving in the background.
pub async fn spawn(
    engine: Arc<Engine>,
    addr: SocketAddr,
    ui_dir: Option<PathBuf>,
) -> anyhow::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    let local = listener.local_addr()?;
    let app = router(engine, ui_dir.as_deref());
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((local, handle))
}

/// Loads the model, binds, and serves until interrupted. Both the model and
/// the port are checked before any request is accepted.
pub async fn serve(engine: Engine, config: &ServeConfig) -> anyhow::Result<()> {
    let listener = TcpListener::bind(config.addr)
        .await
        .with_context(|| format!("binding {}", config.addr))?;
    tracing::info!(
        addr = %listener.local_addr()?,
        model = engine.model().fingerprint(),
        "serving"
    );
    let app = router(Arc::new(engine), config.ui_dir.as_deref());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

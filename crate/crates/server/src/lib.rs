//! HTTP JSON service for the dashboard.
//!
//! Handlers read from an immutable [`ServiceSnapshot`] behind an atomic
//! pointer. `POST /api/admin/reload` builds a fresh snapshot on a blocking
//! thread and swaps it in; requests already running keep the snapshot they
//! started with. Every response carries the build it was computed from in
//! the `x-build-id` header.

mod error;
mod handlers;
mod snapshot;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use arc_swap::ArcSwapOption;
use axum::extract::Request;
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use snapshot::{LoadFailure, ServiceSnapshot, BOUNDARIES_FILE};

pub const BUILD_ID_HEADER: &str = "x-build-id";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Overrides the `k` recorded in the data directory's `index.json`.
    pub k: Option<usize>,
    /// Static UI bundle served at `/` when the directory exists.
    pub ui_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            k: None,
            ui_dir: None,
        }
    }
}

#[derive(Debug)]
pub struct AppState {
    current: ArcSwapOption<ServiceSnapshot>,
    next_build: AtomicU64,
    reload_lock: tokio::sync::Mutex<()>,
    config: ServiceConfig,
}

impl AppState {
    /// State with no snapshot loaded; data endpoints answer 503 until a
    /// reload succeeds.
    pub fn empty(config: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState {
            current: ArcSwapOption::empty(),
            next_build: AtomicU64::new(1),
            reload_lock: tokio::sync::Mutex::new(()),
            config,
        })
    }

    /// State with the configured data directory loaded as build 1.
    pub fn load(config: ServiceConfig) -> Result<Arc<Self>, LoadFailure> {
        let state = Self::empty(config);
        let id = state.next_build.fetch_add(1, Ordering::SeqCst);
        let snap = ServiceSnapshot::load(&state.config.data_dir, state.config.k, id)?;
        state.current.store(Some(Arc::new(snap)));
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn snapshot(&self) -> Option<Arc<ServiceSnapshot>> {
        self.current.load_full()
    }

    /// Build a snapshot from `data_dir` (default: the configured one) and
    /// swap it in. Reloads are serialized; readers are never blocked.
    pub async fn reload(
        &self,
        data_dir: Option<PathBuf>,
        k: Option<usize>,
    ) -> Result<u64, LoadFailure> {
        let _guard = self.reload_lock.lock().await;
        let dir = data_dir.unwrap_or_else(|| self.config.data_dir.clone());
        let k = k.or(self.config.k);
        let id = self.next_build.fetch_add(1, Ordering::SeqCst);
        let snap = tokio::task::spawn_blocking(move || ServiceSnapshot::load(&dir, k, id))
            .await
            .map_err(|e| LoadFailure {
                errors: vec![format!("reload task failed: {e}")],
            })??;
        self.current.store(Some(Arc::new(snap)));
        Ok(id)
    }
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let uri = req.uri().clone();
    let started = std::time::Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        "{} {} {} {:.1}ms",
        method,
        uri,
        resp.status().as_u16(),
        started.elapsed().as_secs_f64() * 1e3
    );
    resp
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/status", get(handlers::status))
        .route("/api/cities", get(handlers::cities))
        .route("/api/neighborhood/{city}", get(handlers::neighborhood))
        .route("/api/curves/{city}", get(handlers::curves))
        .route("/api/glyph/{city}", get(handlers::glyph))
        .route("/api/isolation/{city}", get(handlers::isolation))
        .route("/api/map", get(handlers::map))
        .route("/api/admin/reload", post(handlers::reload))
        .route("/api/{*rest}", get(handlers::not_found));
    let app = match state.config.ui_dir.as_ref().filter(|d| d.is_dir()) {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(handlers::not_found),
    };
    app.with_state(state)
        .layer(middleware::from_fn(log_request))
}

/// Serve until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

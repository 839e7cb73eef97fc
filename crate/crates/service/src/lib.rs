//! HTTP service for interactive planning sessions.

mod api;
mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;

pub use api::{AppState, BackendChoice, CreateSession, Created, Feedback, Summary};
pub use store::{AllocationView, ServiceConfig, Snapshot};

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(api::healthz))
        .route("/scenes", get(api::list_scenes))
        .route("/scenes/{id}", get(api::get_scene))
        .route("/sessions", get(api::list_sessions).post(api::create_session))
        .route("/sessions/{id}", get(api::get_session))
        .route("/sessions/{id}/events", get(api::stream_events))
        .route("/sessions/{id}/feedback", post(api::post_feedback))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    config: ServiceConfig,
    addr: SocketAddr,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(config, listener, shutdown).await
}

/// Like [`serve`], on a listener the caller has already bound.
pub async fn serve_on(
    config: ServiceConfig,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let state = AppState::new(config)?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

//! HTTP front end over [`crate::api`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};

use crate::api::{self, ApiResponse, Params};
use crate::persist::Persisted;

type Shared = Arc<Persisted>;

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body)).into_response()
    }
}

/// Query strings are taken as raw key/value pairs so that every malformed
/// request gets a JSON error from the handlers rather than a plain-text
/// rejection.
pub fn router(structure: Shared) -> Router {
    Router::new()
        .route("/meta", get(|State(s): State<Shared>| async move { api::meta(&s) }))
        .route(
            "/clusters",
            get(|State(s): State<Shared>, Query(q): Query<Params>| async move {
                api::clusters(&s, &q)
            }),
        )
        .route(
            "/gamma-map",
            get(|State(s): State<Shared>| async move { api::gamma_map(&s) }),
        )
        .route(
            "/curve",
            get(|State(s): State<Shared>, Query(q): Query<Params>| async move {
                api::curve(&s, &q)
            }),
        )
        .fallback(|uri: Uri| async move { ApiResponse::not_found(uri.path()) })
        .with_state(structure)
}

/// Serves until the listener fails or `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    structure: Shared,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(structure))
        .with_graceful_shutdown(shutdown)
        .await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await
}

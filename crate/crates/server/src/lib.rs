//! HTTP API over the tutoring core. Every route lives under `/api/v1` and
//! authenticates with `Authorization: Bearer <token>`, where the token is
//! either a pre-shared instructor token or a student session token issued at
//! enrollment.

pub mod config;
pub mod error;
mod routes;

use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::http::{header, HeaderValue, Method};
use axum::Router;
use pappl_core::service::Platform;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::trace::TraceLayer;

pub use routes::api_routes;

/// Uploads (media, course files) are capped at this many bytes.
pub const BODY_LIMIT: usize = 32 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub platform: Arc<Platform>,
}

/// Browser access is denied unless the origin is on the allow-list.
pub fn cors_layer(origins: &[String]) -> anyhow::Result<CorsLayer> {
    let origins = origins
        .iter()
        .map(|o| o.trim())
        .filter(|o| !o.is_empty())
        .map(|o| {
            HeaderValue::from_str(o).map_err(|e| anyhow::anyhow!("bad CORS origin `{o}`: {e}"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([
            Method::GET,
            Method::POST,
            Method::PUT,
            Method::PATCH,
            Method::DELETE,
        ])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]))
}

pub fn app(platform: Arc<Platform>, cors_origins: &[String]) -> anyhow::Result<Router> {
    Ok(Router::new()
        .nest("/api/v1", api_routes())
        .with_state(AppState { platform })
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(cors_layer(cors_origins)?)
        .layer(TraceLayer::new_for_http()))
}

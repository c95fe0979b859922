//! HTTP API over the agent, emission-factor recommender, inventory analytics
//! and evaluation runner.

pub mod app;
pub mod config;
pub mod error;
pub mod session;

use std::net::SocketAddr;
use std::time::Duration;

pub use app::{router, AppState, Backend, ChatRequest, ChatResponse, EfResponse, EvalRunRequest, EvalRunResponse};
pub use config::ServiceConfig;
pub use error::{ApiError, ErrorCode, ServiceError};

/// Loads the configured data, binds the listener and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let backend = tokio::task::block_in_place(|| Backend::load(&config))?;
    let state = AppState::new(backend, Duration::from_secs(config.session_ttl_secs));
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|e| ServiceError::Config(format!("bad listen address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

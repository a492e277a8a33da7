//! HTTP service and operator CLI around `advisor-core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod state;

use std::sync::Arc;
use std::time::Duration;

pub use config::ServiceConfig;
pub use state::AppState;

/// Bind, serve until Ctrl-C, then drain.
pub async fn serve(state: Arc<AppState>) -> std::io::Result<()> {
    let addr = format!("{}:{}", state.config.server.bind, state.config.server.port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    let sweeper = api::spawn_sweeper(state.clone(), Duration::from_secs(state.config.gateway.sweep_interval_secs));
    tracing::info!(addr = %listener.local_addr()?, chunks = state.advisor.knowledge_base().index.len(), "listening");
    axum::serve(listener, api::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    sweeper.abort();
    Ok(())
}

//! Embedded HTTP service for labeling copy candidates.
//!
//! Serves the pairs of an audit report (training sample and its nearest
//! synthetic sample), renders their images as PNG, and appends reviewer
//! labels to a JSON-Lines store.

mod api;
mod error;
mod render;
mod session;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::router;
pub use error::ReviewError;
pub use render::render_png;
pub use session::{sample_pairs, ImageResolver, PairStatus, ReviewPair, ReviewSession, SessionSummary};

/// Serve until Ctrl-C.
pub async fn serve(session: ReviewSession, addr: SocketAddr, ui_dir: Option<PathBuf>) -> Result<(), ReviewError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ReviewError::Bind { addr: addr.to_string(), source })?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    let app = router(Arc::new(session), ui_dir);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

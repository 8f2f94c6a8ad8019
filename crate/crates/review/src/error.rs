use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error(transparent)]
    Core(#[from] memaudit_core::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("cannot resolve image for id {0:?}")]
    UnresolvedId(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("png encoding failed: {0}")]
    Render(String),
}

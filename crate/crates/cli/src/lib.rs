//! Library side of the `memaudit` command-line tool.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{render_summary, AuditSummary, Summary};

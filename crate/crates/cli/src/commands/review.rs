use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use memaudit_core::detection::AuditReport;
use memaudit_core::LabelStore;
use memaudit_review::{serve, ImageResolver, ReviewSession};

use crate::args::ReviewArgs;
use crate::config::ConfigFile;
use crate::error::{CliError, CliResult};

/// Runs until interrupted; writes no run manifest since its output is the label store.
pub fn review(a: ReviewArgs, cfg: &ConfigFile) -> CliResult<()> {
    let report_path: PathBuf = cfg.require(a.report, "report")?;
    let images: PathBuf = cfg.require(a.images, "images")?;
    let labels: PathBuf = cfg.require(a.labels, "labels")?;
    let host: String = cfg.pick_or(a.host, "host", "127.0.0.1".to_string())?;
    let port: u16 = cfg.pick_or(a.port, "port", 8080)?;
    let sample: Option<usize> = cfg.pick(a.sample, "sample")?;
    let seed = cfg.pick_or(a.seed, "seed", 0u64)?;
    let ui_dir: Option<PathBuf> = cfg.pick(a.ui_dir, "ui_dir")?;

    let ip: IpAddr = host.parse().map_err(|_| CliError::config(format!("bad --host {host:?}")))?;
    let text = std::fs::read_to_string(&report_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", report_path.display())))?;
    let report: AuditReport =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", report_path.display())))?;
    let session = ReviewSession::new(
        report,
        ImageResolver::open(&images)?,
        LabelStore::open(&labels)?,
        sample.map(|n| (n, seed)),
    )?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve(session, SocketAddr::new(ip, port), ui_dir))?;
    Ok(())
}

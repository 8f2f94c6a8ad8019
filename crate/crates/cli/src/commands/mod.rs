//! One function per subcommand. Each resolves its settings, records the
//! files it reads and writes, and returns the resolved config for the run
//! manifest.

mod analyze;
mod pipeline;
mod report;
mod review;

use std::path::{Path, PathBuf};

use memaudit_core::{read_vector_set, Role, VectorSet};
use serde::Serialize;
use serde_json::Value;

use crate::args::Command;
use crate::config::ConfigFile;
use crate::error::{CliError, CliResult};
use crate::manifest::{default_manifest_path, RunRecorder};

pub use report::{render_summary, AuditSummary, Summary};

/// What a finished subcommand hands back to the dispatcher.
pub struct Outcome {
    pub config: Value,
    /// Main output; the run manifest is written beside it.
    pub primary: PathBuf,
}

pub fn run(command: Command, cfg: &ConfigFile, manifest: Option<PathBuf>) -> CliResult<()> {
    let name = command.name();
    let mut rec = RunRecorder::start(name);
    let outcome = match command {
        Command::SynthCorpus(a) => pipeline::synth_corpus(a, cfg, &mut rec)?,
        Command::TrainEncoder(a) => pipeline::train_encoder(a, cfg, &mut rec)?,
        Command::Embed(a) => pipeline::embed(a, cfg, &mut rec)?,
        Command::Audit(a) => analyze::audit(a, cfg, &mut rec)?,
        Command::Curve(a) => analyze::curve(a, cfg, &mut rec)?,
        Command::Roc(a) => analyze::roc(a, cfg, &mut rec)?,
        Command::Report(a) => report::report(a, cfg, &mut rec)?,
        Command::Review(a) => return review::review(a, cfg),
    };
    let path = manifest.unwrap_or_else(|| default_manifest_path(&outcome.primary));
    rec.finish(outcome.config, &path)?;
    log::info!("{name}: run manifest {}", path.display());
    Ok(())
}

pub(crate) fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("config values serialize")
}

pub(crate) fn parse_role(s: &str) -> CliResult<Role> {
    s.parse::<Role>().map_err(CliError::from)
}

/// Read a MEMB file, retagging it with `role` when its header differs.
pub(crate) fn read_set(path: &Path, role: Role, rec: &mut RunRecorder) -> CliResult<VectorSet> {
    rec.input(path);
    let set = read_vector_set(path)?;
    if set.role() != role {
        log::warn!("{} is tagged {}, using it as {role}", path.display(), set.role());
    }
    Ok(set.with_role(role))
}

pub(crate) fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize, rec: &mut RunRecorder) -> CliResult<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    rec.output(path);
    Ok(())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path, rec: &mut RunRecorder) -> CliResult<T> {
    rec.input(path);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `<stem>.<ext>`, keeping any dots already in the stem.
pub(crate) fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

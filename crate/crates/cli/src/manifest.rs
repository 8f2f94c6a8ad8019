//! Per-invocation run record. Wall-clock times live only here, so every
//! other output is byte-identical across reruns.

use std::path::{Path, PathBuf};
use std::time::Instant;

use memaudit_core::labels::now_utc_seconds;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path)?;
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub toolkit_version: String,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_utc: u64,
    pub wall_clock_seconds: f64,
}

/// Collects inputs and outputs while a subcommand runs.
pub struct RunRecorder {
    subcommand: String,
    started_utc: u64,
    clock: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl RunRecorder {
    pub fn start(subcommand: &str) -> Self {
        RunRecorder {
            subcommand: subcommand.to_string(),
            started_utc: now_utc_seconds(),
            clock: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Record an input file or every file below an input directory.
    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    fn digests(paths: &[PathBuf], skip: &Path) -> CliResult<Vec<FileDigest>> {
        let mut files = Vec::new();
        for p in paths {
            collect_files(p, &mut files)?;
        }
        files.sort();
        files.dedup();
        files.retain(|f| f != skip);
        files.iter().map(|f| FileDigest::of(f)).collect()
    }

    /// Write the manifest to `path` and return it.
    pub fn finish(self, config: Value, path: &Path) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Self::digests(&self.inputs, path)?,
            outputs: Self::digests(&self.outputs, path)?,
            started_utc: self.started_utc,
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| crate::error::CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(manifest)
    }
}

fn collect_files(p: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    if p.is_dir() {
        for e in std::fs::read_dir(p)? {
            collect_files(&e?.path(), out)?;
        }
    } else {
        out.push(p.to_path_buf());
    }
    Ok(())
}

/// `<file>.run.json` beside a file output, `<dir>/run.json` inside a directory output.
pub fn default_manifest_path(primary: &Path) -> PathBuf {
    if primary.is_dir() {
        primary.join("run.json")
    } else {
        let mut s = primary.as_os_str().to_owned();
        s.push(".run.json");
        PathBuf::from(s)
    }
}

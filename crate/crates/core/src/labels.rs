//! Human copy labels and their append-only JSON-Lines store.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Novel,
    Copy,
}

/// Copy-quality grade: `a` not a copy, `b` copy with minor structural
/// variations, `c` near-identical copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grade {
    A,
    B,
    C,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub train_id: String,
    pub synth_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_label: Option<BinaryLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<Grade>,
    pub labeler: String,
    /// UTC seconds since the Unix epoch.
    pub timestamp: u64,
}

impl LabelRecord {
    pub fn validate(&self) -> Result<()> {
        if self.binary_label.is_none() && self.grade.is_none() {
            return Err(Error::invalid("label needs binary_label or grade"));
        }
        if self.train_id.is_empty() || self.synth_id.is_empty() {
            return Err(Error::invalid("label ids must be non-empty"));
        }
        Ok(())
    }

    /// Binary reading of the label; grades map `a` to novel and `b`/`c` to copy.
    pub fn is_copy(&self) -> bool {
        match (self.binary_label, self.grade) {
            (Some(b), _) => b == BinaryLabel::Copy,
            (None, Some(g)) => g != Grade::A,
            (None, None) => false,
        }
    }

    pub fn pair(&self) -> (&str, &str) {
        (&self.train_id, &self.synth_id)
    }
}

pub fn now_utc_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Reduce a history to the latest record per `(train_id, synth_id, labeler)`.
/// Later entries in the history win; output is ordered by key.
pub fn latest_labels(history: &[LabelRecord]) -> Vec<LabelRecord> {
    let mut latest: BTreeMap<(&str, &str, &str), &LabelRecord> = BTreeMap::new();
    for rec in history {
        latest.insert((&rec.train_id, &rec.synth_id, &rec.labeler), rec);
    }
    latest.into_values().cloned().collect()
}

/// Append-only JSON-Lines label file.
#[derive(Debug, Clone)]
pub struct LabelStore {
    path: PathBuf,
}

impl LabelStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if !path.exists() {
            File::create(&path)?;
        }
        Ok(LabelStore { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Append one record and fsync before returning.
    pub fn append(&self, rec: &LabelRecord) -> Result<()> {
        rec.validate()?;
        let mut line = serde_json::to_string(rec)?;
        line.push('\n');
        let mut f = OpenOptions::new().append(true).open(&self.path)?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Full history in file order.
    pub fn history(&self) -> Result<Vec<LabelRecord>> {
        read_labels(&self.path)
    }

    pub fn latest(&self) -> Result<Vec<LabelRecord>> {
        Ok(latest_labels(&self.history()?))
    }
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("label line {}: {e}", n + 1)))?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

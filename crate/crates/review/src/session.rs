//! Review session state: the pair queue, image lookup and the label history.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use memaudit_core::corpus::{read_manifest, MANIFEST_FILE};
use memaudit_core::detection::{AuditReport, MemorizedEntry};
use memaudit_core::labels::latest_labels;
use memaudit_core::metrics::{confusion, ConfusionReport, PairKey};
use memaudit_core::{read_tensor, ImageTensor, LabelRecord, LabelStore, SeedRng};
use serde::Serialize;

use crate::error::ReviewError;

/// Uniform seeded sample of `n` candidate pairs without replacement,
/// returned in the report's order.
pub fn sample_pairs(report: &AuditReport, n: usize, seed: u64) -> Result<Vec<MemorizedEntry>, ReviewError> {
    let total = report.candidates.len();
    if n > total {
        return Err(ReviewError::BadRequest(format!("asked for {n} pairs, report has {total}")));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    SeedRng::new(seed).shuffle(&mut idx);
    let mut chosen = idx[..n].to_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| report.candidates[i].clone()).collect())
}

/// Maps sample ids to MIMG files.
#[derive(Clone, Debug)]
pub enum ImageResolver {
    /// A corpus directory with a manifest.
    Manifest(HashMap<String, PathBuf>),
    /// `<dir>/<id>.mimg`, or `<dir>/<role>/<id>.mimg`.
    Directory(PathBuf),
}

impl ImageResolver {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, ReviewError> {
        let dir = dir.as_ref();
        if dir.join(MANIFEST_FILE).exists() {
            let m = read_manifest(dir)?;
            let map = m.entries.iter().map(|e| (e.id.clone(), dir.join(&e.file))).collect();
            Ok(ImageResolver::Manifest(map))
        } else {
            Ok(ImageResolver::Directory(dir.to_path_buf()))
        }
    }

    pub fn path(&self, id: &str) -> Option<PathBuf> {
        match self {
            ImageResolver::Manifest(map) => map.get(id).cloned(),
            ImageResolver::Directory(dir) => {
                if id.contains(['/', '\\']) || id.starts_with('.') {
                    return None;
                }
                let file = format!("{id}.mimg");
                std::iter::once(dir.join(&file))
                    .chain(["train", "val", "synth"].iter().map(|r| dir.join(r).join(&file)))
                    .find(|p| p.is_file())
            }
        }
    }

    pub fn load(&self, id: &str) -> Result<ImageTensor, ReviewError> {
        let path = self.path(id).ok_or_else(|| ReviewError::NotFound(format!("image {id}")))?;
        Ok(read_tensor(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReviewPair {
    pub index: usize,
    pub train_id: String,
    pub synth_id: String,
    pub rho: f32,
    /// Detector decision at the report threshold.
    pub predicted_copy: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairStatus {
    Pending,
    Labeled,
    All,
}

#[derive(Clone, Debug, Serialize)]
pub struct SessionSummary {
    pub config_digest: String,
    pub tau: f32,
    pub percentile_u: Option<f64>,
    pub n_pairs: usize,
    pub n_labeled: usize,
    pub n_pending: usize,
    pub n_records: usize,
    pub labels_path: String,
}

/// A queue of candidate pairs under review and the labels collected so far.
///
/// Labels are appended to the JSONL store and fsynced before the in-memory
/// history is updated, all under one lock, so the store has a single writer
/// and every acknowledged label survives a restart.
pub struct ReviewSession {
    report: AuditReport,
    pairs: Vec<ReviewPair>,
    pair_index: HashMap<PairKey, usize>,
    images: ImageResolver,
    store: LabelStore,
    history: Mutex<Vec<LabelRecord>>,
}

impl ReviewSession {
    /// Queue `sample` pairs (seeded) or all candidates, ordered by descending rho.
    pub fn new(
        report: AuditReport,
        images: ImageResolver,
        store: LabelStore,
        sample: Option<(usize, u64)>,
    ) -> Result<Self, ReviewError> {
        let mut entries = match sample {
            Some((n, seed)) => sample_pairs(&report, n, seed)?,
            None => report.candidates.clone(),
        };
        memaudit_core::detection::sort_by_rho_desc(&mut entries);
        let tau = report.threshold();
        let pairs: Vec<ReviewPair> = entries
            .into_iter()
            .enumerate()
            .map(|(index, e)| ReviewPair {
                index,
                predicted_copy: tau.admits(e.rho),
                train_id: e.train_id,
                synth_id: e.synth_id,
                rho: e.rho,
            })
            .collect();
        for p in &pairs {
            for id in [&p.train_id, &p.synth_id] {
                if images.path(id).is_none() {
                    return Err(ReviewError::UnresolvedId(id.clone()));
                }
            }
        }
        let pair_index = pairs
            .iter()
            .map(|p| ((p.train_id.clone(), p.synth_id.clone()), p.index))
            .collect();
        let history = store.history()?;
        Ok(ReviewSession {
            report,
            pairs,
            pair_index,
            images,
            store,
            history: Mutex::new(history),
        })
    }

    pub fn report(&self) -> &AuditReport {
        &self.report
    }

    pub fn images(&self) -> &ImageResolver {
        &self.images
    }

    pub fn pair(&self, i: usize) -> Option<&ReviewPair> {
        self.pairs.get(i)
    }

    pub fn history(&self) -> Vec<LabelRecord> {
        self.history.lock().expect("label lock poisoned").clone()
    }

    /// Latest label per labeler for pairs in this session.
    pub fn session_labels(&self) -> Vec<LabelRecord> {
        let mut latest = latest_labels(&self.history());
        latest.retain(|r| self.pair_index.contains_key(&(r.train_id.clone(), r.synth_id.clone())));
        latest
    }

    fn labeled_keys(&self, labeler: Option<&str>) -> HashSet<PairKey> {
        self.session_labels()
            .into_iter()
            .filter(|r| labeler.is_none_or(|l| r.labeler == l))
            .map(|r| (r.train_id, r.synth_id))
            .collect()
    }

    /// Pairs by status; `labeler` restricts what counts as labeled.
    pub fn pairs(&self, status: PairStatus, labeler: Option<&str>) -> Vec<ReviewPair> {
        let done = self.labeled_keys(labeler);
        self.pairs
            .iter()
            .filter(|p| {
                let labeled = done.contains(&(p.train_id.clone(), p.synth_id.clone()));
                match status {
                    PairStatus::All => true,
                    PairStatus::Labeled => labeled,
                    PairStatus::Pending => !labeled,
                }
            })
            .cloned()
            .collect()
    }

    pub fn summary(&self) -> SessionSummary {
        let n_labeled = self.labeled_keys(None).len();
        SessionSummary {
            config_digest: self.report.config_digest.clone(),
            tau: self.report.tau,
            percentile_u: self.report.percentile_u,
            n_pairs: self.pairs.len(),
            n_labeled,
            n_pending: self.pairs.len() - n_labeled,
            n_records: self.history.lock().expect("label lock poisoned").len(),
            labels_path: self.store.path().display().to_string(),
        }
    }

    /// Persist one label. The pair must belong to the session.
    pub fn record(&self, rec: LabelRecord) -> Result<LabelRecord, ReviewError> {
        rec.validate()?;
        if rec.labeler.trim().is_empty() {
            return Err(ReviewError::BadRequest("labeler must be non-empty".into()));
        }
        if !self.pair_index.contains_key(&(rec.train_id.clone(), rec.synth_id.clone())) {
            return Err(ReviewError::NotFound(format!(
                "pair {} / {} is not in this session",
                rec.train_id, rec.synth_id
            )));
        }
        let mut history = self.history.lock().expect("label lock poisoned");
        self.store.append(&rec)?;
        history.push(rec.clone());
        Ok(rec)
    }

    /// Current labels against the detector's decisions.
    pub fn metrics(&self) -> Result<ConfusionReport, ReviewError> {
        let predictions: HashMap<PairKey, bool> = self
            .pairs
            .iter()
            .map(|p| ((p.train_id.clone(), p.synth_id.clone()), p.predicted_copy))
            .collect();
        Ok(confusion(&self.session_labels(), &predictions)?)
    }
}

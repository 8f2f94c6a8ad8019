use serde::{Deserialize, Serialize};

use super::generate::{GroundTruth, Provenance};
use crate::detection::AuditReport;
use crate::error::{Error, Result};

/// Flagged / total for one provenance class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassTally {
    pub flagged: usize,
    pub total: usize,
}

impl ClassTally {
    fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.flagged as f64 / self.total as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorScore {
    /// `None` when the corpus has no exact copies.
    pub recall_exact: Option<f64>,
    pub recall_aug: Option<f64>,
    /// `None` when nothing was flagged.
    pub precision: Option<f64>,
    pub novel: ClassTally,
    pub exact: ClassTally,
    pub aug: ClassTally,
    /// Flagged true copies whose matched training id is the planted source.
    pub correctly_attributed: usize,
}

/// Score the synthetic-side copy flags of `report` against planted ground truth.
pub fn score_detector(truth: &GroundTruth, report: &AuditReport) -> Result<DetectorScore> {
    if report.n_synth != truth.len() {
        return Err(Error::invalid(format!(
            "report covers {} synthetic samples, ground truth has {}",
            report.n_synth,
            truth.len()
        )));
    }
    let mut novel = ClassTally::default();
    let mut exact = ClassTally::default();
    let mut aug = ClassTally::default();
    for p in truth.0.values() {
        match p {
            Provenance::Novel => novel.total += 1,
            Provenance::ExactCopy(_) => exact.total += 1,
            Provenance::AugCopy(_) => aug.total += 1,
        }
    }
    let mut correctly_attributed = 0;
    for c in &report.copies {
        let p = truth
            .get(&c.synth_id)
            .ok_or_else(|| Error::invalid(format!("unknown synthetic id {}", c.synth_id)))?;
        match p {
            Provenance::Novel => novel.flagged += 1,
            Provenance::ExactCopy(_) => exact.flagged += 1,
            Provenance::AugCopy(_) => aug.flagged += 1,
        }
        if p.source() == Some(c.train_id.as_str()) {
            correctly_attributed += 1;
        }
    }
    let flagged = novel.flagged + exact.flagged + aug.flagged;
    Ok(DetectorScore {
        recall_exact: exact.rate(),
        recall_aug: aug.rate(),
        precision: (flagged > 0).then(|| (exact.flagged + aug.flagged) as f64 / flagged as f64),
        novel,
        exact,
        aug,
        correctly_attributed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{AuditTarget, CopyEntry};

    fn truth() -> GroundTruth {
        let mut t = GroundTruth::default();
        for i in 0..6 {
            t.0.insert(format!("s{i}"), Provenance::Novel);
        }
        for i in 6..9 {
            t.0.insert(format!("s{i}"), Provenance::ExactCopy(format!("t{i}")));
        }
        for i in 9..13 {
            t.0.insert(format!("s{i}"), Provenance::AugCopy(format!("t{i}")));
        }
        t
    }

    fn report(flags: &[(usize, usize)]) -> AuditReport {
        AuditReport {
            tau: 0.9,
            percentile_u: Some(95.0),
            n_train: 13,
            n_val: 13,
            n_synth: 13,
            n_mem: 0,
            n_copies: flags.len(),
            pct_mem: 0.0,
            pct_copies: 0.0,
            memorized: vec![],
            copies: flags
                .iter()
                .map(|&(s, t)| CopyEntry { synth_id: format!("s{s}"), train_id: format!("t{t}"), rho: 0.95 })
                .collect(),
            config_digest: String::new(),
            target: AuditTarget::Train,
            candidates: vec![],
        }
    }

    #[test]
    fn perfect_report() {
        let flags: Vec<_> = (6..13).map(|i| (i, i)).collect();
        let s = score_detector(&truth(), &report(&flags)).unwrap();
        assert_eq!((s.recall_exact, s.recall_aug, s.precision), (Some(1.0), Some(1.0), Some(1.0)));
        assert_eq!(s.correctly_attributed, 7);
    }

    #[test]
    fn empty_report() {
        let s = score_detector(&truth(), &report(&[])).unwrap();
        assert_eq!((s.recall_exact, s.recall_aug, s.precision), (Some(0.0), Some(0.0), None));
    }

    #[test]
    fn partial_detector_hand_tabulated() {
        // flags: 2 of 3 exact, 1 of 4 aug (wrong source), 2 novel
        let s = score_detector(&truth(), &report(&[(6, 6), (7, 7), (9, 2), (0, 1), (3, 3)])).unwrap();
        assert_eq!(s.recall_exact, Some(2.0 / 3.0));
        assert_eq!(s.recall_aug, Some(0.25));
        assert_eq!(s.precision, Some(3.0 / 5.0));
        assert_eq!(s.novel, ClassTally { flagged: 2, total: 6 });
        assert_eq!(s.correctly_attributed, 2);
    }

    #[test]
    fn id_mismatch() {
        assert!(score_detector(&truth(), &report(&[(44, 1)])).is_err());
        let mut r = report(&[]);
        r.n_synth = 3;
        assert!(score_detector(&truth(), &r).is_err());
    }
}

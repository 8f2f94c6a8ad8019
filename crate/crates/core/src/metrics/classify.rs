//! Label-based validation: confusion counts and ROC sweeps over thresholds.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detection::{percentile, MARKED_PERCENTILES};
use crate::error::{Error, Result};
use crate::labels::{latest_labels, LabelRecord};

/// `(train_id, synth_id)`.
pub type PairKey = (String, String);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `tp / (tp + fn)`; `None` when no copies were labeled.
    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `tn / (tn + fp)`; `None` when no novel pairs were labeled.
    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.tn + self.fp)
    }

    fn record(&mut self, truth_copy: bool, predicted_copy: bool) {
        match (truth_copy, predicted_copy) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub counts: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl From<ConfusionCounts> for ConfusionReport {
    fn from(counts: ConfusionCounts) -> Self {
        ConfusionReport {
            counts,
            sensitivity: counts.sensitivity(),
            specificity: counts.specificity(),
        }
    }
}

fn key(rec: &LabelRecord) -> PairKey {
    (rec.train_id.clone(), rec.synth_id.clone())
}

/// Tabulate labels against predicted copy flags.
///
/// The history is first reduced to the latest record per pair and labeler, so
/// each count is one labeler's current judgment of one pair.
pub fn confusion(labels: &[LabelRecord], predictions: &HashMap<PairKey, bool>) -> Result<ConfusionReport> {
    confusion_by(labels, |rec| {
        predictions
            .get(&key(rec))
            .copied()
            .ok_or_else(|| Error::invalid(format!("no prediction for pair {} / {}", rec.train_id, rec.synth_id)))
    })
}

fn confusion_by(
    labels: &[LabelRecord],
    mut predict: impl FnMut(&LabelRecord) -> Result<bool>,
) -> Result<ConfusionReport> {
    let mut counts = ConfusionCounts::default();
    for rec in latest_labels(labels) {
        rec.validate()?;
        counts.record(rec.is_copy(), predict(&rec)?);
    }
    Ok(counts.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub percentile_u: f64,
    pub tau: f32,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Ordered by ascending `percentile_u`.
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Points at the conventional 80/90/95/99 percentiles, when on the grid.
    pub fn marked(&self) -> Vec<RocPoint> {
        self.points
            .iter()
            .filter(|p| MARKED_PERCENTILES.contains(&p.percentile_u))
            .copied()
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,tau,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{}", p.percentile_u, p.tau, p.fpr, p.tpr);
        }
        out
    }
}

/// Integer percentiles 1 through 99.
pub fn default_u_grid() -> Vec<f64> {
    (1..100).map(f64::from).collect()
}

/// Sweep the calibrated threshold over `u_grid`, predicting copy iff
/// `rho >= tau_u`, and report false and true positive rates at each step.
/// Both classes must be present among the labels.
pub fn roc(
    labels: &[LabelRecord],
    rho: &HashMap<PairKey, f32>,
    u_grid: &[f64],
    calibration: &[f32],
) -> Result<RocCurve> {
    if u_grid.is_empty() {
        return Err(Error::invalid("empty percentile grid"));
    }
    let mut grid = u_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut points = Vec::with_capacity(grid.len());
    for u in grid {
        let tau = percentile(calibration, u)?;
        let report = confusion_by(labels, |rec| {
            rho.get(&key(rec))
                .map(|&r| r >= tau)
                .ok_or_else(|| Error::invalid(format!("no rho for pair {} / {}", rec.train_id, rec.synth_id)))
        })?;
        let c = report.counts;
        let (Some(tpr), Some(fpr)) = (c.sensitivity(), c.fpr()) else {
            return Err(Error::invalid("roc needs both copy and novel labels"));
        };
        points.push(RocPoint { percentile_u: u, tau, fpr, tpr });
    }
    Ok(RocCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{BinaryLabel, Grade};
    use crate::rng::SeedRng;
    use proptest::prelude::*;

    fn label(t: &str, s: &str, copy: bool) -> LabelRecord {
        LabelRecord {
            train_id: t.into(),
            synth_id: s.into(),
            binary_label: Some(if copy { BinaryLabel::Copy } else { BinaryLabel::Novel }),
            grade: None,
            labeler: "r1".into(),
            timestamp: 0,
        }
    }

    fn pair(i: usize) -> (String, String) {
        (format!("t{i}"), format!("s{i}"))
    }

    #[test]
    fn perfect_predictions() {
        let labels: Vec<_> = (0..10).map(|i| label(&pair(i).0, &pair(i).1, i % 3 == 0)).collect();
        let pred = (0..10).map(|i| (pair(i), i % 3 == 0)).collect();
        let r = confusion(&labels, &pred).unwrap();
        assert_eq!(r.sensitivity, Some(1.0));
        assert_eq!(r.specificity, Some(1.0));
        assert_eq!(r.counts.total(), 10);
    }

    #[test]
    fn all_predicted_copy() {
        let labels: Vec<_> = (0..100).map(|i| label(&pair(i).0, &pair(i).1, i < 60)).collect();
        let pred = (0..100).map(|i| (pair(i), true)).collect();
        let r = confusion(&labels, &pred).unwrap();
        assert_eq!(r.sensitivity, Some(1.0));
        assert_eq!(r.specificity, Some(0.0));
    }

    #[test]
    fn absent_class_is_undefined() {
        let labels = vec![label("t", "s", true)];
        let pred = HashMap::from([(("t".to_string(), "s".to_string()), true)]);
        let r = confusion(&labels, &pred).unwrap();
        assert_eq!(r.specificity, None);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["specificity"].is_null());
        assert_eq!(json["counts"]["fn"], 0);
    }

    #[test]
    fn missing_prediction_is_error() {
        let labels = vec![label("t", "s", true)];
        assert!(confusion(&labels, &HashMap::new()).is_err());
    }

    #[test]
    fn grades_and_latest_wins() {
        let mut a = label("t", "s", false);
        a.binary_label = None;
        a.grade = Some(Grade::B);
        let mut later = label("t", "s", false);
        later.timestamp = 5;
        let pred = HashMap::from([(("t".to_string(), "s".to_string()), true)]);
        let r = confusion(&[a.clone()], &pred).unwrap();
        assert_eq!(r.counts.tp, 1);
        let r = confusion(&[a, later], &pred).unwrap();
        assert_eq!(r.counts, ConfusionCounts { fp: 1, ..Default::default() });
    }

    #[test]
    fn seeded_labeling_matches_tally() {
        let mut rng = SeedRng::new(99);
        let mut labels = Vec::new();
        let mut pred = HashMap::new();
        let mut tally = [[0usize; 2]; 2];
        for i in 0..100 {
            let truth = rng.bernoulli(0.4);
            let guess = rng.bernoulli(0.5);
            labels.push(label(&pair(i).0, &pair(i).1, truth));
            pred.insert(pair(i), guess);
            tally[truth as usize][guess as usize] += 1;
        }
        let c = confusion(&labels, &pred).unwrap().counts;
        assert_eq!((c.tp, c.fn_, c.fp, c.tn), (tally[1][1], tally[1][0], tally[0][1], tally[0][0]));
    }

    fn separable() -> (Vec<LabelRecord>, HashMap<PairKey, f32>, Vec<f32>) {
        let mut labels = Vec::new();
        let mut rho = HashMap::new();
        for i in 0..20 {
            let copy = i < 5;
            labels.push(label(&pair(i).0, &pair(i).1, copy));
            rho.insert(pair(i), if copy { 0.95 + i as f32 * 0.001 } else { 0.3 + i as f32 * 0.01 });
        }
        let calibration = (0..100).map(|i| i as f32 / 100.0).collect();
        (labels, rho, calibration)
    }

    #[test]
    fn separable_reaches_corner() {
        let (labels, rho, cal) = separable();
        let curve = roc(&labels, &rho, &default_u_grid(), &cal).unwrap();
        assert!(curve.points.iter().any(|p| p.tpr == 1.0 && p.fpr == 0.0));
        assert_eq!(curve.marked().len(), 4);
        assert!(curve.to_csv().starts_with("u,tau,fpr,tpr\n1,"));
    }

    #[test]
    fn roc_requires_both_classes() {
        let (labels, rho, cal) = separable();
        let copies: Vec<_> = labels.into_iter().filter(|l| l.is_copy()).collect();
        assert!(roc(&copies, &rho, &[50.0], &cal).is_err());
    }

    #[test]
    fn overlapping_matches_brute_force() {
        let mut rng = SeedRng::new(5);
        let mut labels = Vec::new();
        let mut rho = HashMap::new();
        let mut truth = Vec::new();
        for i in 0..60 {
            let copy = rng.bernoulli(0.3);
            let r = if copy { 0.7 + 0.2 * rng.normal() } else { 0.5 + 0.2 * rng.normal() };
            labels.push(label(&pair(i).0, &pair(i).1, copy));
            rho.insert(pair(i), r as f32);
            truth.push((copy, r as f32));
        }
        let cal: Vec<f32> = (0..50).map(|_| (0.5 + 0.2 * rng.normal()) as f32).collect();
        let grid = [10.0, 35.5, 80.0, 95.0];
        let curve = roc(&labels, &rho, &grid, &cal).unwrap();
        for (p, &u) in curve.points.iter().zip(&grid) {
            let mut s = cal.clone();
            s.sort_by(f32::total_cmp);
            let r = u / 100.0 * 49.0;
            let (lo, hi) = (r.floor() as usize, r.ceil() as usize);
            let tau = (s[lo] as f64 + (s[hi] as f64 - s[lo] as f64) * (r - lo as f64)) as f32;
            let pos = truth.iter().filter(|t| t.0).count() as f64;
            let neg = truth.len() as f64 - pos;
            let tp = truth.iter().filter(|t| t.0 && t.1 >= tau).count() as f64;
            let fp = truth.iter().filter(|t| !t.0 && t.1 >= tau).count() as f64;
            assert_eq!(p.tau, tau);
            assert_eq!(p.tpr, tp / pos);
            assert_eq!(p.fpr, fp / neg);
        }
    }

    proptest! {
        #[test]
        fn roc_is_monotone(seed in 0u64..500) {
            let mut rng = SeedRng::new(seed);
            let mut labels = Vec::new();
            let mut rho = HashMap::new();
            for i in 0..30 {
                labels.push(label(&pair(i).0, &pair(i).1, i % 2 == 0));
                rho.insert(pair(i), rng.uniform() as f32);
            }
            let cal: Vec<f32> = (0..40).map(|_| rng.uniform() as f32).collect();
            let curve = roc(&labels, &rho, &default_u_grid(), &cal).unwrap();
            for w in curve.points.windows(2) {
                prop_assert!(w[1].tau >= w[0].tau);
                prop_assert!(w[1].tpr <= w[0].tpr);
                prop_assert!(w[1].fpr <= w[0].fpr);
            }
        }
    }
}

//! Copy detection: threshold calibration against a validation set,
//! train-side memorization flags, synthetic-side copy counts, null audits
//! and memorization curves over checkpoints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::similarity::{nearest, NearestNeighborTable};
use crate::vectors::VectorSet;

/// Percentile grid marked on ROC plots.
pub const MARKED_PERCENTILES: [f64; 4] = [80.0, 90.0, 95.0, 99.0];

pub const DEFAULT_PERCENTILE: f64 = 95.0;

/// `u`-th percentile with linear interpolation between closest ranks:
/// rank `r = u/100 * (n - 1)` into the ascending order.
pub fn percentile(values: &[f32], u: f64) -> Result<f32> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of empty input"));
    }
    if !(u > 0.0 && u < 100.0) {
        return Err(Error::invalid(format!("percentile must be in (0, 100), got {u}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in percentile input"));
    }
    let mut sorted: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let r = u / 100.0 * (sorted.len() - 1) as f64;
    let lo = r.floor() as usize;
    let hi = r.ceil() as usize;
    let t = sorted[lo] + (sorted[hi] - sorted[lo]) * (r - lo as f64);
    Ok(t as f32)
}

/// Copy-decision threshold on correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub tau_threshold: f32,
    /// `None` for a manually fixed threshold.
    pub percentile_u: Option<f64>,
    pub n_calibration: usize,
    /// Nearest-validation correlation per training sample.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calibration: Vec<f32>,
}

impl Threshold {
    pub fn from_calibration(calibration: Vec<f32>, u: f64) -> Result<Self> {
        let tau_threshold = percentile(&calibration, u)?;
        Ok(Threshold {
            tau_threshold,
            percentile_u: Some(u),
            n_calibration: calibration.len(),
            calibration,
        })
    }

    /// A threshold not derived from data.
    pub fn fixed(tau_threshold: f32) -> Self {
        Threshold {
            tau_threshold,
            percentile_u: None,
            n_calibration: 0,
            calibration: Vec::new(),
        }
    }

    pub fn value(&self) -> f32 {
        self.tau_threshold
    }

    pub fn admits(&self, rho: f32) -> bool {
        rho >= self.tau_threshold
    }
}

/// Calibrate `tau` as the `u`-th percentile of each training sample's
/// nearest-validation correlation.
pub fn calibrate_threshold(train: &VectorSet, val: &VectorSet, u: f64) -> Result<Threshold> {
    let nn = nearest(train, val)?;
    Threshold::from_calibration(nn.rho, u)
}

/// One training sample and its nearest synthetic sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorizedEntry {
    pub train_id: String,
    pub synth_id: String,
    pub rho: f32,
}

/// One synthetic sample and its nearest training sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopyEntry {
    pub synth_id: String,
    pub train_id: String,
    pub rho: f32,
}

/// Train-side result: which training samples have a copy among the synthetics.
#[derive(Clone, Debug, PartialEq)]
pub struct MemorizationFindings {
    pub n_train: usize,
    pub memorized: Vec<MemorizedEntry>,
    /// Nearest synthetic sample of every training sample, flagged or not.
    pub candidates: Vec<MemorizedEntry>,
}

impl MemorizationFindings {
    pub fn n_mem(&self) -> usize {
        self.memorized.len()
    }
}

/// Synthetic-side result: which synthetic samples copy some training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct CopyFindings {
    pub n_synth: usize,
    pub copies: Vec<CopyEntry>,
}

impl CopyFindings {
    pub fn n_copies(&self) -> usize {
        self.copies.len()
    }
}

fn memorized_from(nn: NearestNeighborTable, tau: &Threshold) -> MemorizationFindings {
    let candidates: Vec<MemorizedEntry> = nn
        .query_ids
        .into_iter()
        .zip(nn.match_ids)
        .zip(nn.rho)
        .map(|((train_id, synth_id), rho)| MemorizedEntry { train_id, synth_id, rho })
        .collect();
    let memorized = candidates.iter().filter(|e| tau.admits(e.rho)).cloned().collect();
    MemorizationFindings {
        n_train: candidates.len(),
        memorized,
        candidates,
    }
}

/// Flag training sample `i` iff its nearest synthetic correlation is at least `tau`.
pub fn detect_memorized(
    train: &VectorSet,
    synth: &VectorSet,
    tau: &Threshold,
) -> Result<MemorizationFindings> {
    Ok(memorized_from(nearest(train, synth)?, tau))
}

/// Flag synthetic sample `j` iff its nearest training correlation is at least `tau`.
pub fn count_copies(train: &VectorSet, synth: &VectorSet, tau: &Threshold) -> Result<CopyFindings> {
    let nn = nearest(synth, train)?;
    let copies = nn
        .query_ids
        .into_iter()
        .zip(nn.match_ids)
        .zip(nn.rho)
        .filter(|(_, rho)| tau.admits(*rho))
        .map(|((synth_id, train_id), rho)| CopyEntry { synth_id, train_id, rho })
        .collect();
    Ok(CopyFindings {
        n_synth: synth.len(),
        copies,
    })
}

/// Whether the audited target set was used to train the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditTarget {
    Train,
    /// Data never seen by the generator; flags estimate the false-positive rate.
    Holdout,
}

/// Serialized audit result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tau: f32,
    pub percentile_u: Option<f64>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_synth: usize,
    pub n_mem: usize,
    pub n_copies: usize,
    pub pct_mem: f64,
    pub pct_copies: f64,
    pub memorized: Vec<MemorizedEntry>,
    pub copies: Vec<CopyEntry>,
    pub config_digest: String,
    pub target: AuditTarget,
    /// Nearest synthetic sample for every target sample, sorted by descending rho.
    #[serde(default)]
    pub candidates: Vec<MemorizedEntry>,
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

impl AuditReport {
    pub fn assemble(
        tau: &Threshold,
        mem: MemorizationFindings,
        copies: CopyFindings,
        target: AuditTarget,
        config_digest: String,
    ) -> Self {
        let mut candidates = mem.candidates;
        sort_by_rho_desc(&mut candidates);
        AuditReport {
            tau: tau.tau_threshold,
            percentile_u: tau.percentile_u,
            n_train: mem.n_train,
            n_val: tau.n_calibration,
            n_synth: copies.n_synth,
            n_mem: mem.memorized.len(),
            n_copies: copies.copies.len(),
            pct_mem: pct(mem.memorized.len(), mem.n_train),
            pct_copies: pct(copies.copies.len(), copies.n_synth),
            memorized: mem.memorized,
            copies: copies.copies,
            config_digest,
            target,
            candidates,
        }
    }

    pub fn threshold(&self) -> Threshold {
        Threshold {
            tau_threshold: self.tau,
            percentile_u: self.percentile_u,
            n_calibration: self.n_val,
            calibration: Vec::new(),
        }
    }

    /// Rho of a candidate pair, if present in the report.
    pub fn pair_rho(&self, train_id: &str, synth_id: &str) -> Option<f32> {
        self.candidates
            .iter()
            .chain(self.memorized.iter())
            .find(|e| e.train_id == train_id && e.synth_id == synth_id)
            .map(|e| e.rho)
            .or_else(|| {
                self.copies
                    .iter()
                    .find(|e| e.train_id == train_id && e.synth_id == synth_id)
                    .map(|e| e.rho)
            })
    }
}

/// Sort by descending rho, ties by train id then synth id.
pub fn sort_by_rho_desc(entries: &mut [MemorizedEntry]) {
    entries.sort_by(|a, b| {
        b.rho
            .total_cmp(&a.rho)
            .then_with(|| a.train_id.cmp(&b.train_id))
            .then_with(|| a.synth_id.cmp(&b.synth_id))
    });
}

/// SHA-256 over labelled input digests and parameters.
pub fn config_digest(parts: &[(&str, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in parts {
        h.update(k.as_bytes());
        h.update([0u8]);
        h.update(v.as_bytes());
        h.update([0xffu8]);
    }
    hex::encode(h.finalize())
}

fn digest_for(target: &VectorSet, val_digest: Option<String>, synth: &VectorSet, tau: &Threshold) -> String {
    let mut parts = vec![("target", target.digest())];
    if let Some(v) = val_digest {
        parts.push(("val", v));
    }
    parts.push(("synth", synth.digest()));
    parts.push(("tau", format!("{:08x}", tau.tau_threshold.to_bits())));
    parts.push(("u", format!("{:?}", tau.percentile_u)));
    config_digest(&parts)
}

/// Full audit: calibrate on `(train, val)` at percentile `u`, then flag both directions.
pub fn audit(train: &VectorSet, val: &VectorSet, synth: &VectorSet, u: f64) -> Result<AuditReport> {
    let tau = calibrate_threshold(train, val, u)?;
    audit_with_threshold(train, synth, &tau, Some(val.digest()))
}

pub fn audit_with_threshold(
    train: &VectorSet,
    synth: &VectorSet,
    tau: &Threshold,
    val_digest: Option<String>,
) -> Result<AuditReport> {
    let digest = digest_for(train, val_digest, synth, tau);
    let mem = detect_memorized(train, synth, tau)?;
    let copies = count_copies(train, synth, tau)?;
    Ok(AuditReport::assemble(tau, mem, copies, AuditTarget::Train, digest))
}

/// Run the train-side computation with a holdout set never used for generative
/// training. The flagged fraction estimates the false-positive rate.
pub fn null_audit(holdout: &VectorSet, synth: &VectorSet, tau: &Threshold) -> Result<AuditReport> {
    let digest = digest_for(holdout, None, synth, tau);
    let mem = detect_memorized(holdout, synth, tau)?;
    let copies = count_copies(holdout, synth, tau)?;
    Ok(AuditReport::assemble(tau, mem, copies, AuditTarget::Holdout, digest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub checkpoint: String,
    pub n_synth: usize,
    pub n_mem: usize,
    pub pct_mem: f64,
    pub n_copies: usize,
}

/// `n_mem` per checkpoint with one threshold shared by all checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorizationCurve {
    pub tau: f32,
    pub percentile_u: Option<f64>,
    pub tau_policy: String,
    pub n_train: usize,
    pub points: Vec<CurvePoint>,
}

impl MemorizationCurve {
    pub fn n_mem(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n_mem).collect()
    }
}

/// Memorization counts over ordered `(label, synth set)` checkpoints.
/// `tau` is calibrated once from `(train, val)` at `u`.
pub fn memorization_curve(
    train: &VectorSet,
    checkpoints: &[(String, VectorSet)],
    u: f64,
    val: &VectorSet,
) -> Result<MemorizationCurve> {
    if checkpoints.is_empty() {
        return Err(Error::invalid("empty checkpoint list"));
    }
    let tau = calibrate_threshold(train, val, u)?;
    let points = checkpoints
        .par_iter()
        .map(|(label, synth)| {
            let mem = detect_memorized(train, synth, &tau)?;
            let copies = count_copies(train, synth, &tau)?;
            Ok(CurvePoint {
                checkpoint: label.clone(),
                n_synth: synth.len(),
                n_mem: mem.n_mem(),
                pct_mem: pct(mem.n_mem(), train.len()),
                n_copies: copies.n_copies(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MemorizationCurve {
        tau: tau.tau_threshold,
        percentile_u: Some(u),
        tau_policy: format!("calibrated once at percentile {u} of nearest-validation correlation"),
        n_train: train.len(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedRng;
    use crate::vectors::Role;
    use proptest::prelude::*;

    fn random_set(role: Role, n: usize, l: usize, seed: u64) -> VectorSet {
        let mut rng = SeedRng::new(seed);
        let data = (0..n * l).map(|_| rng.normal() as f32).collect();
        let ids = (0..n).map(|i| format!("{role}-{i}")).collect();
        VectorSet::new(role, ids, l, data).unwrap()
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[0.7; 10], 95.0).unwrap(), 0.7);
        let v: Vec<f32> = (1..=20).map(|i| i as f32 * 0.05).collect();
        assert!((percentile(&v, 95.0).unwrap() - 0.9525).abs() < 1e-6);
        assert_eq!(percentile(&[0.3], 37.0).unwrap(), 0.3);
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&[1.0], 0.0).is_err());
        assert!(percentile(&[1.0], 100.0).is_err());
    }

    #[test]
    fn calibrate_on_self_is_one() {
        let t = random_set(Role::Train, 20, 8, 1);
        let tau = calibrate_threshold(&t, &t.clone().with_role(Role::Val), 95.0).unwrap();
        assert_eq!(tau.value(), 1.0);
        assert_eq!(tau.n_calibration, 20);
    }

    #[test]
    fn percentile_sweep_non_decreasing() {
        let t = random_set(Role::Train, 50, 8, 2);
        let v = random_set(Role::Val, 40, 8, 3);
        let taus: Vec<f32> = MARKED_PERCENTILES
            .iter()
            .map(|&u| calibrate_threshold(&t, &v, u).unwrap().value())
            .collect();
        assert!(taus.windows(2).all(|w| w[0] <= w[1]), "{taus:?}");
    }

    #[test]
    fn synth_equals_train_flags_all() {
        let t = random_set(Role::Train, 15, 6, 4);
        let s = t.clone().with_role(Role::Synth);
        let f = detect_memorized(&t, &s, &Threshold::fixed(0.99)).unwrap();
        assert_eq!(f.n_mem(), 15);
        assert!(f.memorized.iter().all(|e| e.train_id == e.synth_id.replace("synth", "train")));
    }

    #[test]
    fn unattainable_threshold_flags_none() {
        let t = random_set(Role::Train, 15, 6, 4);
        let s = t.clone().with_role(Role::Synth);
        let tau = Threshold::fixed(1.0 + 1e-6);
        assert_eq!(detect_memorized(&t, &s, &tau).unwrap().n_mem(), 0);
        assert_eq!(count_copies(&t, &s, &tau).unwrap().n_copies(), 0);
    }

    #[test]
    fn repeated_copy_counts() {
        let t = random_set(Role::Train, 10, 12, 5);
        let novel = random_set(Role::Synth, 6, 12, 6);
        let mut rows: Vec<Vec<f32>> = novel.rows().map(<[f32]>::to_vec).collect();
        for _ in 0..3 {
            rows.push(t.row(4).to_vec());
        }
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let s = VectorSet::from_rows(Role::Synth, ids, &rows).unwrap();
        let tau = Threshold::fixed(0.99);
        assert_eq!(detect_memorized(&t, &s, &tau).unwrap().n_mem(), 1);
        assert_eq!(count_copies(&t, &s, &tau).unwrap().n_copies(), 3);
    }

    #[test]
    fn decorrelated_synth_has_no_copies() {
        let t = random_set(Role::Train, 30, 32, 7);
        let s = random_set(Role::Synth, 30, 32, 8);
        assert_eq!(count_copies(&t, &s, &Threshold::fixed(0.95)).unwrap().n_copies(), 0);
    }

    #[test]
    fn null_audit_on_itself_is_total() {
        let h = random_set(Role::Val, 25, 8, 9);
        let s = h.clone().with_role(Role::Synth);
        let tau = calibrate_threshold(&random_set(Role::Train, 25, 8, 10), &random_set(Role::Val, 25, 8, 11), 95.0).unwrap();
        let r = null_audit(&h, &s, &tau).unwrap();
        assert_eq!(r.pct_mem, 100.0);
        assert_eq!(r.target, AuditTarget::Holdout);
    }

    #[test]
    fn report_json_keys() {
        let t = random_set(Role::Train, 8, 4, 1);
        let v = random_set(Role::Val, 8, 4, 2);
        let r = audit(&t, &v, &t.clone().with_role(Role::Synth), 95.0).unwrap();
        let j = serde_json::to_value(&r).unwrap();
        for k in [
            "tau", "percentile_u", "n_train", "n_val", "n_synth", "n_mem", "n_copies", "pct_mem",
            "pct_copies", "memorized", "copies", "config_digest",
        ] {
            assert!(j.get(k).is_some(), "missing {k}");
        }
        assert_eq!(r.pct_mem, 100.0);
        assert!(r.memorized.iter().all(|e| e.rho >= r.tau));
        let back: AuditReport = serde_json::from_value(j).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn curve_constant_for_repeated_checkpoint() {
        let t = random_set(Role::Train, 20, 8, 1);
        let v = random_set(Role::Val, 20, 8, 2);
        let s = random_set(Role::Synth, 20, 8, 3);
        let cps: Vec<(String, VectorSet)> = (0..3).map(|i| (format!("it{i}"), s.clone())).collect();
        let c = memorization_curve(&t, &cps, 95.0, &v).unwrap();
        assert_eq!(c.points.len(), 3);
        assert!(c.n_mem().windows(2).all(|w| w[0] == w[1]));
        let single = memorization_curve(&t, &cps[..1], 95.0, &v).unwrap();
        let tau = calibrate_threshold(&t, &v, 95.0).unwrap();
        assert_eq!(single.n_mem()[0], detect_memorized(&t, &s, &tau).unwrap().n_mem());
        assert!(memorization_curve(&t, &[], 95.0, &v).is_err());
    }

    proptest! {
        #[test]
        fn calibration_guarantee(n in 2usize..60, seed in any::<u64>(), u in 50.0f64..99.5) {
            let t = random_set(Role::Train, n, 6, seed);
            let v = random_set(Role::Val, 17, 6, seed.wrapping_add(1));
            let tau = calibrate_threshold(&t, &v, u).unwrap();
            let above = tau.calibration.iter().filter(|&&r| r >= tau.value()).count();
            let bound = (100.0 - u) / 100.0 + 1.0 / n as f64;
            prop_assert!(above as f64 / n as f64 <= bound + 1e-12);
        }

        #[test]
        fn raising_tau_never_increases_counts(seed in any::<u64>(), t1 in -1.0f32..1.0, dt in 0.0f32..0.5) {
            let t = random_set(Role::Train, 20, 5, seed);
            let s = random_set(Role::Synth, 25, 5, seed ^ 77);
            let lo = Threshold::fixed(t1);
            let hi = Threshold::fixed(t1 + dt);
            prop_assert!(detect_memorized(&t, &s, &hi).unwrap().n_mem() <= detect_memorized(&t, &s, &lo).unwrap().n_mem());
            prop_assert!(count_copies(&t, &s, &hi).unwrap().n_copies() <= count_copies(&t, &s, &lo).unwrap().n_copies());
        }
    }
}

//! Human-readable summary of an audit plus optional quality metrics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use memaudit_core::corpus::read_image_set;
use memaudit_core::detection::{AuditReport, AuditTarget, MemorizationCurve};
use memaudit_core::labels::read_labels;
use memaudit_core::metrics::{
    confusion, diversity_msssim, frechet_distance, gaussian_summary, ConfusionReport, PairKey, RocCurve, RocPoint,
};
use memaudit_core::Role;
use serde::Serialize;
use serde_json::json;

use super::{ensure_parent, read_json, read_set, with_suffix, write_json, Outcome};
use crate::args::ReportArgs;
use crate::config::ConfigFile;
use crate::error::{CliError, CliResult};
use crate::manifest::RunRecorder;

#[derive(Clone, Debug, Serialize)]
pub struct AuditSummary {
    pub target: AuditTarget,
    pub tau: f32,
    pub percentile_u: Option<f64>,
    pub n_train: usize,
    pub n_synth: usize,
    pub n_mem: usize,
    pub pct_mem: f64,
    pub n_copies: usize,
    pub pct_copies: f64,
}

impl From<&AuditReport> for AuditSummary {
    fn from(r: &AuditReport) -> Self {
        AuditSummary {
            target: r.target,
            tau: r.tau,
            percentile_u: r.percentile_u,
            n_train: r.n_train,
            n_synth: r.n_synth,
            n_mem: r.n_mem,
            pct_mem: r.pct_mem,
            n_copies: r.n_copies,
            pct_copies: r.pct_copies,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub audit: Option<AuditSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<MemorizationCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_marked: Option<Vec<RocPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ConfusionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fid: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms_ssim_diversity: Option<f64>,
}

fn pct_or_undefined(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{:.1}%", 100.0 * x))
}

/// Plain-text rendering; percentages carry one decimal.
pub fn render_summary(s: &Summary) -> String {
    let mut out = String::new();
    if let Some(a) = &s.audit {
        let target = match a.target {
            AuditTarget::Train => "training",
            AuditTarget::Holdout => "holdout",
        };
        let how = a.percentile_u.map_or_else(|| "fixed".to_string(), |u| format!("percentile {u}"));
        let _ = writeln!(out, "Memorization");
        let _ = writeln!(out, "  threshold tau      {:.4} ({how})", a.tau);
        let _ = writeln!(
            out,
            "  memorized          {} of {} {target} samples ({:.1}%)",
            a.n_mem, a.n_train, a.pct_mem
        );
        let _ = writeln!(
            out,
            "  synthetic copies   {} of {} synthetic samples ({:.1}%)",
            a.n_copies, a.n_synth, a.pct_copies
        );
    }
    if let Some(c) = &s.curve {
        let _ = writeln!(out, "Memorization by checkpoint (tau {:.4})", c.tau);
        for p in &c.points {
            let _ = writeln!(out, "  {:<18} n_mem {:>6} ({:.1}%)  n_copies {:>6}", p.checkpoint, p.n_mem, p.pct_mem, p.n_copies);
        }
    }
    if let Some(points) = &s.roc_marked {
        let _ = writeln!(out, "ROC at marked percentiles");
        for p in points {
            let _ = writeln!(out, "  u {:>4}  tau {:.4}  FPR {:.3}  TPR {:.3}", p.percentile_u, p.tau, p.fpr, p.tpr);
        }
    }
    if let Some(v) = &s.validation {
        let c = v.counts;
        let _ = writeln!(out, "Validation against labels");
        let _ = writeln!(out, "  sensitivity        {}", pct_or_undefined(v.sensitivity));
        let _ = writeln!(out, "  specificity        {}", pct_or_undefined(v.specificity));
        let _ = writeln!(out, "  tp {} fp {} tn {} fn {}", c.tp, c.fp, c.tn, c.fn_);
    }
    if s.fid.is_some() || s.ms_ssim_diversity.is_some() {
        let _ = writeln!(out, "Quality and diversity");
        if let Some(f) = s.fid {
            let _ = writeln!(out, "  FID                {f:.4}");
        }
        if let Some(m) = s.ms_ssim_diversity {
            let _ = writeln!(out, "  MS-SSIM diversity  {m:.4}");
        }
    }
    out
}

pub fn report(a: ReportArgs, cfg: &ConfigFile, rec: &mut RunRecorder) -> CliResult<Outcome> {
    let out: PathBuf = cfg.require(a.out, "out")?;
    let audit_path: Option<PathBuf> = cfg.pick(a.audit, "audit")?;
    let curve_path: Option<PathBuf> = cfg.pick(a.curve, "curve")?;
    let roc_path: Option<PathBuf> = cfg.pick(a.roc, "roc")?;
    let labels_path: Option<PathBuf> = cfg.pick(a.labels, "labels")?;
    let real_path: Option<PathBuf> = cfg.pick(a.real_features, "real_features")?;
    let synth_feat_path: Option<PathBuf> = cfg.pick(a.synth_features, "synth_features")?;
    let images_path: Option<PathBuf> = cfg.pick(a.synth_images, "synth_images")?;
    let seed = cfg.pick_or(a.seed, "seed", 0u64)?;

    let mut summary = Summary::default();
    let audit: Option<AuditReport> = audit_path.as_ref().map(|p| read_json(p, rec)).transpose()?;
    summary.audit = audit.as_ref().map(AuditSummary::from);
    summary.curve = curve_path.as_ref().map(|p| read_json(p, rec)).transpose()?;
    summary.roc_marked = roc_path
        .as_ref()
        .map(|p| read_json::<RocCurve>(p, rec).map(|c| c.marked()))
        .transpose()?;
    if let Some(p) = &labels_path {
        let report = audit
            .as_ref()
            .ok_or_else(|| CliError::config("--labels needs --audit for the detector's decisions"))?;
        rec.input(p);
        let labels = read_labels(p)?;
        let tau = report.threshold();
        let mut predictions: HashMap<PairKey, bool> = HashMap::new();
        for l in &labels {
            if let Some(rho) = report.pair_rho(&l.train_id, &l.synth_id) {
                predictions.insert((l.train_id.clone(), l.synth_id.clone()), tau.admits(rho));
            }
        }
        summary.validation = Some(confusion(&labels, &predictions)?);
    }
    match (&real_path, &synth_feat_path) {
        (Some(r), Some(s)) => {
            let real = gaussian_summary(&read_set(r, Role::Train, rec)?)?;
            let synth = gaussian_summary(&read_set(s, Role::Synth, rec)?)?;
            summary.fid = Some(frechet_distance(&real, &synth)?);
        }
        (None, None) => {}
        _ => return Err(CliError::config("FID needs both --real-features and --synth-features")),
    }
    if let Some(dir) = &images_path {
        rec.input(dir);
        let set = read_image_set(dir, Role::Synth)?;
        summary.ms_ssim_diversity = Some(diversity_msssim(&set.images, seed, 5)?);
    }
    if summary.audit.is_none() && summary.curve.is_none() && summary.fid.is_none() && summary.ms_ssim_diversity.is_none() {
        return Err(CliError::config("report needs at least one of --audit, --curve, FID features or --synth-images"));
    }

    let json_path = with_suffix(&out, "json");
    let txt_path = with_suffix(&out, "txt");
    write_json(&json_path, &summary, rec)?;
    let text = render_summary(&summary);
    ensure_parent(&txt_path)?;
    std::fs::write(&txt_path, &text)?;
    rec.output(&txt_path);
    print!("{text}");
    Ok(Outcome {
        config: json!({
            "audit": audit_path, "curve": curve_path, "roc": roc_path, "labels": labels_path,
            "real_features": real_path, "synth_features": synth_feat_path, "synth_images": images_path,
            "seed": seed, "out": out,
        }),
        primary: json_path,
    })
}

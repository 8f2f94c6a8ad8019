//! Audit, memorization curve and ROC.

use std::collections::HashMap;
use std::path::PathBuf;

use memaudit_core::detection::{
    audit_with_threshold, calibrate_threshold, memorization_curve, null_audit, Threshold, DEFAULT_PERCENTILE,
};
use memaudit_core::labels::read_labels;
use memaudit_core::metrics::{default_u_grid, roc as roc_curve, PairKey};
use memaudit_core::similarity::pearson;
use memaudit_core::Role;
use serde_json::json;

use super::{ensure_parent, read_set, with_suffix, write_json, Outcome};
use crate::args::{AuditArgs, CurveArgs, RocArgs};
use crate::config::ConfigFile;
use crate::error::{CliError, CliResult};
use crate::manifest::RunRecorder;

pub fn audit(a: AuditArgs, cfg: &ConfigFile, rec: &mut RunRecorder) -> CliResult<Outcome> {
    let train_path: PathBuf = cfg.require(a.train, "train")?;
    let synth_path: PathBuf = cfg.require(a.synth, "synth")?;
    let out: PathBuf = cfg.require(a.out, "out")?;
    let fixed: Option<f32> = cfg.pick(a.tau, "tau")?;
    let u = cfg.pick_or(a.percentile, "percentile", DEFAULT_PERCENTILE)?;
    let val_path: Option<PathBuf> = cfg.pick(a.val, "val")?;
    let holdout_path: Option<PathBuf> = cfg.pick(a.holdout, "holdout")?;

    let train = read_set(&train_path, Role::Train, rec)?;
    let synth = read_set(&synth_path, Role::Synth, rec)?;
    let (tau, val_digest) = match (fixed, &val_path) {
        (Some(t), _) => {
            if !t.is_finite() {
                return Err(CliError::config("--tau must be finite"));
            }
            (Threshold::fixed(t), None)
        }
        (None, Some(p)) => {
            let val = read_set(p, Role::Val, rec)?;
            (calibrate_threshold(&train, &val, u)?, Some(val.digest()))
        }
        (None, None) => return Err(CliError::config("audit needs --val to calibrate or a fixed --tau")),
    };
    let report = match &holdout_path {
        Some(p) => {
            let holdout = read_set(p, Role::Train, rec)?;
            null_audit(&holdout, &synth, &tau)?
        }
        None => audit_with_threshold(&train, &synth, &tau, val_digest)?,
    };
    log::info!(
        "tau {:.4}: {} of {} memorized ({:.1}%), {} of {} synthetic copies ({:.1}%)",
        report.tau,
        report.n_mem,
        report.n_train,
        report.pct_mem,
        report.n_copies,
        report.n_synth,
        report.pct_copies
    );
    write_json(&out, &report, rec)?;
    Ok(Outcome {
        config: json!({
            "train": train_path, "val": val_path, "synth": synth_path, "holdout": holdout_path,
            "percentile": if fixed.is_some() { None } else { Some(u) }, "tau": fixed, "out": out,
        }),
        primary: out,
    })
}

fn checkpoint(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(spec);
            let label = p.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
            (label, p)
        }
    }
}

pub fn curve(a: CurveArgs, cfg: &ConfigFile, rec: &mut RunRecorder) -> CliResult<Outcome> {
    let train_path: PathBuf = cfg.require(a.train, "train")?;
    let val_path: PathBuf = cfg.require(a.val, "val")?;
    let out: PathBuf = cfg.require(a.out, "out")?;
    let u = cfg.pick_or(a.percentile, "percentile", DEFAULT_PERCENTILE)?;
    let specs = if a.synth.is_empty() { cfg.get::<Vec<String>>("synth")?.unwrap_or_default() } else { a.synth };
    if specs.is_empty() {
        return Err(CliError::config("curve needs at least one --synth checkpoint"));
    }
    let train = read_set(&train_path, Role::Train, rec)?;
    let val = read_set(&val_path, Role::Val, rec)?;
    let mut checkpoints = Vec::new();
    for spec in &specs {
        let (label, path) = checkpoint(spec);
        checkpoints.push((label, read_set(&path, Role::Synth, rec)?));
    }
    let curve = memorization_curve(&train, &checkpoints, u, &val)?;
    write_json(&out, &curve, rec)?;
    Ok(Outcome {
        config: json!({ "train": train_path, "val": val_path, "synth": specs, "percentile": u, "out": out }),
        primary: out,
    })
}

pub fn roc(a: RocArgs, cfg: &ConfigFile, rec: &mut RunRecorder) -> CliResult<Outcome> {
    let train_path: PathBuf = cfg.require(a.train, "train")?;
    let val_path: PathBuf = cfg.require(a.val, "val")?;
    let synth_path: PathBuf = cfg.require(a.synth, "synth")?;
    let labels_path: PathBuf = cfg.require(a.labels, "labels")?;
    let out: PathBuf = cfg.require(a.out, "out")?;
    let grid = cfg.pick(a.percentiles, "percentiles")?.unwrap_or_else(default_u_grid);

    let train = read_set(&train_path, Role::Train, rec)?;
    let val = read_set(&val_path, Role::Val, rec)?;
    let synth = read_set(&synth_path, Role::Synth, rec)?;
    rec.input(&labels_path);
    let labels = read_labels(&labels_path)?;
    let calibration = calibrate_threshold(&train, &val, DEFAULT_PERCENTILE)?.calibration;

    let mut rho: HashMap<PairKey, f32> = HashMap::new();
    for l in &labels {
        let key = (l.train_id.clone(), l.synth_id.clone());
        if rho.contains_key(&key) {
            continue;
        }
        let t = train
            .index_of(&l.train_id)
            .ok_or_else(|| CliError::config(format!("labeled train id {:?} not in {}", l.train_id, train_path.display())))?;
        let s = synth
            .index_of(&l.synth_id)
            .ok_or_else(|| CliError::config(format!("labeled synth id {:?} not in {}", l.synth_id, synth_path.display())))?;
        rho.insert(key, pearson(train.row(t), synth.row(s))?);
    }
    let curve = roc_curve(&labels, &rho, &grid, &calibration)?;
    let json_path = with_suffix(&out, "json");
    let csv_path = with_suffix(&out, "csv");
    write_json(&json_path, &curve, rec)?;
    ensure_parent(&csv_path)?;
    std::fs::write(&csv_path, curve.to_csv())?;
    rec.output(&csv_path);
    Ok(Outcome {
        config: json!({
            "train": train_path, "val": val_path, "synth": synth_path, "labels": labels_path,
            "percentiles": grid, "out": out,
        }),
        primary: json_path,
    })
}

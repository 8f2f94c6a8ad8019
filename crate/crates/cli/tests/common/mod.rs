#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memaudit_core::corpus::read_manifest;
use memaudit_core::detection::AuditReport;
use memaudit_core::{BinaryLabel, LabelRecord, LabelStore};

pub fn memaudit(dir: &Path, args: &[&str]) -> Output {
    memaudit_env(dir, args, &[])
}

pub fn memaudit_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_memaudit"));
    cmd.current_dir(dir).args(args).env_remove("MEMAUDIT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn memaudit")
}

/// Run and require exit 0; returns stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    ok_env(dir, args, &[])
}

pub fn ok_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> String {
    let out = memaudit_env(dir, args, env);
    assert!(
        out.status.success(),
        "memaudit {args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub struct PipelineOpts<'a> {
    pub seed: u64,
    pub val: usize,
    /// `None` keeps the encoder's default epoch count.
    pub epochs: Option<usize>,
    pub env: &'a [(&'a str, &'a str)],
}

impl Default for PipelineOpts<'_> {
    fn default() -> Self {
        PipelineOpts { seed: 0, val: 200, epochs: Some(5), env: &[] }
    }
}

/// Corpus → encoder → embeddings → audit → labels → roc → curve → report.
/// Returns the report's stdout.
pub fn run_pipeline(dir: &Path, o: &PipelineOpts) -> String {
    let seed = o.seed.to_string();
    let val = o.val.to_string();
    let run = |args: &[&str]| ok_env(dir, args, o.env);
    run(&["synth-corpus", "--out", "corpus", "--dims", "32x32", "--seed", &seed, "--val", &val]);
    let epochs = o.epochs.map(|e| e.to_string());
    let mut train = vec!["train-encoder", "--images", "corpus", "--out", "enc.menc", "--seed", &seed];
    train.extend(["--loss-out", "loss.json"]);
    if let Some(e) = &epochs {
        train.extend(["--epochs", e]);
    }
    run(&train);
    for role in ["train", "val", "synth"] {
        let out = format!("emb/{role}.memb");
        run(&["embed", "--model", "enc.menc", "--images", "corpus", "--role", role, "--out", &out]);
    }
    let sets = ["--train", "emb/train.memb", "--val", "emb/val.memb"];
    let mut audit = vec!["audit"];
    audit.extend(sets);
    audit.extend(["--synth", "emb/synth.memb", "--out", "audit.json"]);
    run(&audit);
    write_truth_labels(dir, "audit.json", "labels.jsonl");
    let mut roc = vec!["roc"];
    roc.extend(sets);
    roc.extend(["--synth", "emb/synth.memb", "--labels", "labels.jsonl", "--out", "roc"]);
    run(&roc);
    let mut curve = vec!["curve"];
    curve.extend(sets);
    curve.extend(["--synth", "early=emb/val.memb", "--synth", "late=emb/synth.memb", "--out", "curve.json"]);
    run(&curve);
    run(&[
        "report", "--audit", "audit.json", "--curve", "curve.json", "--roc", "roc.json", "--labels",
        "labels.jsonl", "--real-features", "emb/train.memb", "--synth-features", "emb/synth.memb",
        "--synth-images", "corpus", "--out", "summary",
    ])
}

/// Label every candidate pair from the planted ground truth, as a careful
/// reviewer would.
pub fn write_truth_labels(dir: &Path, audit: &str, labels: &str) {
    let manifest = read_manifest(dir.join("corpus")).unwrap();
    let report: AuditReport = serde_json::from_str(&std::fs::read_to_string(dir.join(audit)).unwrap()).unwrap();
    let store = LabelStore::open(dir.join(labels)).unwrap();
    for (k, c) in report.candidates.iter().enumerate() {
        let copy = manifest.truth.get(&c.synth_id).and_then(|p| p.source()) == Some(c.train_id.as_str());
        store
            .append(&LabelRecord {
                train_id: c.train_id.clone(),
                synth_id: c.synth_id.clone(),
                binary_label: Some(if copy { BinaryLabel::Copy } else { BinaryLabel::Novel }),
                grade: None,
                labeler: "oracle".into(),
                timestamp: 1_700_000_000 + k as u64,
            })
            .unwrap();
    }
}

/// Every file under `root`, relative path → bytes, skipping run manifests.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.file_name().unwrap().to_string_lossy().ends_with("run.json") {
                files.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

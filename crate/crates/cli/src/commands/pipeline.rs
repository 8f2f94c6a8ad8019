//! Corpus synthesis, encoder training and embedding.

use memaudit_core::contrastive::{embed_as, read_model, train_encoder as fit, write_model, AugmentedViews, TrainConfig};
use memaudit_core::corpus::{
    generate_corpus, read_image_set, read_manifest, write_corpus, AugmentationSpec, PlantSpec, MANIFEST_FILE,
};
use memaudit_core::{write_vector_set, Role};
use serde_json::json;

use super::{ensure_parent, parse_role, to_value, write_json, Outcome};
use crate::args::{EmbedArgs, SynthCorpusArgs, TrainEncoderArgs};
use crate::config::{ConfigFile, Dims};
use crate::error::{CliError, CliResult};
use crate::manifest::RunRecorder;

pub fn synth_corpus(a: SynthCorpusArgs, cfg: &ConfigFile, rec: &mut RunRecorder) -> CliResult<Outcome> {
    let d = PlantSpec::default();
    let dims: Dims = cfg
        .pick(a.dims, "dims")?
        .ok_or_else(|| CliError::config("missing required --dims (e.g. --dims 32x32)"))?;
    let out = cfg.require(a.out, "out")?;
    let plant = PlantSpec {
        n_train: cfg.pick_or(a.train, "train", d.n_train)?,
        n_val: cfg.pick_or(a.val, "val", d.n_val)?,
        n_novel_synth: cfg.pick_or(a.novel, "novel", d.n_novel_synth)?,
        n_exact_copies: cfg.pick_or(a.exact, "exact", d.n_exact_copies)?,
        n_augmented_copies: cfg.pick_or(a.aug, "aug", d.n_augmented_copies)?,
        dims: dims.0,
        seed: cfg.pick_or(a.seed, "seed", d.seed)?,
    };
    let mut aug = AugmentationSpec { seed: plant.seed, ..AugmentationSpec::default() };
    if let Some(p) = cfg.pick(a.flip_prob, "flip_prob")? {
        aug.flip_prob = vec![p];
    }
    if let Some(r) = cfg.pick::<f64>(a.rotation_deg, "rotation_deg")? {
        aug.rotation_deg = (-r.abs(), r.abs());
    }
    let corpus = generate_corpus(&plant, &aug)?;
    std::fs::create_dir_all(&out)?;
    write_corpus(&out, &corpus, &plant, &aug)?;
    for role in [Role::Train, Role::Val, Role::Synth] {
        rec.output(&out.join(role.as_str()));
    }
    rec.output(&out.join(MANIFEST_FILE));
    log::info!(
        "wrote {} train, {} val, {} synth images to {}",
        corpus.train.len(),
        corpus.val.len(),
        corpus.synth.len(),
        out.display()
    );
    Ok(Outcome {
        config: json!({ "plant": plant, "augmentation": aug, "out": out }),
        primary: out,
    })
}

fn default_grid(ndim: usize) -> Vec<usize> {
    vec![8; ndim]
}

pub fn train_encoder(a: TrainEncoderArgs, cfg: &ConfigFile, rec: &mut RunRecorder) -> CliResult<Outcome> {
    let images = cfg.require(a.images, "images")?;
    let out = cfg.require(a.out, "out")?;
    let role = parse_role(&cfg.pick_or(a.role, "role", "train".to_string())?)?;
    rec.input(&images);
    let set = read_image_set(&images, role)?;
    let first = set.images.first().ok_or_else(|| CliError::config("no training images"))?;
    let grid = cfg.pick::<Dims>(a.grid, "grid")?.map(|g| g.0).unwrap_or_else(|| default_grid(first.ndim()));
    let d = TrainConfig::default();
    let train_cfg = TrainConfig {
        batch_k: cfg.pick_or(a.batch_k, "batch_k", d.batch_k)?,
        epochs: cfg.pick_or(a.epochs, "epochs", d.epochs)?,
        learning_rate: cfg.pick_or(a.learning_rate, "learning_rate", d.learning_rate)?,
        momentum: cfg.pick_or(a.momentum, "momentum", d.momentum)?,
        tau_temp: cfg.pick_or(a.tau_temp, "tau_temp", d.tau_temp)?,
        seed: cfg.pick_or(a.seed, "seed", d.seed)?,
        hidden_dims: cfg.pick::<Dims>(a.hidden, "hidden")?.map(|h| h.0).unwrap_or(d.hidden_dims),
        embedding_dim: cfg.pick_or(a.embedding_dim, "embedding_dim", d.embedding_dim)?,
    };
    // Views follow the corpus augmentations when the images come with a manifest.
    let aug = match cfg.get::<AugmentationSpec>("augmentation")? {
        Some(spec) => spec,
        None if images.join(MANIFEST_FILE).is_file() => read_manifest(&images)?.augmentation,
        None => AugmentationSpec::default(),
    };
    let features = set.pooled(&grid)?;
    let views = AugmentedViews::new(&set.images, &aug, &grid)?;
    let trained = fit(&features, &train_cfg, &views)?;
    let mut model = trained.model;
    model.pool_grid = grid.clone();
    ensure_parent(&out)?;
    write_model(&model, &out)?;
    rec.output(&out);
    if let Some(loss_out) = cfg.pick(a.loss_out, "loss_out")? {
        write_json(&loss_out, &trained.loss_trace, rec)?;
    }
    if let (Some(first), Some(last)) = (trained.loss_trace.first(), trained.loss_trace.last()) {
        log::info!("loss {first:.4} -> {last:.4} over {} epochs", trained.loss_trace.len());
    }
    Ok(Outcome {
        config: json!({
            "train": to_value(&train_cfg),
            "grid": grid,
            "augmentation": aug,
            "images": images,
            "role": role,
            "out": out,
        }),
        primary: out,
    })
}

pub fn embed(a: EmbedArgs, cfg: &ConfigFile, rec: &mut RunRecorder) -> CliResult<Outcome> {
    let images = cfg.require(a.images, "images")?;
    let out = cfg.require(a.out, "out")?;
    let role = parse_role(&cfg.require(a.role, "role")?)?;
    let model_path = cfg.pick(a.model, "model")?;
    let model = match &model_path {
        Some(p) => {
            rec.input(p);
            Some(read_model(p)?)
        }
        None => None,
    };
    rec.input(&images);
    let set = read_image_set(&images, role)?;
    let grid = match cfg.pick::<Dims>(a.grid, "grid")? {
        Some(g) => g.0,
        None => match &model {
            Some(m) if !m.pool_grid.is_empty() => m.pool_grid.clone(),
            _ => default_grid(set.images.first().map_or(2, |i| i.ndim())),
        },
    };
    let features = set.pooled(&grid)?;
    let vectors = match &model {
        Some(m) => embed_as(m, &features, role)?,
        None => features,
    };
    ensure_parent(&out)?;
    write_vector_set(&vectors, &out)?;
    rec.output(&out);
    Ok(Outcome {
        config: json!({ "model": model_path, "images": images, "role": role, "grid": grid, "out": out }),
        primary: out,
    })
}

//! Mini-batch SGD with momentum on the NT-Xent objective, plus a
//! finite-difference gradient check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::nt_xent_grad;
use super::model::{EncoderModel, Gradients, Network};
use super::pool::pool_features;
use crate::corpus::{augment, AugmentationSpec};
use crate::error::{Error, Result};
use crate::rng::SeedRng;
use crate::tensor::ImageTensor;
use crate::vectors::VectorSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Pairs per batch; each batch holds `2 * batch_k` embeddings.
    pub batch_k: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub tau_temp: f64,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    pub embedding_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_k: 20,
            epochs: 1000,
            learning_rate: 0.02,
            momentum: 0.9,
            tau_temp: 0.1,
            seed: 0,
            hidden_dims: vec![256, 128],
            embedding_dim: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_k < 2 {
            return Err(Error::invalid("batch_k must be at least 2"));
        }
        if !(self.learning_rate > 0.0) || !(self.tau_temp > 0.0) {
            return Err(Error::invalid("learning_rate and tau_temp must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        if self.embedding_dim < 2 || self.hidden_dims.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive, embedding_dim >= 2"));
        }
        Ok(())
    }

    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(self.embedding_dim);
        dims
    }
}

/// Produces the augmented view `y_i'` of training sample `index`.
pub trait ViewSampler: Sync {
    fn view(&self, index: usize, anchor: &[f32], rng: &mut SeedRng) -> Vec<f32>;
}

impl<F> ViewSampler for F
where
    F: Fn(usize, &[f32], &mut SeedRng) -> Vec<f32> + Sync,
{
    fn view(&self, index: usize, anchor: &[f32], rng: &mut SeedRng) -> Vec<f32> {
        self(index, anchor, rng)
    }
}

/// Additive Gaussian jitter in feature space.
#[derive(Clone, Copy, Debug)]
pub struct Jitter(pub f64);

impl ViewSampler for Jitter {
    fn view(&self, _index: usize, anchor: &[f32], rng: &mut SeedRng) -> Vec<f32> {
        anchor
            .iter()
            .map(|&v| (v as f64 + self.0 * rng.normal()) as f32)
            .collect()
    }
}

/// Views made by augmenting the source image and pooling it again.
#[derive(Clone, Copy, Debug)]
pub struct AugmentedViews<'a> {
    images: &'a [ImageTensor],
    spec: &'a AugmentationSpec,
    grid: &'a [usize],
}

impl<'a> AugmentedViews<'a> {
    pub fn new(images: &'a [ImageTensor], spec: &'a AugmentationSpec, grid: &'a [usize]) -> Result<Self> {
        spec.validate()?;
        for img in images {
            pool_features(img, grid)?;
        }
        Ok(AugmentedViews { images, spec, grid })
    }
}

impl ViewSampler for AugmentedViews<'_> {
    fn view(&self, index: usize, _anchor: &[f32], rng: &mut SeedRng) -> Vec<f32> {
        let img = augment(&self.images[index], self.spec, rng.next_u64())
            .expect("spec validated in constructor")
            .renormalized();
        pool_features(&img, self.grid).expect("grid checked in constructor")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedEncoder {
    pub model: EncoderModel,
    /// Mean batch loss per epoch.
    pub loss_trace: Vec<f64>,
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Mean NT-Xent loss of a paired batch and its parameter gradient.
fn batch_gradient(net: &Network, batch: &[Vec<f64>], tau_temp: f64) -> Result<(f64, Gradients)> {
    let traces: Vec<_> = batch.iter().map(|x| net.forward(x)).collect();
    let emb: Vec<Vec<f64>> = traces.iter().map(|t| t.output().to_vec()).collect();
    let (loss, d_emb) = nt_xent_grad(&emb, tau_temp)?;
    let mut grads = net.zero_grads();
    for (t, d) in traces.iter().zip(&d_emb) {
        net.backward(t, d, &mut grads);
    }
    Ok((loss, grads))
}

fn batch_loss(net: &Network, batch: &[Vec<f64>], tau_temp: f64) -> Result<f64> {
    let emb: Vec<Vec<f64>> = batch.iter().map(|x| net.forward(x).output().to_vec()).collect();
    super::loss::nt_xent_f64(&emb, tau_temp)
}

const SHUFFLE_KEY: u64 = 0x5348_5546;
const VIEW_KEY: u64 = 0x5649_4557;

/// Train an encoder on `features` so that each sample attracts its augmented
/// view and repels every other member of its batch.
pub fn train_encoder(
    features: &VectorSet,
    cfg: &TrainConfig,
    views: &dyn ViewSampler,
) -> Result<TrainedEncoder> {
    cfg.validate()?;
    let n = features.len();
    let k = cfg.batch_k;
    if n < 2 * k {
        return Err(Error::invalid(format!(
            "{n} samples cannot fill a batch of {k} pairs (need at least {})",
            2 * k
        )));
    }
    let init = EncoderModel::init(&cfg.layer_dims(features.dim()), cfg.tau_temp, cfg.seed)?;
    if cfg.epochs == 0 {
        return Ok(TrainedEncoder {
            model: init,
            loss_trace: Vec::new(),
        });
    }
    let mut net = init.to_shadow();
    let mut velocity = vec![0.0f64; init.n_params()];
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let steps = n / k;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        SeedRng::derived(cfg.seed, &[SHUFFLE_KEY, epoch as u64]).shuffle(&mut order);
        let view_rows: Vec<Vec<f32>> = order
            .par_iter()
            .map(|&i| {
                let mut rng = SeedRng::derived(cfg.seed, &[VIEW_KEY, epoch as u64, i as u64]);
                views.view(i, features.row(i), &mut rng)
            })
            .collect();
        if view_rows.iter().any(|v| v.len() != features.dim()) {
            return Err(Error::dims("view sampler changed the feature length"));
        }

        let mut epoch_loss = 0.0;
        for step in 0..steps {
            let mut batch = Vec::with_capacity(2 * k);
            for slot in step * k..(step + 1) * k {
                batch.push(to_f64(features.row(order[slot])));
                batch.push(to_f64(&view_rows[slot]));
            }
            let (loss, grads) = batch_gradient(&net, &batch, cfg.tau_temp)?;
            if !loss.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite loss at epoch {epoch}, step {step}"
                )));
            }
            epoch_loss += loss;
            for ((v, p), g) in velocity.iter_mut().zip(net.params_mut()).zip(grads.flat()) {
                *v = cfg.momentum * *v + g;
                *p -= cfg.learning_rate * *v;
            }
        }
        let mean = epoch_loss / steps as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        loss_trace.push(mean);
    }
    Ok(TrainedEncoder {
        model: EncoderModel::from_shadow(&net, cfg.tau_temp, cfg.seed),
        loss_trace,
    })
}

/// Finite-difference step used by [`grad_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-3;

/// Denominator floor so that two vanishing gradients compare as equal.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Analytic parameter gradient of the mean NT-Xent loss for a paired batch,
/// flattened as weights (layer by layer, row-major) followed by biases.
pub fn analytic_gradient(model: &EncoderModel, batch: &[Vec<f32>], tau_temp: f64) -> Result<Vec<f64>> {
    let net = model.to_shadow();
    let batch: Vec<Vec<f64>> = batch.iter().map(|x| to_f64(x)).collect();
    Ok(batch_gradient(&net, &batch, tau_temp)?.1.flat())
}

/// Central-difference gradient in the same layout as [`analytic_gradient`].
pub fn numeric_gradient(model: &EncoderModel, batch: &[Vec<f32>], tau_temp: f64) -> Result<Vec<f64>> {
    let base = model.to_shadow();
    let batch: Vec<Vec<f64>> = batch.iter().map(|x| to_f64(x)).collect();
    let n = model.n_params();
    (0..n)
        .map(|p| {
            let eval = |delta: f64| {
                let mut net = base.clone();
                *net.params_mut().nth(p).unwrap() += delta;
                batch_loss(&net, &batch, tau_temp)
            };
            Ok((eval(GRAD_CHECK_STEP)? - eval(-GRAD_CHECK_STEP)?) / (2.0 * GRAD_CHECK_STEP))
        })
        .collect()
}

/// Relative error of the whole gradient, `|a - n| / max(|a|, |n|, floor)` in
/// the Euclidean norm. Per-coordinate ratios are dominated by the O(h^2)
/// truncation of central differences on small coordinates.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    diff / scale.max(GRAD_CHECK_FLOOR)
}

/// Compare backpropagated gradients with central differences on the `f64` shadow.
pub fn grad_check(model: &EncoderModel, batch: &[Vec<f32>], tau_temp: f64) -> Result<f64> {
    let analytic = analytic_gradient(model, batch, tau_temp)?;
    grad_check_against(model, batch, tau_temp, &analytic)
}

/// Like [`grad_check`] but with a caller-supplied analytic gradient.
pub fn grad_check_against(
    model: &EncoderModel,
    batch: &[Vec<f32>],
    tau_temp: f64,
    analytic: &[f64],
) -> Result<f64> {
    if analytic.len() != model.n_params() {
        return Err(Error::dims("gradient length differs from parameter count"));
    }
    let numeric = numeric_gradient(model, batch, tau_temp)?;
    Ok(relative_error(analytic, &numeric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrastive::loss::cosine_sim;
    use crate::contrastive::model::embed_set;
    use crate::vectors::Role;

    fn small_batch(seed: u64, k: usize, dim: usize) -> Vec<Vec<f32>> {
        let mut rng = SeedRng::new(seed);
        (0..2 * k)
            .map(|_| (0..dim).map(|_| rng.normal() as f32).collect())
            .collect()
    }

    #[test]
    fn grad_check_small() {
        for seed in 0..5 {
            let m = EncoderModel::init(&[6, 5, 4, 3], 0.5, seed).unwrap();
            let err = grad_check(&m, &small_batch(seed + 100, 3, 6), 0.5).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn sign_flip_mutant_is_caught() {
        let m = EncoderModel::init(&[6, 5, 4, 3], 0.5, 3).unwrap();
        let batch = small_batch(2, 3, 6);
        let mut g = analytic_gradient(&m, &batch, 0.5).unwrap();
        g.iter_mut().for_each(|v| *v = -*v);
        assert!(grad_check_against(&m, &batch, 0.5, &g).unwrap() > 0.1);
    }

    #[test]
    fn symmetric_degenerate_batch_has_zero_gradient() {
        let m = EncoderModel::init(&[4, 5, 3], 0.5, 8).unwrap();
        let batch = vec![vec![0.3f32, -0.2, 0.9, 0.1]; 4];
        let a = analytic_gradient(&m, &batch, 0.5).unwrap();
        let n = numeric_gradient(&m, &batch, 0.5).unwrap();
        assert!(a.iter().chain(&n).all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn zero_epochs_returns_init() {
        let feats = VectorSet::new(Role::Train, (0..8).map(|i| i.to_string()).collect(), 3, (0..24).map(|v| v as f32).collect()).unwrap();
        let cfg = TrainConfig { epochs: 0, batch_k: 2, hidden_dims: vec![4], embedding_dim: 2, seed: 5, ..Default::default() };
        let out = train_encoder(&feats, &cfg, &Jitter(0.1)).unwrap();
        assert_eq!(out.model, EncoderModel::init(&[3, 4, 2], cfg.tau_temp, 5).unwrap());
        let too_big = TrainConfig { batch_k: 5, ..cfg };
        assert!(train_encoder(&feats, &too_big, &Jitter(0.1)).is_err());
    }

    fn two_clusters(seed: u64) -> VectorSet {
        let mut rng = SeedRng::new(seed);
        let centers = [[2.0, 0.0, 1.0, -1.0, 0.5, 0.0], [-1.0, 2.0, -1.0, 0.5, 0.0, 1.5]];
        let mut data = Vec::new();
        for i in 0..40 {
            for c in centers[i % 2] {
                data.push((c + 0.4 * rng.normal()) as f32);
            }
        }
        VectorSet::new(Role::Train, (0..40).map(|i| format!("p{i}")).collect(), 6, data).unwrap()
    }

    fn cluster_margin(emb: &VectorSet) -> f64 {
        let (mut within, mut nw, mut cross, mut nc) = (0.0, 0, 0.0, 0);
        for i in 0..emb.len() {
            for j in i + 1..emb.len() {
                let c = cosine_sim(emb.row(i), emb.row(j)).unwrap() as f64;
                if i % 2 == j % 2 {
                    within += c;
                    nw += 1;
                } else {
                    cross += c;
                    nc += 1;
                }
            }
        }
        within / nw as f64 - cross / nc as f64
    }

    #[test]
    fn separates_two_clusters() {
        let feats = two_clusters(21);
        let cfg = TrainConfig {
            batch_k: 5,
            epochs: 200,
            hidden_dims: vec![16, 16],
            embedding_dim: 2,
            seed: 4,
            learning_rate: 0.05,
            tau_temp: 0.5,
            ..Default::default()
        };
        let out = train_encoder(&feats, &cfg, &Jitter(0.2)).unwrap();
        let margin = cluster_margin(&embed_set(&out.model, &feats).unwrap());
        assert!(margin >= 0.2, "margin {margin}");
        assert!(out.loss_trace.last().unwrap() <= out.loss_trace.first().unwrap());
        let again = train_encoder(&feats, &cfg, &Jitter(0.2)).unwrap();
        assert_eq!(again, out);
    }
}

//! Procedural blob images and planted-copy corpora with known ground truth.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentationSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeedRng};
use crate::tensor::ImageTensor;
use crate::contrastive::pool_features;
use crate::vectors::{Role, VectorSet};

/// Smallest supported extent per axis.
pub const MIN_EXTENT: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_novel_synth: usize,
    pub n_exact_copies: usize,
    pub n_augmented_copies: usize,
    pub dims: Vec<usize>,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec {
            n_train: 100,
            n_val: 1000,
            n_novel_synth: 80,
            n_exact_copies: 10,
            n_augmented_copies: 10,
            dims: vec![32, 32],
            seed: 0,
        }
    }
}

impl PlantSpec {
    pub fn n_synth(&self) -> usize {
        self.n_novel_synth + self.n_exact_copies + self.n_augmented_copies
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dims.len()) {
            return Err(Error::invalid("image dims must have 2 or 3 axes"));
        }
        if self.dims.iter().any(|&d| d < MIN_EXTENT) {
            return Err(Error::invalid(format!(
                "every image axis must be at least {MIN_EXTENT}, got {:?}",
                self.dims
            )));
        }
        let copies = self.n_exact_copies + self.n_augmented_copies;
        if copies > 0 && self.n_train == 0 {
            return Err(Error::invalid("copies need a non-empty train set"));
        }
        if self.n_train == 0 || self.n_synth() == 0 {
            return Err(Error::invalid("train and synth sets must be non-empty"));
        }
        Ok(())
    }
}

/// Where a synthetic sample came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "source", rename_all = "snake_case")]
pub enum Provenance {
    Novel,
    ExactCopy(String),
    AugCopy(String),
}

impl Provenance {
    pub fn source(&self) -> Option<&str> {
        match self {
            Provenance::Novel => None,
            Provenance::ExactCopy(s) | Provenance::AugCopy(s) => Some(s),
        }
    }
}

/// Provenance per synthetic id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth(pub BTreeMap<String, Provenance>);

impl GroundTruth {
    pub fn get(&self, synth_id: &str) -> Option<&Provenance> {
        self.0.get(synth_id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, pred: impl Fn(&Provenance) -> bool) -> usize {
        self.0.values().filter(|p| pred(p)).count()
    }
}

/// Images with ids, in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSet {
    pub role: Role,
    pub ids: Vec<String>,
    pub images: Vec<ImageTensor>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageTensor> {
        self.ids.iter().position(|x| x == id).map(|i| &self.images[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ImageTensor)> {
        self.ids.iter().map(String::as_str).zip(&self.images)
    }

    /// Mean-pooled feature vectors, one row per image.
    pub fn pooled(&self, grid: &[usize]) -> Result<VectorSet> {
        let rows = self
            .images
            .par_iter()
            .map(|img| pool_features(img, grid))
            .collect::<Result<Vec<_>>>()?;
        VectorSet::from_rows(self.role, self.ids.clone(), &rows)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub train: ImageSet,
    pub val: ImageSet,
    pub synth: ImageSet,
    pub truth: GroundTruth,
}

pub fn sample_id(role: Role, index: usize) -> String {
    format!("{role}-{index:05}")
}

/// Stream keys keep the generator draws of different roles independent.
const TRAIN_KEY: u64 = 1;
const VAL_KEY: u64 = 2;
const NOVEL_KEY: u64 = 3;
const PLAN_KEY: u64 = 4;
const AUG_KEY: u64 = 5;

/// A smooth image: a superposition of 3 to 7 randomly placed, sized and
/// oriented ellipsoidal Gaussian blobs, min-max normalized.
pub fn blob_image(dims: &[usize], seed: u64) -> Result<ImageTensor> {
    if dims.iter().any(|&d| d < MIN_EXTENT) || !(2..=3).contains(&dims.len()) {
        return Err(Error::invalid(format!("dims {dims:?} too small for blob generation")));
    }
    let mut rng = SeedRng::new(seed);
    let nd = dims.len();
    let n_blobs = 3 + rng.below(5);
    struct Blob {
        center: Vec<f64>,
        inv_radius: Vec<f64>,
        angle: (f64, f64),
        amp: f64,
    }
    let blobs: Vec<Blob> = (0..n_blobs)
        .map(|_| {
            let center = dims
                .iter()
                .map(|&d| rng.uniform_in(0.15, 0.85) * (d - 1) as f64)
                .collect();
            let inv_radius = dims
                .iter()
                .map(|&d| 1.0 / (rng.uniform_in(0.05, 0.18) * d as f64))
                .collect();
            let angle = rng.uniform_in(0.0, std::f64::consts::PI).sin_cos();
            let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
            let amp = sign * rng.uniform_in(0.3, 1.0);
            Blob { center, inv_radius, angle, amp }
        })
        .collect();

    let n: usize = dims.iter().product();
    let mut values = vec![0f32; n];
    let (rows, cols) = (dims[nd - 2], dims[nd - 1]);
    for (flat, out) in values.iter_mut().enumerate() {
        let c = (flat % cols) as f64;
        let r = ((flat / cols) % rows) as f64;
        let z = if nd == 3 { (flat / (rows * cols)) as f64 } else { 0.0 };
        let mut acc = 0.0;
        for b in &blobs {
            let dr = r - b.center[nd - 2];
            let dc = c - b.center[nd - 1];
            // in-plane orientation; the depth axis stays aligned
            let (sin, cos) = b.angle;
            let pr = (cos * dr + sin * dc) * b.inv_radius[nd - 2];
            let pc = (-sin * dr + cos * dc) * b.inv_radius[nd - 1];
            let mut q = pr * pr + pc * pc;
            if nd == 3 {
                let dz = (z - b.center[0]) * b.inv_radius[0];
                q += dz * dz;
            }
            acc += b.amp * (-0.5 * q).exp();
        }
        *out = acc as f32;
    }
    ImageTensor::normalized(dims.to_vec(), values)
}

fn draw_set(role: Role, key: u64, count: usize, dims: &[usize], seed: u64) -> Result<ImageSet> {
    let images = (0..count)
        .into_par_iter()
        .map(|i| blob_image(dims, derive_seed(seed, &[key, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageSet {
        role,
        ids: (0..count).map(|i| sample_id(role, i)).collect(),
        images,
    })
}

/// Generate train, validation and synthetic images where the synthetic set
/// mixes novel draws, exact training duplicates and augmented duplicates.
///
/// Copy sources are distinct training samples while the train set lasts.
/// Synthetic ids are assigned after a seeded shuffle, so provenance cannot
/// be read off positions. All images are min-max normalized so that a
/// write/read cycle through MIMG leaves them unchanged.
pub fn generate_corpus(spec: &PlantSpec, aug: &AugmentationSpec) -> Result<Corpus> {
    spec.validate()?;
    aug.validate()?;
    let train = draw_set(Role::Train, TRAIN_KEY, spec.n_train, &spec.dims, spec.seed)?;
    let val = draw_set(Role::Val, VAL_KEY, spec.n_val, &spec.dims, spec.seed)?;

    let mut plan_rng = SeedRng::derived(spec.seed, &[PLAN_KEY]);
    let mut sources: Vec<usize> = (0..spec.n_train).collect();
    plan_rng.shuffle(&mut sources);
    let n_copies = spec.n_exact_copies + spec.n_augmented_copies;
    let source = |k: usize| sources[k % spec.n_train];

    enum Item {
        Novel(usize),
        Exact(usize),
        Aug(usize, usize),
    }
    let mut items: Vec<Item> = (0..spec.n_novel_synth).map(Item::Novel).collect();
    items.extend((0..spec.n_exact_copies).map(|k| Item::Exact(source(k))));
    items.extend((spec.n_exact_copies..n_copies).map(|k| Item::Aug(source(k), k)));
    plan_rng.shuffle(&mut items);

    let built = items
        .par_iter()
        .map(|item| -> Result<(ImageTensor, Provenance)> {
            Ok(match *item {
                Item::Novel(i) => (
                    blob_image(&spec.dims, derive_seed(spec.seed, &[NOVEL_KEY, i as u64]))?,
                    Provenance::Novel,
                ),
                Item::Exact(t) => (train.images[t].clone(), Provenance::ExactCopy(train.ids[t].clone())),
                Item::Aug(t, k) => {
                    let seed = derive_seed(aug.seed, &[spec.seed, AUG_KEY, k as u64]);
                    let img = augment(&train.images[t], aug, seed)?.renormalized();
                    (img, Provenance::AugCopy(train.ids[t].clone()))
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ids: Vec<String> = (0..built.len()).map(|i| sample_id(Role::Synth, i)).collect();
    let truth = GroundTruth(
        ids.iter()
            .cloned()
            .zip(built.iter().map(|(_, p)| p.clone()))
            .collect(),
    );
    let synth = ImageSet {
        role: Role::Synth,
        ids,
        images: built.into_iter().map(|(img, _)| img).collect(),
    };
    Ok(Corpus { train, val, synth, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::pearson;

    fn small(n_exact: usize, n_aug: usize, n_novel: usize) -> PlantSpec {
        PlantSpec {
            n_train: 12,
            n_val: 5,
            n_novel_synth: n_novel,
            n_exact_copies: n_exact,
            n_augmented_copies: n_aug,
            dims: vec![16, 16],
            seed: 42,
        }
    }

    #[test]
    fn no_copies_means_all_novel() {
        let c = generate_corpus(&small(0, 0, 9), &AugmentationSpec::default()).unwrap();
        assert_eq!(c.truth.len(), 9);
        assert_eq!(c.truth.count(|p| *p == Provenance::Novel), 9);
    }

    #[test]
    fn exact_only_is_permutation_of_train() {
        let c = generate_corpus(&small(12, 0, 0), &AugmentationSpec::default()).unwrap();
        let mut sources: Vec<&str> = c.truth.0.values().map(|p| p.source().unwrap()).collect();
        sources.sort();
        let train_ids: Vec<&str> = c.train.ids.iter().map(String::as_str).collect();
        assert_eq!(sources, train_ids);
        for (id, img) in c.synth.iter() {
            let src = c.truth.get(id).unwrap().source().unwrap();
            assert_eq!(img, c.train.get(src).unwrap());
            assert!((pearson(img.values(), c.train.get(src).unwrap().values()).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let spec = PlantSpec { n_train: 100, n_val: 20, n_novel_synth: 80, n_exact_copies: 10, n_augmented_copies: 10, dims: vec![16, 16], seed: 3 };
        let a = generate_corpus(&spec, &AugmentationSpec::default()).unwrap();
        let b = generate_corpus(&spec, &AugmentationSpec::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.synth.len(), 100);
        assert_eq!(a.truth.count(|p| matches!(p, Provenance::AugCopy(_))), 10);
    }

    #[test]
    fn rejects_small_dims() {
        let spec = PlantSpec { dims: vec![15, 32], ..small(1, 1, 1) };
        assert!(generate_corpus(&spec, &AugmentationSpec::default()).is_err());
    }

    #[test]
    fn volumes_supported() {
        let img = blob_image(&[16, 16, 16], 5).unwrap();
        assert_eq!(img.len(), 4096);
        assert_eq!(img.values().iter().cloned().fold(0f32, f32::max), 1.0);
    }
}

//! On-disk corpus layout: `<dir>/<role>/<id>.mimg` plus `<dir>/manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::augment::AugmentationSpec;
use super::generate::{Corpus, GroundTruth, ImageSet, PlantSpec};
use crate::error::{Error, Result};
use crate::tensor::{encode_tensor, read_tensor};
use crate::vectors::Role;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub role: Role,
    /// Path relative to the corpus directory.
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub plant: PlantSpec,
    pub augmentation: AugmentationSpec,
    pub entries: Vec<ManifestEntry>,
    pub truth: GroundTruth,
}

impl CorpusManifest {
    pub fn ids(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    pub fn path_of(&self, dir: &Path, id: &str) -> Option<PathBuf> {
        self.entries.iter().find(|e| e.id == id).map(|e| dir.join(&e.file))
    }
}

/// Write every image and the manifest; returns the manifest.
pub fn write_corpus(
    dir: impl AsRef<Path>,
    corpus: &Corpus,
    plant: &PlantSpec,
    augmentation: &AugmentationSpec,
) -> Result<CorpusManifest> {
    let dir = dir.as_ref();
    let mut entries = Vec::new();
    for set in [&corpus.train, &corpus.val, &corpus.synth] {
        let sub = dir.join(set.role.as_str());
        fs::create_dir_all(&sub)?;
        for (id, img) in set.iter() {
            let mut bytes = Vec::new();
            encode_tensor(img, &mut bytes)?;
            let file = format!("{}/{id}.mimg", set.role);
            fs::write(dir.join(&file), &bytes)?;
            entries.push(ManifestEntry {
                id: id.to_string(),
                role: set.role,
                file,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
    }
    let manifest = CorpusManifest {
        plant: plant.clone(),
        augmentation: augmentation.clone(),
        entries,
        truth: corpus.truth.clone(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<CorpusManifest> {
    let text = fs::read_to_string(dir.as_ref().join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Load a corpus written by [`write_corpus`], verifying file digests.
fn load_role(dir: &Path, manifest: &CorpusManifest, role: Role) -> Result<ImageSet> {
    let mut ids = Vec::new();
    let mut images = Vec::new();
    for e in manifest.ids(role) {
        let path = dir.join(&e.file);
        let digest = hex::encode(Sha256::digest(fs::read(&path)?));
        if digest != e.sha256 {
            return Err(Error::format(format!("digest mismatch for {}", e.file)));
        }
        ids.push(e.id.clone());
        images.push(read_tensor(&path)?);
    }
    Ok(ImageSet { role, ids, images })
}

pub fn read_corpus(dir: impl AsRef<Path>) -> Result<(Corpus, CorpusManifest)> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let corpus = Corpus {
        train: load_role(dir, &manifest, Role::Train)?,
        val: load_role(dir, &manifest, Role::Val)?,
        synth: load_role(dir, &manifest, Role::Synth)?,
        truth: manifest.truth.clone(),
    };
    Ok((corpus, manifest))
}

/// Images of one role. A directory holding a corpus manifest yields the
/// entries of `role`; any other directory yields every `*.mimg` file in name
/// order, with the file stem as id.
pub fn read_image_set(dir: impl AsRef<Path>, role: Role) -> Result<ImageSet> {
    let dir = dir.as_ref();
    if dir.join(MANIFEST_FILE).is_file() {
        return load_role(dir, &read_manifest(dir)?, role);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|x| x == "mimg"));
    files.sort();
    if files.is_empty() {
        return Err(Error::invalid(format!("no .mimg files in {}", dir.display())));
    }
    let mut ids = Vec::new();
    let mut images = Vec::new();
    for p in files {
        let stem = p.file_stem().and_then(|s| s.to_str()).ok_or_else(|| Error::format("non-UTF-8 file name"))?;
        ids.push(stem.to_string());
        images.push(read_tensor(&p)?);
    }
    Ok(ImageSet { role, ids, images })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_corpus;

    #[test]
    fn disk_round_trip_is_lossless() {
        let plant = PlantSpec { n_train: 6, n_val: 3, n_novel_synth: 3, n_exact_copies: 2, n_augmented_copies: 2, dims: vec![16, 16], seed: 1 };
        let aug = AugmentationSpec::default();
        let corpus = generate_corpus(&plant, &aug).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = write_corpus(dir.path(), &corpus, &plant, &aug).unwrap();
        assert_eq!(m.entries.len(), 6 + 3 + 7);
        let (back, m2) = read_corpus(dir.path()).unwrap();
        assert_eq!(back, corpus);
        assert_eq!(m2, m);
    }

    #[test]
    fn image_set_from_manifest_or_plain_dir() {
        let plant = PlantSpec { n_train: 4, n_val: 2, n_novel_synth: 2, n_exact_copies: 1, n_augmented_copies: 1, dims: vec![16, 16], seed: 2 };
        let aug = AugmentationSpec::default();
        let corpus = generate_corpus(&plant, &aug).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &corpus, &plant, &aug).unwrap();
        assert_eq!(read_image_set(dir.path(), Role::Synth).unwrap(), corpus.synth);
        let plain = read_image_set(dir.path().join("train"), Role::Train).unwrap();
        assert_eq!(plain, corpus.train);
        assert!(read_image_set(tempfile::tempdir().unwrap().path(), Role::Val).is_err());
    }
}

//! Augmentations and planted-copy benchmark corpora.

mod augment;
mod generate;
mod manifest;
mod score;

pub use augment::{augment, flip, rotate, AugmentationSpec};
pub use generate::{
    blob_image, generate_corpus, sample_id, Corpus, GroundTruth, ImageSet, PlantSpec, Provenance,
    MIN_EXTENT,
};
pub use manifest::{read_corpus, read_image_set, read_manifest, write_corpus, CorpusManifest, ManifestEntry, MANIFEST_FILE};
pub use score::{score_detector, ClassTally, DetectorScore};

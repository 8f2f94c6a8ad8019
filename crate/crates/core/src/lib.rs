//! Memorization auditing for generative models.
//!
//! Pipeline: images are pooled into feature vectors, mapped to a contrastive
//! embedding space, and compared with Pearson correlation. A threshold
//! calibrated on held-out validation data decides which training samples
//! reappear among synthetic samples.

pub mod contrastive;
pub mod corpus;
pub mod detection;
pub mod error;
mod io_util;
pub mod labels;
pub mod metrics;
pub mod rng;
pub mod similarity;
pub mod tensor;
pub mod vectors;

pub use error::{Error, Result};
pub use labels::{BinaryLabel, Grade, LabelRecord, LabelStore};
pub use rng::{RngSeed, SeedRng};
pub use tensor::{read_tensor, write_tensor, ImageTensor};
pub use vectors::{read_vector_set, write_vector_set, Role, VectorSet};

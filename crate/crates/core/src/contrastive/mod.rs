//! Contrastive encoder: pooled image features mapped to embeddings and
//! trained with NT-Xent so each sample attracts its augmented view.

mod loss;
mod pool;
mod model;
mod train;

pub use pool::pool_features;
pub use loss::{cosine_sim, nt_xent, nt_xent_f64, nt_xent_grad, partner};
pub use model::{
    decode_model, embed_as, embed_set, encode_model, encoder_forward, read_model, write_model,
    Activation, EncoderModel,
};
pub use train::{
    analytic_gradient, grad_check, grad_check_against, numeric_gradient, relative_error,
    train_encoder, AugmentedViews, Jitter, TrainConfig, TrainedEncoder, ViewSampler, GRAD_CHECK_FLOOR,
    GRAD_CHECK_STEP,
};

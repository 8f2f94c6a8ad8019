//! Quality, diversity and validation metrics.

mod classify;
mod fid;
mod msssim;

pub use classify::{
    confusion, default_u_grid, roc, ConfusionCounts, ConfusionReport, PairKey, RocCurve, RocPoint,
};
pub use fid::{frechet_distance, gaussian_summary, GaussianSummary, PSD_TOLERANCE};
pub use msssim::{diversity_msssim, diversity_partner, ms_ssim, usable_scales, MS_SSIM_WEIGHTS};

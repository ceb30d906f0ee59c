//! Score distillation: denoiser priors, PAAS score estimates, the
//! reconstruction objective and the Adam loop that fits a density grid to a
//! single segmented image.

mod ablation;
mod adam;
mod denoiser;
mod recon;

pub use ablation::{ablate, AblationReport, AblationRow, DEFAULT_RATIOS};
pub use adam::{Adam, AdamConfig};
pub use denoiser::{
    analytic_denoise, paas, paas_estimate, score, Conditioning, Denoiser, DenoiserKind, DenoiserSpec,
    GaussianComponent, NoiseSchedule, PaasEstimate,
};
pub use recon::{
    constant_prior, default_extent, disk_target, image_prior, loss_prior_grad, loss_rec, reconstruct, LossRecord,
    PriorGradient, RecLoss, ReconConfig, Reconstruction, ViewSampler,
};

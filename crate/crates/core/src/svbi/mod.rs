//! Variational position / RSS model.
//!
//! A shared recognition network maps a normalized fingerprint to a Gaussian
//! posterior over a low-dimensional latent `z`. Two generative paths decode
//! reparameterized samples of `z`: one to standardized coordinates, one back
//! to the fingerprint. Training minimizes `KL(q(z|x) ‖ N(0, I))` plus the
//! weighted squared reconstruction errors of the enabled paths.

mod latent;
mod loss;
mod model;
mod predict;
mod train;

pub use latent::{kl_std_normal, reparameterize, std_normal_log_density, Covariance, GaussianLatent, LatentMode};
pub use loss::{
    elbo_analytic_kl, elbo_analytic_kl_with, elbo_mc, elbo_mc_with, loss_joint, loss_pos_path, loss_rss_path,
    loss_with_noise, rss_log_likelihood, sample_noise, LossBreakdown, LossWeights, RSS_LIKELIHOOD_VARIANCE,
};
pub use model::{SvbiArchitecture, SvbiDocument, SvbiGrad, SvbiModel};
pub use predict::{
    estimate_rss, generate_radio_map, predict_position, predict_positions, GenerationMode, PositionEstimate,
};
pub use train::{train_joint, train_model, train_separate, SvbiTrainConfig};

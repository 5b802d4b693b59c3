//! Minimal dense-network engine.
//!
//! Layers are affine maps `f(Wᵀh + b)` with `W` stored as a `d_in × d_out`
//! matrix, so a batch `H` (rows are samples) maps to `f(H·W + b)`. Gradients
//! are hand-derived for the fixed activation vocabulary; there is no general
//! autodiff graph.

mod activation;
mod init;
mod network;
mod optim;
mod train;

pub use activation::Activation;
pub use init::xavier_init;
pub use network::{
    DenseLayer, DenseNetwork, ForwardCache, LayerDocument, LayerGrad, Loss, NetworkDocument,
    NetworkGrad,
};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, RMSPROP_EPS, RMSPROP_RHO};
pub use train::{
    fit, split_train_validation, train, EarlyStopper, Objective, Parameters, StopDecision,
    TrainConfig, TrainHistory,
};

/// Check that every entry of `values` is finite.
pub(crate) fn ensure_finite<'a>(
    values: impl IntoIterator<Item = &'a f64>,
    what: &str,
) -> crate::Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::Error::numeric(format!("non-finite values in {what}")))
    }
}

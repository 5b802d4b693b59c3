//! Joint WiFi fingerprint positioning and radio-map generation with stochastic
//! variational Bayesian inference.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: a small dense-network engine (forward pass, hand-derived backprop,
//!   Xavier init, Adam/RMSprop, mini-batch training with early stopping).
//! - [`data`]: radio maps, preprocessing scalers, splitting and CSV I/O.
//! - [`baselines`]: weighted kNN and the three neural comparison models.
//! - [`svbi`]: the variational model with a shared recognition module, a
//!   Gaussian coder and separate position / RSS generative paths.
//! - [`sim`]: a synthetic log-distance path-loss testbed.
//! - [`eval`]: positioning errors, RMSE with confidence intervals, CPA curves
//!   and RSS estimation error.
//!
//! All randomness flows through caller-supplied, seeded [`rand_chacha::ChaCha8Rng`]
//! generators so every pipeline is reproducible bit for bit.

pub mod baselines;
pub mod data;
mod error;
pub mod eval;
pub mod nn;
pub mod sim;
pub mod svbi;

pub use error::{Error, Result};

/// Seeded generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build a generator for `seed` on an independent `stream`.
///
/// Streams let one seed drive initialization, data splitting and training noise
/// without the consumers perturbing each other.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

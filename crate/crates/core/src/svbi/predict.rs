use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{apply_scale, SvbiModel};
use crate::data::RadioMap;
use crate::{Error, Result, Rng};

/// Predicted position with a per-coordinate spread (sample std; zero in the
/// deterministic mode).
#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub mean: Vec<f64>,
    pub spread: Vec<f64>,
}

/// Encode a raw (dBm) fingerprint, decode `n_samples` reparameterized latents
/// through the position path and inverse-standardize. `n_samples = 0` decodes
/// once at the posterior mean.
pub fn predict_position(model: &SvbiModel, rss_dbm: &[f64], n_samples: usize, rng: &mut Rng) -> Result<PositionEstimate> {
    let x = model.rss_scaler.apply_row(rss_dbm)?;
    let lat = model.encode(&x)?;
    let dim = model.coord_dim();
    if n_samples == 0 {
        let y = model.pos_decoder.forward(&lat.mu)?;
        return Ok(PositionEstimate {
            mean: model.coord_scaler.inverse_row(&y),
            spread: vec![0.0; dim],
        });
    }
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    for _ in 0..n_samples {
        let eps: Vec<f64> = (0..lat.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let z = lat.reparameterize(&eps)?;
        let y = model.coord_scaler.inverse_row(&model.pos_decoder.forward(&z)?);
        for j in 0..dim {
            sum[j] += y[j];
            sum_sq[j] += y[j] * y[j];
        }
    }
    let n = n_samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let spread = if n_samples < 2 {
        vec![0.0; dim]
    } else {
        sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| ((sq - n * m * m) / (n - 1.0)).max(0.0).sqrt())
            .collect()
    };
    Ok(PositionEstimate { mean, spread })
}

/// Deterministic (posterior-mean) positions for a batch of raw fingerprints.
pub fn predict_positions(model: &SvbiModel, rss_dbm: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let x = model.rss_scaler.apply(rss_dbm)?;
    let enc = model.encode_batch(x.view())?;
    let y = model.pos_decoder.forward_batch(enc.mu().view())?;
    model.coord_scaler.inverse(y.view())
}

/// RSS decoded at the posterior mean and mapped back to dBm (clipped to the
/// scaler range).
pub fn estimate_rss(model: &SvbiModel, rss_dbm: &[f64]) -> Result<Vec<f64>> {
    let dec = model.rss_decoder_or_err()?;
    let x = model.rss_scaler.apply_row(rss_dbm)?;
    let lat = model.encode(&x)?;
    Ok(model.rss_scaler.inverse_row(&dec.forward(&lat.mu)?))
}

/// Latent source for radio-map generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMode {
    /// One row per source RP from `ẑ = μ̂ + s·Σ̂^{1/2} ε`.
    #[default]
    PosteriorJitter,
    /// `n_points` rows from `z ~ N(0, I)`.
    PriorSample,
}

impl std::str::FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "posterior-jitter" | "posterior" => Ok(Self::PosteriorJitter),
            "prior-sample" | "prior" => Ok(Self::PriorSample),
            other => Err(Error::invalid(format!("unknown generation mode `{other}`"))),
        }
    }
}

/// Decode both paths from latent samples to build a synthetic radio map.
///
/// `n_points` is only used by [`GenerationMode::PriorSample`].
pub fn generate_radio_map(
    model: &SvbiModel,
    source: &RadioMap,
    noise_scale: f64,
    mode: GenerationMode,
    n_points: usize,
    rng: &mut Rng,
) -> Result<RadioMap> {
    let dec = model.rss_decoder_or_err()?;
    if !(noise_scale.is_finite() && noise_scale >= 0.0) {
        return Err(Error::invalid("noise_scale must be finite and non-negative"));
    }
    if source.n_ap() != model.n_ap() {
        return Err(Error::invalid("source radio map does not match the model's AP count"));
    }
    let d = model.d_man();
    let z = match mode {
        GenerationMode::PosteriorJitter => {
            if source.is_empty() {
                return Err(Error::invalid("source radio map is empty"));
            }
            let x = model.rss_scaler.apply(source.rss().view())?;
            let enc = model.encode_batch(x.view())?;
            let eps = Array2::from_shape_simple_fn((source.n_rp(), d), || rng.sample::<f64, _>(StandardNormal));
            apply_scale(model.latent_mode, enc.mu(), enc.cov_raw(), &eps, noise_scale)
        }
        GenerationMode::PriorSample => {
            if n_points == 0 {
                return Err(Error::invalid("n_points must be at least 1"));
            }
            Array2::from_shape_simple_fn((n_points, d), || rng.sample::<f64, _>(StandardNormal))
        }
    };
    let coords = model
        .coord_scaler
        .inverse(model.pos_decoder.forward_batch(z.view())?.view())?;
    let x_hat = dec.forward_batch(z.view())?;
    let mut rss = Array2::zeros(x_hat.dim());
    for (i, row) in x_hat.rows().into_iter().enumerate() {
        let v = model.rss_scaler.inverse_row(row.as_slice().expect("standard layout"));
        rss.row_mut(i).assign(&ndarray::Array1::from(v));
    }
    RadioMap::new(coords, rss, source.ap_ids().to_vec())
}

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::latent::{kl_std_normal, std_normal_log_density, GaussianLatent, LatentMode};
use super::model::{apply_scale, SvbiGrad, SvbiModel};
use crate::nn::{ensure_finite, DenseNetwork, NetworkGrad};
use crate::{Error, Result, Rng};

/// Fixed variance of the Gaussian RSS likelihood used by the ELBO estimators.
/// With `σ² = ½` the negative log-likelihood is `‖x − x̂‖² + (N_AP/2)·ln π`,
/// i.e. the squared-error term of the training loss plus a constant.
pub const RSS_LIKELIHOOD_VARIANCE: f64 = 0.5;

/// Weights of the two reconstruction terms; the KL term always has weight 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub pos: f64,
    pub rss: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { pos: 1.0, rss: 1.0 }
    }
}

impl LossWeights {
    pub const POSITION_ONLY: Self = Self { pos: 1.0, rss: 0.0 };
    pub const RSS_ONLY: Self = Self { pos: 0.0, rss: 1.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.pos) || !ok(self.rss) {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        if self.pos == 0.0 && self.rss == 0.0 {
            return Err(Error::invalid("at least one loss weight must be positive"));
        }
        Ok(())
    }
}

/// Terms of one loss evaluation (all batch means).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub kl: f64,
    pub pos_mse: f64,
    pub rss_mse: f64,
    pub total: f64,
}

/// `n_mcs` standard-normal draws of shape `n × d`, drawn sample-major then row-major.
pub fn sample_noise(n: usize, d: usize, n_mcs: usize, rng: &mut Rng) -> Vec<Array2<f64>> {
    (0..n_mcs)
        .map(|_| Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// KL of each row's posterior, averaged, plus its gradient w.r.t. `mu` and the raw
/// covariance outputs.
fn kl_term(mode: LatentMode, mu: &Array2<f64>, raw: &Array2<f64>) -> (f64, Array2<f64>, Array2<f64>) {
    let (n, d) = mu.dim();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0;
    let d_mu = mu * inv_n;
    let mut d_raw = Array2::zeros(raw.dim());
    for i in 0..n {
        let mu_sq: f64 = mu.row(i).iter().map(|m| m * m).sum();
        match mode {
            LatentMode::Diagonal => {
                let mut acc = mu_sq;
                for j in 0..d {
                    let lv = raw[[i, j]];
                    let v = lv.exp();
                    acc += v - 1.0 - lv;
                    d_raw[[i, j]] = 0.5 * (v - 1.0) * inv_n;
                }
                total += 0.5 * acc;
            }
            LatentMode::Full => {
                let mut acc = mu_sq - d as f64;
                let mut k = 0;
                for a in 0..d {
                    for b in 0..=a {
                        let r = raw[[i, k]];
                        if a == b {
                            let e = r.exp();
                            acc += e * e - 2.0 * r;
                            d_raw[[i, k]] = (e * e - 1.0) * inv_n;
                        } else {
                            acc += r * r;
                            d_raw[[i, k]] = r * inv_n;
                        }
                        k += 1;
                    }
                }
                total += 0.5 * acc;
            }
        }
    }
    (total * inv_n, d_mu, d_raw)
}

/// Push the latent gradient `dz` back through `z = μ + Σ^{1/2} ε`.
fn reparam_backward(
    mode: LatentMode,
    raw: &Array2<f64>,
    eps: &Array2<f64>,
    dz: &Array2<f64>,
    d_mu: &mut Array2<f64>,
    d_raw: &mut Array2<f64>,
) {
    *d_mu += dz;
    let (n, d) = dz.dim();
    match mode {
        LatentMode::Diagonal => {
            for i in 0..n {
                for j in 0..d {
                    d_raw[[i, j]] += dz[[i, j]] * eps[[i, j]] * 0.5 * (0.5 * raw[[i, j]]).exp();
                }
            }
        }
        LatentMode::Full => {
            for i in 0..n {
                let mut k = 0;
                for a in 0..d {
                    for b in 0..=a {
                        let g = dz[[i, a]] * eps[[i, b]];
                        d_raw[[i, k]] += if a == b { g * raw[[i, k]].exp() } else { g };
                        k += 1;
                    }
                }
            }
        }
    }
}

/// Mean (over rows and samples) squared reconstruction error of `decoder` and,
/// if requested, its parameter gradient and the gradient w.r.t. `z`.
fn reconstruction(
    decoder: &DenseNetwork,
    z: &Array2<f64>,
    target: ArrayView2<'_, f64>,
    scale: f64,
    want_grad: bool,
) -> Result<(f64, Option<(NetworkGrad, Array2<f64>)>)> {
    let cache = decoder.forward_cached(z.view())?;
    let residual = cache.output() - &target;
    let value = residual.iter().map(|r| r * r).sum::<f64>() * scale;
    if !want_grad {
        return Ok((value, None));
    }
    let (grad, dz) = decoder.backward(&cache, residual * (2.0 * scale));
    Ok((value, Some((grad, dz))))
}

/// Loss `KL + w_pos·pos_mse + w_rss·rss_mse` with explicit noise draws, one
/// `n × d_man` array per Monte Carlo sample. A path with zero weight is not
/// evaluated (its decoder receives a zero gradient).
///
/// `x` holds normalized fingerprints; `y_std` standardized coordinates (it may
/// be empty when `w_pos = 0`).
pub fn loss_with_noise(
    model: &SvbiModel,
    x: ArrayView2<'_, f64>,
    y_std: ArrayView2<'_, f64>,
    noise: &[Array2<f64>],
    weights: LossWeights,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<SvbiGrad>)> {
    weights.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if noise.is_empty() {
        return Err(Error::invalid("at least one Monte Carlo sample is required"));
    }
    let d = model.d_man();
    if noise.iter().any(|e| e.dim() != (n, d)) {
        return Err(Error::invalid(format!("noise draws must have shape ({n}, {d})")));
    }
    let use_pos = weights.pos > 0.0;
    let use_rss = weights.rss > 0.0;
    if use_pos && y_std.dim() != (n, model.coord_dim()) {
        return Err(Error::invalid("coordinate targets do not match the batch"));
    }
    let rss_decoder = if use_rss { Some(model.rss_decoder_or_err()?) } else { None };

    let mode = model.latent_mode;
    let enc = model.encode_batch(x)?;
    let (mu, raw) = (enc.mu(), enc.cov_raw());
    let (kl, mut d_mu, mut d_raw) = kl_term(mode, mu, raw);

    let mut pos_grad = NetworkGrad::zeros_like(&model.pos_decoder);
    let mut rss_grad = model.rss_decoder.as_ref().map(NetworkGrad::zeros_like);
    let scale = 1.0 / (n * noise.len()) as f64;
    let (mut pos_mse, mut rss_mse) = (0.0, 0.0);

    for eps in noise {
        let z = apply_scale(mode, mu, raw, eps, 1.0);
        ensure_finite(z.iter(), "latent sample")?;
        let mut dz = Array2::<f64>::zeros((n, d));
        if use_pos {
            let (v, g) = reconstruction(&model.pos_decoder, &z, y_std, scale, want_grad)?;
            pos_mse += v;
            if let Some((g, dzp)) = g {
                accumulate_scaled(&mut pos_grad, &g, weights.pos);
                dz.scaled_add(weights.pos, &dzp);
            }
        }
        if let Some(dec) = rss_decoder {
            let (v, g) = reconstruction(dec, &z, x, scale, want_grad)?;
            rss_mse += v;
            if let Some((g, dzr)) = g {
                accumulate_scaled(rss_grad.as_mut().expect("decoder present"), &g, weights.rss);
                dz.scaled_add(weights.rss, &dzr);
            }
        }
        if want_grad {
            reparam_backward(mode, raw, eps, &dz, &mut d_mu, &mut d_raw);
        }
    }

    let total = kl + weights.pos * pos_mse + weights.rss * rss_mse;
    if !total.is_finite() {
        return Err(Error::numeric("loss is non-finite"));
    }
    let breakdown = LossBreakdown {
        kl,
        pos_mse,
        rss_mse,
        total,
    };
    if !want_grad {
        return Ok((breakdown, None));
    }

    let (mean_grad, dh_mean) = model.mean_head.backward(&enc.mean, d_mu);
    let (cov_grad, dh_cov) = model.cov_head.backward(&enc.cov, d_raw);
    let (rec_grad, _) = model.recognition.backward(&enc.recognition, dh_mean + dh_cov);
    let grad = SvbiGrad {
        recognition: rec_grad,
        mean_head: mean_grad,
        cov_head: cov_grad,
        pos_decoder: pos_grad,
        rss_decoder: rss_grad,
    };
    Ok((breakdown, Some(grad)))
}

fn accumulate_scaled(acc: &mut NetworkGrad, g: &NetworkGrad, w: f64) {
    for (a, b) in acc.layers.iter_mut().zip(&g.layers) {
        a.weights.scaled_add(w, &b.weights);
        a.biases.scaled_add(w, &b.biases);
    }
}

fn sampled(
    model: &SvbiModel,
    x: ArrayView2<'_, f64>,
    y_std: ArrayView2<'_, f64>,
    weights: LossWeights,
    n_mcs: usize,
    rng: &mut Rng,
) -> Result<LossBreakdown> {
    let noise = sample_noise(x.nrows(), model.d_man(), n_mcs, rng);
    Ok(loss_with_noise(model, x, y_std, &noise, weights, false)?.0)
}

/// Mean KL plus mean squared RSS reconstruction error.
pub fn loss_rss_path(model: &SvbiModel, x: ArrayView2<'_, f64>, n_mcs: usize, rng: &mut Rng) -> Result<f64> {
    let empty = Array2::<f64>::zeros((0, 0));
    Ok(sampled(model, x, empty.view(), LossWeights::RSS_ONLY, n_mcs, rng)?.total)
}

/// Mean KL plus mean squared error on standardized coordinates.
pub fn loss_pos_path(
    model: &SvbiModel,
    x: ArrayView2<'_, f64>,
    y_std: ArrayView2<'_, f64>,
    n_mcs: usize,
    rng: &mut Rng,
) -> Result<f64> {
    Ok(sampled(model, x, y_std, LossWeights::POSITION_ONLY, n_mcs, rng)?.total)
}

/// Weighted two-path loss with the KL term counted once.
pub fn loss_joint(
    model: &SvbiModel,
    x: ArrayView2<'_, f64>,
    y_std: ArrayView2<'_, f64>,
    weights: LossWeights,
    n_mcs: usize,
    rng: &mut Rng,
) -> Result<f64> {
    Ok(sampled(model, x, y_std, weights, n_mcs, rng)?.total)
}

/// `ln p(x | x̂)` under the fixed-variance Gaussian likelihood.
pub fn rss_log_likelihood(x: &[f64], x_hat: &[f64]) -> f64 {
    let sq: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * x.len() as f64 * (2.0 * PI * RSS_LIKELIHOOD_VARIANCE).ln() - sq / (2.0 * RSS_LIKELIHOOD_VARIANCE)
}

/// Full Monte Carlo lower-bound estimate
/// `(1/L) Σ [ln p(x|zˡ) + ln p(zˡ) − ln q(zˡ|x)]` for a posterior `lat`
/// and an arbitrary decoder.
pub fn elbo_mc_with<F>(lat: &GaussianLatent, x: &[f64], eps: &[Vec<f64>], decode: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if eps.is_empty() {
        return Err(Error::invalid("n_mcs must be at least 1"));
    }
    let mut acc = 0.0;
    for e in eps {
        let z = lat.reparameterize(e)?;
        let x_hat = decode(&z)?;
        acc += rss_log_likelihood(x, &x_hat) + std_normal_log_density(&z) - lat.log_density(&z)?;
    }
    let value = acc / eps.len() as f64;
    if !value.is_finite() {
        return Err(Error::numeric("lower-bound estimate is non-finite"));
    }
    Ok(value)
}

/// Lower-bound estimate with the KL term in closed form:
/// `−KL(q ‖ N(0,I)) + (1/L) Σ ln p(x|zˡ)`.
pub fn elbo_analytic_kl_with<F>(lat: &GaussianLatent, x: &[f64], eps: &[Vec<f64>], decode: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if eps.is_empty() {
        return Err(Error::invalid("n_mcs must be at least 1"));
    }
    let mut acc = 0.0;
    for e in eps {
        let x_hat = decode(&lat.reparameterize(e)?)?;
        acc += rss_log_likelihood(x, &x_hat);
    }
    let value = acc / eps.len() as f64 - kl_std_normal(lat)?;
    if !value.is_finite() {
        return Err(Error::numeric("lower-bound estimate is non-finite"));
    }
    Ok(value)
}

fn draw_eps(d: usize, n_mcs: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..n_mcs)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Full Monte Carlo lower bound of one normalized fingerprint under the RSS path.
pub fn elbo_mc(model: &SvbiModel, x: &[f64], n_mcs: usize, rng: &mut Rng) -> Result<f64> {
    let dec = model.rss_decoder_or_err()?;
    let lat = model.encode(x)?;
    let eps = draw_eps(lat.dim(), n_mcs, rng);
    elbo_mc_with(&lat, x, &eps, |z| dec.forward(z))
}

/// Lower bound with analytic KL for one normalized fingerprint.
pub fn elbo_analytic_kl(model: &SvbiModel, x: &[f64], n_mcs: usize, rng: &mut Rng) -> Result<f64> {
    let dec = model.rss_decoder_or_err()?;
    let lat = model.encode(x)?;
    let eps = draw_eps(lat.dim(), n_mcs, rng);
    elbo_analytic_kl_with(&lat, x, &eps, |z| dec.forward(z))
}

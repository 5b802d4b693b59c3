use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How the coder parameterizes the posterior covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentMode {
    /// Log-variances of a diagonal covariance.
    #[default]
    Diagonal,
    /// Lower-triangular Cholesky factor `R` with `Σ = R Rᵀ`; the coder emits
    /// log-diagonal entries and raw off-diagonal entries.
    Full,
}

impl LatentMode {
    /// Number of coder outputs needed for the covariance of a `d`-dim latent.
    pub fn cov_params(self, d: usize) -> usize {
        match self {
            LatentMode::Diagonal => d,
            LatentMode::Full => d * (d + 1) / 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal { log_var: Vec<f64> },
    /// Row-major `d × d` lower-triangular factor.
    Full { chol: Vec<f64> },
}

/// Gaussian approximate posterior `q(z|x) = N(μ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLatent {
    pub mu: Vec<f64>,
    pub cov: Covariance,
}

impl GaussianLatent {
    pub fn diagonal(mu: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mu.is_empty() || mu.len() != log_var.len() {
            return Err(Error::invalid("mu and log_var must have equal, non-zero length"));
        }
        let lat = Self {
            mu,
            cov: Covariance::Diagonal { log_var },
        };
        lat.check_finite()?;
        Ok(lat)
    }

    pub fn full(mu: Vec<f64>, chol: Vec<f64>) -> Result<Self> {
        let d = mu.len();
        if d == 0 || chol.len() != d * d {
            return Err(Error::invalid("Cholesky factor must be d x d"));
        }
        for i in 0..d {
            for j in i + 1..d {
                if chol[i * d + j] != 0.0 {
                    return Err(Error::invalid("Cholesky factor must be lower triangular"));
                }
            }
        }
        let lat = Self {
            mu,
            cov: Covariance::Full { chol },
        };
        lat.check_finite()?;
        Ok(lat)
    }

    /// Build from raw coder outputs (see [`LatentMode`]).
    pub fn from_coder(mode: LatentMode, mu: Vec<f64>, raw: &[f64]) -> Result<Self> {
        match mode {
            LatentMode::Diagonal => Self::diagonal(mu, raw.to_vec()),
            LatentMode::Full => {
                let d = mu.len();
                Self::full(mu, chol_from_raw(d, raw))
            }
        }
    }

    pub fn standard(d: usize) -> Self {
        Self {
            mu: vec![0.0; d],
            cov: Covariance::Diagonal { log_var: vec![0.0; d] },
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn check_finite(&self) -> Result<()> {
        let cov: &[f64] = match &self.cov {
            Covariance::Diagonal { log_var } => log_var,
            Covariance::Full { chol } => chol,
        };
        crate::nn::ensure_finite(self.mu.iter().chain(cov), "latent parameters")
    }

    /// Diagonal of `Σ`.
    pub fn variances(&self) -> Vec<f64> {
        let d = self.dim();
        match &self.cov {
            Covariance::Diagonal { log_var } => log_var.iter().map(|v| v.exp()).collect(),
            Covariance::Full { chol } => (0..d)
                .map(|i| (0..=i).map(|j| chol[i * d + j] * chol[i * d + j]).sum())
                .collect(),
        }
    }

    pub fn covariance(&self) -> Array2<f64> {
        let d = self.dim();
        match &self.cov {
            Covariance::Diagonal { .. } => Array2::from_diag(&ndarray::Array1::from(self.variances())),
            Covariance::Full { chol } => {
                let r = Array2::from_shape_vec((d, d), chol.clone()).expect("d x d");
                r.dot(&r.t())
            }
        }
    }

    /// `ln |Σ|`, or an error if `Σ` is singular.
    pub fn log_det(&self) -> Result<f64> {
        let d = self.dim();
        match &self.cov {
            Covariance::Diagonal { log_var } => Ok(log_var.iter().sum()),
            Covariance::Full { chol } => {
                let mut acc = 0.0;
                for i in 0..d {
                    let r = chol[i * d + i];
                    if r == 0.0 {
                        return Err(Error::invalid("covariance is singular"));
                    }
                    acc += 2.0 * r.abs().ln();
                }
                Ok(acc)
            }
        }
    }

    /// `z = μ + Σ^{1/2} ε`.
    pub fn reparameterize(&self, eps: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if eps.len() != d {
            return Err(Error::invalid(format!("eps has {} entries, latent has {d}", eps.len())));
        }
        Ok(match &self.cov {
            Covariance::Diagonal { log_var } => self
                .mu
                .iter()
                .zip(log_var)
                .zip(eps)
                .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
                .collect(),
            Covariance::Full { chol } => (0..d)
                .map(|i| self.mu[i] + (0..=i).map(|j| chol[i * d + j] * eps[j]).sum::<f64>())
                .collect(),
        })
    }

    /// `ln q(z)`.
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        let d = self.dim();
        if z.len() != d {
            return Err(Error::invalid("z has the wrong dimension"));
        }
        let diff: Vec<f64> = z.iter().zip(&self.mu).map(|(a, b)| a - b).collect();
        let maha = match &self.cov {
            Covariance::Diagonal { log_var } => diff
                .iter()
                .zip(log_var)
                .map(|(u, lv)| u * u * (-lv).exp())
                .sum::<f64>(),
            Covariance::Full { chol } => {
                // Forward substitution R w = diff, then |w|².
                let mut w = vec![0.0; d];
                for i in 0..d {
                    let r = chol[i * d + i];
                    if r == 0.0 {
                        return Err(Error::invalid("covariance is singular"));
                    }
                    let s: f64 = (0..i).map(|j| chol[i * d + j] * w[j]).sum();
                    w[i] = (diff[i] - s) / r;
                }
                w.iter().map(|v| v * v).sum()
            }
        };
        Ok(-0.5 * (d as f64 * (2.0 * PI).ln() + self.log_det()? + maha))
    }
}

/// Expand raw coder outputs into a lower-triangular factor with a positive
/// diagonal. Raw entries are ordered row by row: `(0,0), (1,0), (1,1), ...`.
pub(crate) fn chol_from_raw(d: usize, raw: &[f64]) -> Vec<f64> {
    let mut chol = vec![0.0; d * d];
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            chol[i * d + j] = if i == j { raw[k].exp() } else { raw[k] };
            k += 1;
        }
    }
    chol
}

/// `z = μ + Σ^{1/2} ε` (free-function form of [`GaussianLatent::reparameterize`]).
pub fn reparameterize(lat: &GaussianLatent, eps: &[f64]) -> Result<Vec<f64>> {
    lat.reparameterize(eps)
}

/// Closed-form `KL(N(μ, Σ) ‖ N(0, I)) = -½ [d + ln|Σ| - tr Σ - μᵀμ]`.
pub fn kl_std_normal(lat: &GaussianLatent) -> Result<f64> {
    let d = lat.dim() as f64;
    let log_det = lat.log_det()?;
    let trace: f64 = lat.variances().iter().sum();
    if !(trace > 0.0) {
        return Err(Error::invalid("covariance must have positive variances"));
    }
    let mu_sq: f64 = lat.mu.iter().map(|m| m * m).sum();
    let kl = -0.5 * (d + log_det - trace - mu_sq);
    Ok(kl.max(0.0))
}

/// `ln N(z; 0, I)`.
pub fn std_normal_log_density(z: &[f64]) -> f64 {
    let sq: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (z.len() as f64 * (2.0 * PI).ln() + sq)
}

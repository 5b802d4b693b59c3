use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::latent::{chol_from_raw, GaussianLatent, LatentMode};
use crate::data::{MinMaxScaler, StdScaler};
use crate::nn::{Activation, DenseNetwork, ForwardCache, NetworkDocument, NetworkGrad, Parameters};
use crate::{seeded_rng, Error, Result};

const INIT_STREAM: u64 = 0;
const RSS_INIT_STREAM: u64 = 3;

/// Layer widths of the hybrid model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvbiArchitecture {
    /// Latent manifold dimension; also the width of the Gaussian coder.
    pub d_man: usize,
    /// ReLU layers of the shared recognition module.
    pub recognition_hidden: Vec<usize>,
    /// Hidden layers of the position decoder (empty: a single linear SNN).
    pub pos_hidden: Vec<usize>,
    /// Hidden layers of the RSS decoder. All but the last use ReLU; the last
    /// is the tanh layer of the MLE head, followed by a linear output layer.
    pub rss_hidden: Vec<usize>,
}

impl Default for SvbiArchitecture {
    fn default() -> Self {
        Self {
            d_man: 4,
            recognition_hidden: vec![128, 64, 32],
            pos_hidden: Vec::new(),
            rss_hidden: vec![32, 64, 128],
        }
    }
}

impl SvbiArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.d_man == 0 {
            return Err(Error::invalid("d_man must be at least 1"));
        }
        if self.recognition_hidden.is_empty() {
            return Err(Error::invalid("the recognition module needs at least one hidden layer"));
        }
        let widths = self
            .recognition_hidden
            .iter()
            .chain(&self.pos_hidden)
            .chain(&self.rss_hidden);
        if widths.into_iter().any(|&w| w == 0) {
            return Err(Error::invalid("layer widths must be non-zero"));
        }
        Ok(())
    }
}

fn relu_stack(widths: &[usize]) -> Vec<(usize, Activation)> {
    widths.iter().map(|&w| (w, Activation::Relu)).collect()
}

/// Shared recognition module + Gaussian coder, a position generative path and
/// an optional RSS generative path.
///
/// Inputs are min-max normalized fingerprints; the position path predicts
/// standardized coordinates and the RSS path normalized fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct SvbiModel {
    pub recognition: DenseNetwork,
    pub mean_head: DenseNetwork,
    pub cov_head: DenseNetwork,
    pub pos_decoder: DenseNetwork,
    pub rss_decoder: Option<DenseNetwork>,
    pub rss_scaler: MinMaxScaler,
    pub coord_scaler: StdScaler,
    pub latent_mode: LatentMode,
}

/// Gradients aligned with [`SvbiModel`]'s parameter buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct SvbiGrad {
    pub recognition: NetworkGrad,
    pub mean_head: NetworkGrad,
    pub cov_head: NetworkGrad,
    pub pos_decoder: NetworkGrad,
    pub rss_decoder: Option<NetworkGrad>,
}

/// Recognition and coder activations for a batch.
pub(crate) struct Encoded {
    pub recognition: ForwardCache,
    pub mean: ForwardCache,
    pub cov: ForwardCache,
}

impl Encoded {
    pub fn mu(&self) -> &Array2<f64> {
        self.mean.output()
    }

    pub fn cov_raw(&self) -> &Array2<f64> {
        self.cov.output()
    }
}

impl SvbiModel {
    /// Xavier-initialized model. The RSS path draws from its own stream so
    /// adding it leaves the other parameters unchanged for a given seed.
    pub fn new(
        arch: &SvbiArchitecture,
        latent_mode: LatentMode,
        rss_scaler: MinMaxScaler,
        coord_scaler: StdScaler,
        with_rss_path: bool,
        seed: u64,
    ) -> Result<Self> {
        arch.validate()?;
        let n_ap = rss_scaler.dim();
        let dim = coord_scaler.dim();
        let d = arch.d_man;
        let mut rng = seeded_rng(seed, INIT_STREAM);
        let recognition = DenseNetwork::xavier(n_ap, &relu_stack(&arch.recognition_hidden), &mut rng)?;
        let h = recognition.output_dim();
        let mean_head = DenseNetwork::xavier(h, &[(d, Activation::Linear)], &mut rng)?;
        let cov_head = DenseNetwork::xavier(h, &[(latent_mode.cov_params(d), Activation::Linear)], &mut rng)?;
        let mut pos_spec = relu_stack(&arch.pos_hidden);
        pos_spec.push((dim, Activation::Linear));
        let pos_decoder = DenseNetwork::xavier(d, &pos_spec, &mut rng)?;

        let rss_decoder = if with_rss_path {
            let mut spec = relu_stack(&arch.rss_hidden);
            if let Some(last) = spec.last_mut() {
                last.1 = Activation::Tanh;
            }
            spec.push((n_ap, Activation::Linear));
            let mut rss_rng = seeded_rng(seed, RSS_INIT_STREAM);
            Some(DenseNetwork::xavier(d, &spec, &mut rss_rng)?)
        } else {
            None
        };

        let mut model = Self {
            recognition,
            mean_head,
            cov_head,
            pos_decoder,
            rss_decoder,
            rss_scaler,
            coord_scaler,
            latent_mode,
        };
        model.for_each_network(|net| net.seed = Some(seed));
        Ok(model)
    }

    fn for_each_network(&mut self, mut f: impl FnMut(&mut DenseNetwork)) {
        f(&mut self.recognition);
        f(&mut self.mean_head);
        f(&mut self.cov_head);
        f(&mut self.pos_decoder);
        if let Some(rss) = &mut self.rss_decoder {
            f(rss);
        }
    }

    pub fn d_man(&self) -> usize {
        self.mean_head.output_dim()
    }

    pub fn n_ap(&self) -> usize {
        self.recognition.input_dim()
    }

    pub fn coord_dim(&self) -> usize {
        self.pos_decoder.output_dim()
    }

    pub fn has_rss_path(&self) -> bool {
        self.rss_decoder.is_some()
    }

    pub(crate) fn rss_decoder_or_err(&self) -> Result<&DenseNetwork> {
        self.rss_decoder
            .as_ref()
            .ok_or_else(|| Error::InvalidState("the RSS generative path was not trained".into()))
    }

    /// Checks that the pieces fit together.
    pub fn validate(&self) -> Result<()> {
        let d = self.d_man();
        let h = self.recognition.output_dim();
        let ok = self.recognition.input_dim() == self.rss_scaler.dim()
            && self.mean_head.input_dim() == h
            && self.cov_head.input_dim() == h
            && self.cov_head.output_dim() == self.latent_mode.cov_params(d)
            && self.pos_decoder.input_dim() == d
            && self.pos_decoder.output_dim() == self.coord_scaler.dim()
            && self
                .rss_decoder
                .as_ref()
                .is_none_or(|r| r.input_dim() == d && r.output_dim() == self.rss_scaler.dim());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("SVBI model components have inconsistent dimensions"))
        }
    }

    pub(crate) fn encode_batch(&self, x: ArrayView2<'_, f64>) -> Result<Encoded> {
        let recognition = self.recognition.forward_cached(x)?;
        let h = recognition.output().view();
        let mean = self.mean_head.forward_cached(h)?;
        let cov = self.cov_head.forward_cached(h)?;
        Ok(Encoded { recognition, mean, cov })
    }

    /// Posterior `q(z|x)` for one normalized fingerprint.
    pub fn encode(&self, x: &[f64]) -> Result<GaussianLatent> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::invalid(e.to_string()))?;
        let enc = self.encode_batch(view)?;
        GaussianLatent::from_coder(
            self.latent_mode,
            enc.mu().row(0).to_vec(),
            enc.cov_raw().row(0).as_slice().expect("standard layout"),
        )
    }

    /// Posterior for a batch of normalized fingerprints.
    pub fn encode_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<GaussianLatent>> {
        let enc = self.encode_batch(x)?;
        (0..x.nrows())
            .map(|i| {
                GaussianLatent::from_coder(
                    self.latent_mode,
                    enc.mu().row(i).to_vec(),
                    enc.cov_raw().row(i).as_slice().expect("standard layout"),
                )
            })
            .collect()
    }

    pub fn to_document(&self) -> SvbiDocument {
        SvbiDocument {
            d_man: self.d_man(),
            latent_mode: self.latent_mode,
            recognition: self.recognition.to_document(),
            mean_head: self.mean_head.to_document(),
            cov_head: self.cov_head.to_document(),
            pos_decoder: self.pos_decoder.to_document(),
            rss_decoder: self.rss_decoder.as_ref().map(DenseNetwork::to_document),
            rss_scaler: self.rss_scaler.clone(),
            coord_scaler: self.coord_scaler.clone(),
        }
    }

    pub fn from_document(doc: &SvbiDocument) -> Result<Self> {
        let model = Self {
            recognition: DenseNetwork::from_document(&doc.recognition)?,
            mean_head: DenseNetwork::from_document(&doc.mean_head)?,
            cov_head: DenseNetwork::from_document(&doc.cov_head)?,
            pos_decoder: DenseNetwork::from_document(&doc.pos_decoder)?,
            rss_decoder: doc.rss_decoder.as_ref().map(DenseNetwork::from_document).transpose()?,
            rss_scaler: doc.rss_scaler.clone(),
            coord_scaler: doc.coord_scaler.clone(),
            latent_mode: doc.latent_mode,
        };
        model.validate()?;
        if model.d_man() != doc.d_man {
            return Err(Error::invalid("d_man does not match the coder width"));
        }
        Ok(model)
    }
}

/// Persisted form of an [`SvbiModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvbiDocument {
    pub d_man: usize,
    pub latent_mode: LatentMode,
    pub recognition: NetworkDocument,
    pub mean_head: NetworkDocument,
    pub cov_head: NetworkDocument,
    pub pos_decoder: NetworkDocument,
    pub rss_decoder: Option<NetworkDocument>,
    pub rss_scaler: MinMaxScaler,
    pub coord_scaler: StdScaler,
}

/// Per-row scale factors `Σ^{1/2}` applied to the noise.
pub(crate) fn apply_scale(mode: LatentMode, mu: &Array2<f64>, raw: &Array2<f64>, eps: &Array2<f64>, noise_scale: f64) -> Array2<f64> {
    let (n, d) = mu.dim();
    let mut z = mu.clone();
    match mode {
        LatentMode::Diagonal => {
            for i in 0..n {
                for j in 0..d {
                    z[[i, j]] += noise_scale * (0.5 * raw[[i, j]]).exp() * eps[[i, j]];
                }
            }
        }
        LatentMode::Full => {
            for i in 0..n {
                let chol = chol_from_raw(d, raw.row(i).as_slice().expect("standard layout"));
                for a in 0..d {
                    let s: f64 = (0..=a).map(|b| chol[a * d + b] * eps[[i, b]]).sum();
                    z[[i, a]] += noise_scale * s;
                }
            }
        }
    }
    z
}

impl Parameters for SvbiModel {
    fn buffers(&self) -> Vec<&[f64]> {
        let mut out = self.recognition.buffers();
        out.extend(self.mean_head.buffers());
        out.extend(self.cov_head.buffers());
        out.extend(self.pos_decoder.buffers());
        if let Some(rss) = &self.rss_decoder {
            out.extend(rss.buffers());
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.recognition.buffers_mut();
        out.extend(self.mean_head.buffers_mut());
        out.extend(self.cov_head.buffers_mut());
        out.extend(self.pos_decoder.buffers_mut());
        if let Some(rss) = &mut self.rss_decoder {
            out.extend(rss.buffers_mut());
        }
        out
    }
}

impl Parameters for SvbiGrad {
    fn buffers(&self) -> Vec<&[f64]> {
        let mut out = self.recognition.buffers();
        out.extend(self.mean_head.buffers());
        out.extend(self.cov_head.buffers());
        out.extend(self.pos_decoder.buffers());
        if let Some(rss) = &self.rss_decoder {
            out.extend(rss.buffers());
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.recognition.buffers_mut();
        out.extend(self.mean_head.buffers_mut());
        out.extend(self.cov_head.buffers_mut());
        out.extend(self.pos_decoder.buffers_mut());
        if let Some(rss) = &mut self.rss_decoder {
            out.extend(rss.buffers_mut());
        }
        out
    }
}

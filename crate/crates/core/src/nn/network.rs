use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{ensure_finite, xavier_init, Activation, Parameters};
use crate::{Error, Result, Rng};

/// One affine layer `f(Wᵀh + b)`.
///
/// `weights` has shape `d_in × d_out`. A frozen layer (`trainable == false`)
/// takes part in the forward and backward passes but exposes no parameters to
/// the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
    pub trainable: bool,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.ncols() != biases.len() {
            return Err(Error::invalid(format!(
                "layer has {} output columns but {} biases",
                weights.ncols(),
                biases.len()
            )));
        }
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::invalid("layer dimensions must be non-zero"));
        }
        ensure_finite(weights.iter().chain(biases.iter()), "layer parameters")?;
        Ok(Self {
            weights,
            biases,
            activation,
            trainable: true,
        })
    }

    /// Xavier-initialized weights, zero biases.
    pub fn xavier(d_in: usize, d_out: usize, activation: Activation, rng: &mut Rng) -> Result<Self> {
        let weights = xavier_init(d_in, d_out, rng)?;
        Self::new(weights, Array1::zeros(d_out), activation)
    }

    pub fn frozen(mut self) -> Self {
        self.trainable = false;
        self
    }

    pub fn d_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.weights.ncols()
    }

    fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = input.dot(&self.weights);
        out += &self.biases;
        if self.activation != Activation::Linear {
            let act = self.activation;
            out.mapv_inplace(|a| act.apply(a));
        }
        out
    }
}

/// Ordered stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    /// Seed used to initialize the weights, if known.
    pub seed: Option<u64>,
}

/// Activations recorded during a forward pass: `activations[0]` is the input,
/// `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    trainable: bool,
}

/// Gradient of a scalar loss with respect to every layer of a [`DenseNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrad {
    pub layers: Vec<LayerGrad>,
}

/// Supervised losses understood by [`DenseNetwork::gradients`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Batch mean of the squared Euclidean residual norm.
    Mse,
}

impl DenseNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].d_out() != pair[1].d_in() {
                return Err(Error::invalid(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].d_out(),
                    i + 1,
                    pair[1].d_in()
                )));
            }
        }
        Ok(Self { layers, seed: None })
    }

    /// Xavier-initialized network with `input_dim` inputs and the given
    /// `(width, activation)` layers.
    pub fn xavier(input_dim: usize, spec: &[(usize, Activation)], rng: &mut Rng) -> Result<Self> {
        let mut layers = Vec::with_capacity(spec.len());
        let mut d_in = input_dim;
        for &(width, act) in spec {
            layers.push(DenseLayer::xavier(d_in, width, act, rng)?);
            d_in = width;
        }
        Self::new(layers)
    }

    /// Like [`DenseNetwork::xavier`] but draws from a fresh generator for
    /// `seed` and records it.
    pub fn xavier_seeded(input_dim: usize, spec: &[(usize, Activation)], seed: u64) -> Result<Self> {
        let mut rng = crate::seeded_rng(seed, 0);
        let mut net = Self::xavier(input_dim, spec, &mut rng)?;
        net.seed = Some(seed);
        Ok(net)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].d_out()
    }

    /// Append a layer; its input width must match the current output width.
    pub fn push(&mut self, layer: DenseLayer) -> Result<()> {
        if layer.d_in() != self.output_dim() {
            return Err(Error::invalid(format!(
                "cannot append a {}-input layer after a {}-output network",
                layer.d_in(),
                self.output_dim()
            )));
        }
        self.layers.push(layer);
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(input.ncols())?;
        let mut h = self.layers[0].forward_batch(input);
        for layer in &self.layers[1..] {
            h = layer.forward_batch(h.view());
        }
        ensure_finite(h.iter(), "network output")?;
        Ok(h)
    }

    /// Forward pass that keeps every intermediate activation for
    /// [`DenseNetwork::backward`].
    pub fn forward_cached(&self, input: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.check_input(input.ncols())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for layer in &self.layers {
            let next = layer.forward_batch(activations[activations.len() - 1].view());
            activations.push(next);
        }
        ensure_finite(activations[activations.len() - 1].iter(), "network output")?;
        Ok(ForwardCache { activations })
    }

    /// Reverse-mode pass. `d_output` is the gradient of the loss w.r.t. the
    /// network output; returns parameter gradients and the gradient w.r.t. the
    /// input batch.
    pub fn backward(&self, cache: &ForwardCache, d_output: Array2<f64>) -> (NetworkGrad, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_output;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.activations[i + 1];
            if layer.activation != Activation::Linear {
                let act = layer.activation;
                ndarray::Zip::from(&mut delta)
                    .and(out)
                    .for_each(|d, &o| *d *= act.derivative_from_output(o));
            }
            let input = &cache.activations[i];
            // The product can come back column-major; buffers need row-major.
            let d_weights = input.t().dot(&delta).as_standard_layout().into_owned();
            let d_biases = delta.sum_axis(Axis(0));
            let d_input = delta.dot(&layer.weights.t());
            grads.push(LayerGrad {
                weights: d_weights,
                biases: d_biases,
                trainable: layer.trainable,
            });
            delta = d_input;
        }
        grads.reverse();
        (NetworkGrad { layers: grads }, delta)
    }

    /// Mean loss over the batch and its exact gradient.
    pub fn gradients(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        loss: Loss,
    ) -> Result<(f64, NetworkGrad)> {
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if targets.dim() != (n, self.output_dim()) {
            return Err(Error::invalid(format!(
                "targets have shape {:?}, expected ({n}, {})",
                targets.dim(),
                self.output_dim()
            )));
        }
        let cache = self.forward_cached(inputs)?;
        let residual = cache.output() - &targets;
        let value = match loss {
            Loss::Mse => residual.iter().map(|r| r * r).sum::<f64>() / n as f64,
        };
        let d_output = residual * (2.0 / n as f64);
        let (grad, _) = self.backward(&cache, d_output);
        Ok((value, grad))
    }

    pub fn mse(&self, inputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<f64> {
        let out = self.forward_batch(inputs)?;
        if out.dim() != targets.dim() {
            return Err(Error::invalid("targets do not match network output shape"));
        }
        let n = inputs.nrows().max(1) as f64;
        Ok((&out - &targets).iter().map(|r| r * r).sum::<f64>() / n)
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has {dim} features, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            seed: self.seed,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDocument {
                    d_in: l.d_in(),
                    d_out: l.d_out(),
                    activation: l.activation,
                    trainable: l.trainable,
                    weights: l.weights.iter().copied().collect(),
                    biases: l.biases.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &NetworkDocument) -> Result<Self> {
        let layers = doc
            .layers
            .iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.d_in, l.d_out), l.weights.clone())
                    .map_err(|e| Error::invalid(format!("layer weights: {e}")))?;
                if l.biases.len() != l.d_out {
                    return Err(Error::invalid("layer bias count does not match d_out"));
                }
                let mut layer = DenseLayer::new(weights, Array1::from(l.biases.clone()), l.activation)?;
                layer.trainable = l.trainable;
                Ok(layer)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut net = Self::new(layers)?;
        net.seed = doc.seed;
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// Persisted form of a layer: row-major weights followed by biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub d_in: usize,
    pub d_out: usize,
    pub activation: Activation,
    #[serde(default = "default_true")]
    pub trainable: bool,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub seed: Option<u64>,
    pub layers: Vec<LayerDocument>,
}

impl Parameters for DenseNetwork {
    fn buffers(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in self.layers.iter().filter(|l| l.trainable) {
            out.push(l.weights.as_slice().expect("standard layout"));
            out.push(l.biases.as_slice().expect("standard layout"));
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in self.layers.iter_mut().filter(|l| l.trainable) {
            out.push(l.weights.as_slice_mut().expect("standard layout"));
            out.push(l.biases.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

impl NetworkGrad {
    /// Gradient for `net` with every entry zero.
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: Array1::zeros(l.biases.len()),
                    trainable: l.trainable,
                })
                .collect(),
        }
    }

    /// `self += other`.
    pub fn accumulate(&mut self, other: &NetworkGrad) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.biases += &b.biases;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Parameters for NetworkGrad {
    fn buffers(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in self.layers.iter().filter(|l| l.trainable) {
            out.push(l.weights.as_slice().expect("standard layout"));
            out.push(l.biases.as_slice().expect("standard layout"));
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in self.layers.iter_mut().filter(|l| l.trainable) {
            out.push(l.weights.as_slice_mut().expect("standard layout"));
            out.push(l.biases.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn identity_layer(act: Activation, bias: f64) -> DenseLayer {
        DenseLayer::new(Array2::eye(2), Array1::from_elem(2, bias), act).unwrap()
    }

    #[test]
    fn identity_linear_layer() {
        let net = DenseNetwork::new(vec![identity_layer(Activation::Linear, 0.0)]).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn identity_relu_layer() {
        let net = DenseNetwork::new(vec![identity_layer(Activation::Relu, 0.0)]).unwrap();
        assert_eq!(net.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn two_shifted_identity_layers() {
        let net = DenseNetwork::new(vec![
            identity_layer(Activation::Linear, 1.0),
            identity_layer(Activation::Linear, 1.0),
        ])
        .unwrap();
        assert_eq!(net.forward(&[0.0, 0.0]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn mismatched_input_is_rejected() {
        let net = DenseNetwork::new(vec![identity_layer(Activation::Linear, 0.0)]).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0, 3.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mismatched_layers_are_rejected() {
        let a = DenseLayer::new(Array2::zeros((2, 3)), Array1::zeros(3), Activation::Relu).unwrap();
        let b = DenseLayer::new(Array2::zeros((2, 1)), Array1::zeros(1), Activation::Linear).unwrap();
        assert!(DenseNetwork::new(vec![a, b]).is_err());
    }

    #[test]
    fn exact_net_has_zero_gradient() {
        let net = DenseNetwork::new(vec![identity_layer(Activation::Linear, 0.5)]).unwrap();
        let x = array![[1.0, -2.0], [0.0, 3.0]];
        let y = &x + 0.5;
        let (loss, grad) = net.gradients(x.view(), y.view(), Loss::Mse).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.max_abs(), 0.0);
    }

    #[test]
    fn non_finite_output_is_numeric_error() {
        let layer = DenseLayer::new(array![[1e308], [1e308]], array![0.0], Activation::Linear).unwrap();
        let net = DenseNetwork::new(vec![layer]).unwrap();
        assert!(matches!(net.forward(&[10.0, 10.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn frozen_layers_expose_no_buffers() {
        let mut rng = crate::seeded_rng(0, 0);
        let mut net = DenseNetwork::xavier(3, &[(4, Activation::Relu)], &mut rng).unwrap();
        net.push(identity_layer(Activation::Linear, 0.0).frozen()).unwrap_err();
        let frozen = DenseLayer::new(Array2::eye(4), Array1::zeros(4), Activation::Linear)
            .unwrap()
            .frozen();
        net.push(frozen).unwrap();
        assert_eq!(net.buffers().len(), 2);
        let x = Array2::ones((2, 3));
        let (_, grad) = net.gradients(x.view(), Array2::zeros((2, 4)).view(), Loss::Mse).unwrap();
        assert_eq!(grad.buffers().len(), 2);
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let net = DenseNetwork::xavier_seeded(5, &[(3, Activation::Tanh), (2, Activation::Linear)], 17)
            .unwrap();
        let back = DenseNetwork::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.seed, Some(17));
    }
}

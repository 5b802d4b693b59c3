use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{MinMaxScaler, RadioMap, StdScaler};
use crate::nn::{self, Activation, DenseLayer, DenseNetwork, NetworkDocument, TrainConfig, TrainHistory};
use crate::{seeded_rng, Error, Result, Rng};

/// Hidden widths of the deep positioning model.
pub const DEFAULT_DLPM_HIDDEN: [usize; 3] = [128, 64, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Linear SNN on standardized coordinates; inverse scaling after the net.
    BmPost,
    /// The same SNN followed by a frozen affine layer performing the inverse
    /// scaling inside the network.
    BmBuiltIn,
    /// ReLU hidden layers pipelined with a linear SNN output layer.
    Dlpm,
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm-post" => Ok(Self::BmPost),
            "bm-builtin" | "bm-built-in" => Ok(Self::BmBuiltIn),
            "dlpm" => Ok(Self::Dlpm),
            other => Err(Error::invalid(format!("unknown baseline `{other}`"))),
        }
    }
}

/// Build the untrained network for `kind`.
///
/// `coord_scaler` is only used by [`BaselineKind::BmBuiltIn`], whose last
/// layer encodes `y = y_std ∘ σ + μ`.
pub fn build_baseline(
    kind: BaselineKind,
    n_ap: usize,
    d: usize,
    dlpm_hidden: &[usize],
    coord_scaler: &StdScaler,
    rng: &mut Rng,
) -> Result<DenseNetwork> {
    if n_ap == 0 || d == 0 {
        return Err(Error::invalid("baseline dimensions must be non-zero"));
    }
    match kind {
        BaselineKind::BmPost => DenseNetwork::xavier(n_ap, &[(d, Activation::Linear)], rng),
        BaselineKind::BmBuiltIn => {
            if coord_scaler.dim() != d {
                return Err(Error::invalid("coordinate scaler dimension does not match d"));
            }
            let mut net = DenseNetwork::xavier(n_ap, &[(d, Activation::Linear)], rng)?;
            let scale = Array2::from_diag(&Array1::from(coord_scaler.std.clone()));
            let shift = Array1::from(coord_scaler.mean.clone());
            net.push(DenseLayer::new(scale, shift, Activation::Linear)?.frozen())?;
            Ok(net)
        }
        BaselineKind::Dlpm => {
            if dlpm_hidden.is_empty() {
                return Err(Error::invalid("DLPM needs at least one hidden layer"));
            }
            let mut spec: Vec<(usize, Activation)> =
                dlpm_hidden.iter().map(|&w| (w, Activation::Relu)).collect();
            spec.push((d, Activation::Linear));
            DenseNetwork::xavier(n_ap, &spec, rng)
        }
    }
}

/// A baseline network together with the scalers fitted on its training map.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub network: DenseNetwork,
    pub rss_scaler: MinMaxScaler,
    pub coord_scaler: StdScaler,
}

impl BaselineModel {
    pub fn new(
        kind: BaselineKind,
        network: DenseNetwork,
        rss_scaler: MinMaxScaler,
        coord_scaler: StdScaler,
    ) -> Result<Self> {
        if network.input_dim() != rss_scaler.dim() || network.output_dim() != coord_scaler.dim() {
            return Err(Error::invalid("network does not match the attached scalers"));
        }
        Ok(Self {
            kind,
            network,
            rss_scaler,
            coord_scaler,
        })
    }

    /// Fit scalers on `rm`, build the network from `cfg.seed` and train it.
    pub fn fit(
        kind: BaselineKind,
        rm: &RadioMap,
        dlpm_hidden: &[usize],
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainHistory)> {
        let rss_scaler = MinMaxScaler::fit(rm.rss().view())?;
        let coord_scaler = StdScaler::fit(rm.coords().view())?;
        Self::fit_with_scalers(kind, rm, dlpm_hidden, cfg, rss_scaler, coord_scaler)
    }

    pub fn fit_with_scalers(
        kind: BaselineKind,
        rm: &RadioMap,
        dlpm_hidden: &[usize],
        cfg: &TrainConfig,
        rss_scaler: MinMaxScaler,
        coord_scaler: StdScaler,
    ) -> Result<(Self, TrainHistory)> {
        let mut rng = seeded_rng(cfg.seed, 0);
        let mut network = build_baseline(kind, rm.n_ap(), rm.dim(), dlpm_hidden, &coord_scaler, &mut rng)?;
        network.seed = Some(cfg.seed);
        let mut model = Self::new(kind, network, rss_scaler, coord_scaler)?;
        let history = model.train(rm, cfg)?;
        Ok((model, history))
    }

    /// Train in place on `rm` using the attached scalers.
    pub fn train(&mut self, rm: &RadioMap, cfg: &TrainConfig) -> Result<TrainHistory> {
        let x = self.rss_scaler.apply(rm.rss().view())?;
        let y = match self.kind {
            BaselineKind::BmBuiltIn => rm.coords().clone(),
            BaselineKind::BmPost | BaselineKind::Dlpm => self.coord_scaler.apply(rm.coords().view())?,
        };
        let (net, history) = nn::train(self.network.clone(), x.view(), y.view(), cfg)?;
        self.network = net;
        Ok(history)
    }

    /// Position for already-normalized fingerprints.
    pub fn predict_normalized(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let out = self.network.forward_batch(x)?;
        match self.kind {
            BaselineKind::BmBuiltIn => Ok(out),
            BaselineKind::BmPost | BaselineKind::Dlpm => self.coord_scaler.inverse(out.view()),
        }
    }

    /// Positions for raw (dBm) fingerprints, one per row.
    pub fn predict_batch(&self, rss_dbm: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let x = self.rss_scaler.apply(rss_dbm)?;
        self.predict_normalized(x.view())
    }

    pub fn predict(&self, rss_dbm: &[f64]) -> Result<Vec<f64>> {
        let x = self.rss_scaler.apply_row(rss_dbm)?;
        let x = ArrayView2::from_shape((1, x.len()), &x).expect("single row");
        Ok(self.predict_normalized(x)?.into_raw_vec_and_offset().0)
    }

    pub fn to_document(&self) -> BaselineDocument {
        BaselineDocument {
            kind: self.kind,
            network: self.network.to_document(),
            rss_scaler: self.rss_scaler.clone(),
            coord_scaler: self.coord_scaler.clone(),
        }
    }

    pub fn from_document(doc: &BaselineDocument) -> Result<Self> {
        Self::new(
            doc.kind,
            DenseNetwork::from_document(&doc.network)?,
            doc.rss_scaler.clone(),
            doc.coord_scaler.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDocument {
    pub kind: BaselineKind,
    pub network: NetworkDocument,
    pub rss_scaler: MinMaxScaler,
    pub coord_scaler: StdScaler,
}

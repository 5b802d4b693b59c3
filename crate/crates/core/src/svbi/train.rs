use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::latent::LatentMode;
use super::loss::{loss_with_noise, sample_noise, LossWeights};
use super::model::{SvbiArchitecture, SvbiGrad, SvbiModel};
use crate::data::{MinMaxScaler, RadioMap, StdScaler};
use crate::nn::{fit, Objective, OptimizerKind, TrainConfig, TrainHistory};
use crate::{Error, Result, Rng};

/// Training options of the variational model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvbiTrainConfig {
    pub train: TrainConfig,
    /// Monte Carlo samples per datum and step.
    pub n_mcs: usize,
    pub loss_weights: LossWeights,
    pub latent_mode: LatentMode,
    pub architecture: SvbiArchitecture,
}

impl Default for SvbiTrainConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                optimizer: OptimizerKind::RmsProp,
                ..TrainConfig::default()
            },
            n_mcs: 1,
            loss_weights: LossWeights::default(),
            latent_mode: LatentMode::Diagonal,
            architecture: SvbiArchitecture::default(),
        }
    }
}

impl SvbiTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.n_mcs == 0 {
            return Err(Error::invalid("n_mcs must be at least 1"));
        }
        self.loss_weights.validate()?;
        self.architecture.validate()
    }
}

struct SvbiObjective {
    x: Array2<f64>,
    y: Array2<f64>,
    weights: LossWeights,
    n_mcs: usize,
    d_man: usize,
}

impl SvbiObjective {
    fn run(&self, model: &SvbiModel, rows: &[usize], rng: &mut Rng, want_grad: bool) -> Result<(f64, Option<SvbiGrad>)> {
        let x = self.x.select(Axis(0), rows);
        let y = self.y.select(Axis(0), rows);
        let noise = sample_noise(rows.len(), self.d_man, self.n_mcs, rng);
        let (b, g) = loss_with_noise(model, x.view(), y.view(), &noise, self.weights, want_grad)?;
        Ok((b.total, g))
    }
}

impl Objective<SvbiModel> for SvbiObjective {
    type Grad = SvbiGrad;

    fn loss_grad(&mut self, model: &SvbiModel, rows: &[usize], rng: &mut Rng) -> Result<(f64, SvbiGrad)> {
        let (v, g) = self.run(model, rows, rng, true)?;
        Ok((v, g.expect("gradient requested")))
    }

    fn loss(&mut self, model: &SvbiModel, rows: &[usize], rng: &mut Rng) -> Result<f64> {
        Ok(self.run(model, rows, rng, false)?.0)
    }
}

/// Fit scalers on `rm`, build a model from `cfg.train.seed` and train it on
/// the weighted loss. Each RP row is one training example.
fn train_with(rm: &RadioMap, cfg: &SvbiTrainConfig, weights: LossWeights, with_rss_path: bool) -> Result<(SvbiModel, TrainHistory)> {
    cfg.validate()?;
    weights.validate()?;
    let rss_scaler = MinMaxScaler::fit(rm.rss().view())?;
    let coord_scaler = StdScaler::fit(rm.coords().view())?;
    let mut model = SvbiModel::new(
        &cfg.architecture,
        cfg.latent_mode,
        rss_scaler,
        coord_scaler,
        with_rss_path,
        cfg.train.seed,
    )?;
    let history = train_model(&mut model, rm, cfg, weights)?;
    Ok((model, history))
}

/// Train an existing model in place with its attached scalers.
pub fn train_model(model: &mut SvbiModel, rm: &RadioMap, cfg: &SvbiTrainConfig, weights: LossWeights) -> Result<TrainHistory> {
    cfg.validate()?;
    weights.validate()?;
    if model.n_ap() != rm.n_ap() || model.coord_dim() != rm.dim() {
        return Err(Error::invalid("radio map does not match the model dimensions"));
    }
    let mut objective = SvbiObjective {
        x: model.rss_scaler.apply(rm.rss().view())?,
        y: model.coord_scaler.apply(rm.coords().view())?,
        weights,
        n_mcs: cfg.n_mcs,
        d_man: model.d_man(),
    };
    fit(model, rm.n_rp(), &cfg.train, &mut objective)
}

/// Position path only: recognition module, coder and position decoder.
/// `cfg.loss_weights.rss` is ignored.
pub fn train_separate(rm: &RadioMap, cfg: &SvbiTrainConfig) -> Result<(SvbiModel, TrainHistory)> {
    let weights = LossWeights {
        pos: cfg.loss_weights.pos,
        rss: 0.0,
    };
    train_with(rm, cfg, weights, false)
}

/// Both generative paths trained simultaneously through the shared
/// recognition module.
pub fn train_joint(rm: &RadioMap, cfg: &SvbiTrainConfig) -> Result<(SvbiModel, TrainHistory)> {
    train_with(rm, cfg, cfg.loss_weights, true)
}

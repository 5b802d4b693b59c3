use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DenseNetwork, Loss, NetworkGrad, Optimizer, OptimizerKind};
use crate::{seeded_rng, Error, Result, Rng};

const SPLIT_STREAM: u64 = 1;
const EPOCH_STREAM: u64 = 2;

/// Anything exposing its trainable parameters as flat buffers in a fixed order.
///
/// Gradient containers implement the same trait, with buffers aligned to the
/// model they were computed for.
pub trait Parameters {
    fn buffers(&self) -> Vec<&[f64]>;
    fn buffers_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.buffers().concat()
    }
}

/// A training objective over row indices of some dataset the objective owns.
pub trait Objective<M> {
    type Grad: Parameters;

    /// Mean loss over `rows` and its gradient.
    fn loss_grad(&mut self, model: &M, rows: &[usize], rng: &mut Rng) -> Result<(f64, Self::Grad)>;

    /// Mean loss over `rows`, without gradients.
    fn loss(&mut self, model: &M, rows: &[usize], rng: &mut Rng) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Consecutive non-improving validation epochs tolerated before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            patience: 25,
            max_epochs: 1000,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be at least 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation_fraction must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    /// Monitored loss per epoch (validation rows, or training rows when the
    /// dataset is too small to hold any out).
    pub val_loss: Vec<f64>,
    /// Number of epochs run; epochs are counted from 1.
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch - 1]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,best\n");
        for (i, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            let epoch = i + 1;
            out.push_str(&format!("{epoch},{t},{v},{}\n", u8::from(epoch == self.best_epoch)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Patience bookkeeping over a sequence of monitored losses.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    failures: usize,
    epoch: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            failures: 0,
            epoch: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> StopDecision {
        self.epoch += 1;
        if loss < self.best {
            self.best = loss;
            self.best_epoch = self.epoch;
            self.failures = 0;
            return StopDecision::Improved;
        }
        self.failures += 1;
        if self.failures >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Seeded shuffle of `0..n` into (train, validation) index sets.
///
/// With fewer rows than needed to hold one out, validation is empty.
pub fn split_train_validation(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed, SPLIT_STREAM));
    let n_val = ((n as f64) * fraction).round() as usize;
    let n_val = if n_val >= n { n.saturating_sub(1) } else { n_val };
    let train = idx.split_off(n_val);
    (train, idx)
}

/// Mini-batch training loop with early stopping. On return `model` holds the
/// parameters of the best monitored epoch.
pub fn fit<M, O>(model: &mut M, n_rows: usize, cfg: &TrainConfig, objective: &mut O) -> Result<TrainHistory>
where
    M: Parameters + Clone,
    O: Objective<M>,
{
    cfg.validate()?;
    if n_rows == 0 {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let (mut train_rows, val_rows) = split_train_validation(n_rows, cfg.validation_fraction, cfg.seed);
    if val_rows.is_empty() {
        log::warn!("{n_rows} rows are too few for a validation split; monitoring training loss");
    }
    let mut rng = seeded_rng(cfg.seed, EPOCH_STREAM);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut history = TrainHistory::default();
    let mut best = model.clone();

    for _ in 0..cfg.max_epochs {
        train_rows.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_rows.chunks(cfg.batch_size) {
            let (loss, grad) = objective.loss_grad(model, batch, &mut rng)?;
            optimizer.step(model.buffers_mut(), grad.buffers())?;
            total += loss * batch.len() as f64;
        }
        history.train_loss.push(total / train_rows.len() as f64);

        let monitored = if val_rows.is_empty() {
            objective.loss(model, &train_rows, &mut rng)?
        } else {
            objective.loss(model, &val_rows, &mut rng)?
        };
        if !monitored.is_finite() {
            return Err(Error::numeric("monitored loss became non-finite"));
        }
        history.val_loss.push(monitored);
        let decision = stopper.observe(monitored);
        if decision == StopDecision::Improved {
            best.clone_from(model);
        }
        if decision == StopDecision::Stop {
            break;
        }
    }
    history.stopped_epoch = history.val_loss.len();
    history.best_epoch = stopper.best_epoch();
    *model = best;
    Ok(history)
}

/// Supervised squared-error objective for a plain [`DenseNetwork`].
struct MseObjective<'a> {
    inputs: ArrayView2<'a, f64>,
    targets: ArrayView2<'a, f64>,
}

impl MseObjective<'_> {
    fn gather(&self, rows: &[usize]) -> (Array2<f64>, Array2<f64>) {
        (self.inputs.select(Axis(0), rows), self.targets.select(Axis(0), rows))
    }
}

impl Objective<DenseNetwork> for MseObjective<'_> {
    type Grad = NetworkGrad;

    fn loss_grad(&mut self, net: &DenseNetwork, rows: &[usize], _: &mut Rng) -> Result<(f64, NetworkGrad)> {
        let (x, y) = self.gather(rows);
        net.gradients(x.view(), y.view(), Loss::Mse)
    }

    fn loss(&mut self, net: &DenseNetwork, rows: &[usize], _: &mut Rng) -> Result<f64> {
        let (x, y) = self.gather(rows);
        net.mse(x.view(), y.view())
    }
}

/// Train `net` on `(inputs, targets)` with the MSE loss.
pub fn train(
    mut net: DenseNetwork,
    inputs: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
) -> Result<(DenseNetwork, TrainHistory)> {
    if inputs.nrows() == 0 {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if inputs.nrows() != targets.nrows() {
        return Err(Error::invalid("inputs and targets have different row counts"));
    }
    if targets.ncols() != net.output_dim() {
        return Err(Error::invalid("target width does not match network output"));
    }
    let mut objective = MseObjective { inputs, targets };
    let history = fit(&mut net, inputs.nrows(), cfg, &mut objective)?;
    Ok((net, history))
}

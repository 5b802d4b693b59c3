use std::path::Path;

use serde::{Deserialize, Serialize};

use fwips_core::baselines::{KnnConfig, DEFAULT_DLPM_HIDDEN};
use fwips_core::nn::TrainConfig;
use fwips_core::sim::Scenario;
use fwips_core::svbi::{GenerationMode, LossWeights, SvbiTrainConfig};

use crate::{CliError, Result};

/// Model families the pipeline can train and evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Knn,
    BmPost,
    #[serde(alias = "bm-built-in")]
    #[value(alias = "bm-built-in")]
    BmBuiltin,
    Dlpm,
    SvbiSep,
    SvbiJoint,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::BmPost => "bm-post",
            ModelKind::BmBuiltin => "bm-builtin",
            ModelKind::Dlpm => "dlpm",
            ModelKind::SvbiSep => "svbi-sep",
            ModelKind::SvbiJoint => "svbi-joint",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub noise_scale: f64,
    pub mode: GenerationMode,
    /// Rows to draw in prior-sample mode (0: as many as the source map).
    pub n_points: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            noise_scale: 1.0,
            mode: GenerationMode::PosteriorJitter,
            n_points: 0,
        }
    }
}

/// Reconstruction weights of the pipeline preset. With unit weights the KL
/// term dominates on standardized coordinates: the optimum of the bound keeps
/// roughly half of the target variance as error. A weight `w` corresponds to
/// a Gaussian likelihood with variance `1 / (2w)`; 50 gives a std of 0.1 in
/// scaled units on both paths.
pub const EXPERIMENT_LOSS_WEIGHTS: LossWeights = LossWeights { pos: 50.0, rss: 50.0 };

fn svbi_preset() -> SvbiTrainConfig {
    SvbiTrainConfig {
        loss_weights: EXPERIMENT_LOSS_WEIGHTS,
        ..SvbiTrainConfig::default()
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn svbi_over_preset<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<SvbiTrainConfig, D::Error> {
    use serde::de::Error as _;
    let over = toml::Table::deserialize(d)?;
    let mut base = toml::Table::try_from(svbi_preset()).map_err(D::Error::custom)?;
    merge(&mut base, over);
    toml::Value::Table(base).try_into().map_err(D::Error::custom)
}

/// Everything a pipeline run needs; loaded from TOML and overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub repeats: usize,
    pub model: ModelKind,
    pub scenario: Scenario,
    /// Training options of the neural baselines.
    pub train: TrainConfig,
    /// Keys given in the file override the preset, including nested ones.
    #[serde(deserialize_with = "svbi_over_preset")]
    pub svbi: SvbiTrainConfig,
    pub knn: KnnConfig,
    pub dlpm_hidden: Vec<usize>,
    pub generate: GenerateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            repeats: 36,
            model: ModelKind::SvbiJoint,
            scenario: Scenario::default(),
            train: TrainConfig::default(),
            svbi: svbi_preset(),
            knn: KnnConfig::default(),
            dlpm_hidden: DEFAULT_DLPM_HIDDEN.to_vec(),
            generate: GenerateConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(CliError::Config("repeats must be at least 1".into()));
        }
        if self.knn.k == 0 {
            return Err(CliError::Config("knn.k must be at least 1".into()));
        }
        self.train.validate()?;
        self.svbi.validate()?;
        Ok(())
    }

    /// Baseline training options for run seed `seed`.
    pub fn train_for(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    pub fn svbi_for(&self, seed: u64) -> SvbiTrainConfig {
        let mut cfg = self.svbi.clone();
        cfg.train.seed = seed;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = PipelineConfig::from_toml("seed = 7\nmodel = \"dlpm\"\n[train]\nmax_epochs = 10\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model, ModelKind::Dlpm);
        assert_eq!(cfg.train.max_epochs, 10);
        assert_eq!(cfg.train.batch_size, 50);
        assert_eq!(cfg.repeats, 36);
    }

    #[test]
    fn partial_svbi_section_keeps_preset_weights() {
        let cfg = PipelineConfig::from_toml("[svbi]\nn_mcs = 2\n[svbi.train]\nmax_epochs = 3\n").unwrap();
        assert_eq!(cfg.svbi.n_mcs, 2);
        assert_eq!(cfg.svbi.train.max_epochs, 3);
        assert_eq!(cfg.svbi.train.optimizer, fwips_core::nn::OptimizerKind::RmsProp);
        assert_eq!(cfg.svbi.loss_weights, EXPERIMENT_LOSS_WEIGHTS);
        let cfg = PipelineConfig::from_toml("[svbi.loss_weights]\npos = 1.0\nrss = 0.0\n").unwrap();
        assert_eq!(cfg.svbi.loss_weights, LossWeights::POSITION_ONLY);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(PipelineConfig::from_toml("repeats = 0").is_err());
        assert!(PipelineConfig::from_toml("model = \"svm\"").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
    }
}

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use fwips_core::baselines::{BaselineDocument, BaselineKind, BaselineModel, KnnConfig, KnnPositioner};
use fwips_core::data::{load_radio_map, RadioMap, TestSet};
use fwips_core::eval::{default_thresholds, positioning_errors, rss_error, rmse, compare_rm, EvalReport, RmComparison};
use fwips_core::nn::TrainHistory;
use fwips_core::sim::{self, Environment};
use fwips_core::svbi::{self, SvbiDocument, SvbiModel};
use fwips_core::seeded_rng;

use crate::{CliError, ModelKind, PipelineConfig, Result};

pub const RADIO_MAP_FILE: &str = "radio_map.csv";
pub const TEST_SET_FILE: &str = "test_set.csv";
pub const ENVIRONMENT_FILE: &str = "environment.json";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const GENERATED_FILE: &str = "generated_rm.csv";
pub const COMPARISON_FILE: &str = "rm_comparison.csv";

const GENERATION_STREAM: u64 = 7;

/// A fitted positioning model of any supported kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Knn(KnnPositioner),
    Baseline(BaselineModel),
    Svbi { joint: bool, model: SvbiModel },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::Baseline(m) => match m.kind {
                BaselineKind::BmPost => ModelKind::BmPost,
                BaselineKind::BmBuiltIn => ModelKind::BmBuiltin,
                BaselineKind::Dlpm => ModelKind::Dlpm,
            },
            TrainedModel::Svbi { joint: true, .. } => ModelKind::SvbiJoint,
            TrainedModel::Svbi { joint: false, .. } => ModelKind::SvbiSep,
        }
    }

    /// Positions (metres) for raw fingerprints, one per row.
    pub fn predict(&self, rss_dbm: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(match self {
            TrainedModel::Knn(knn) => knn.predict_batch(rss_dbm)?,
            TrainedModel::Baseline(m) => m.predict_batch(rss_dbm.view())?,
            TrainedModel::Svbi { model, .. } => svbi::predict_positions(model, rss_dbm.view())?,
        })
    }
}

fn baseline_kind(kind: ModelKind) -> Option<BaselineKind> {
    match kind {
        ModelKind::BmPost => Some(BaselineKind::BmPost),
        ModelKind::BmBuiltin => Some(BaselineKind::BmBuiltIn),
        ModelKind::Dlpm => Some(BaselineKind::Dlpm),
        _ => None,
    }
}

/// Fit a model of `kind` on `rm` with run seed `seed`.
pub fn fit_model(kind: ModelKind, rm: &RadioMap, cfg: &PipelineConfig, seed: u64) -> Result<(TrainedModel, Option<TrainHistory>)> {
    if let Some(b) = baseline_kind(kind) {
        let (m, h) = BaselineModel::fit(b, rm, &cfg.dlpm_hidden, &cfg.train_for(seed))?;
        return Ok((TrainedModel::Baseline(m), Some(h)));
    }
    Ok(match kind {
        ModelKind::Knn => (TrainedModel::Knn(KnnPositioner::fit(rm, cfg.knn)?), None),
        ModelKind::SvbiSep => {
            let (model, h) = svbi::train_separate(rm, &cfg.svbi_for(seed))?;
            (TrainedModel::Svbi { joint: false, model }, Some(h))
        }
        ModelKind::SvbiJoint => {
            let (model, h) = svbi::train_joint(rm, &cfg.svbi_for(seed))?;
            (TrainedModel::Svbi { joint: true, model }, Some(h))
        }
        _ => unreachable!("baselines handled above"),
    })
}

/// Persisted model file. kNN stores only its configuration and a reference
/// to the radio map it searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelDocument {
    Knn { config: KnnConfig, radio_map: PathBuf },
    Baseline { document: BaselineDocument },
    SvbiSep { document: SvbiDocument },
    SvbiJoint { document: SvbiDocument },
}

pub fn model_document(model: &TrainedModel, radio_map: &Path) -> ModelDocument {
    match model {
        TrainedModel::Knn(knn) => ModelDocument::Knn {
            config: knn.config,
            radio_map: radio_map.to_path_buf(),
        },
        TrainedModel::Baseline(m) => ModelDocument::Baseline {
            document: m.to_document(),
        },
        TrainedModel::Svbi { joint: true, model } => ModelDocument::SvbiJoint {
            document: model.to_document(),
        },
        TrainedModel::Svbi { joint: false, model } => ModelDocument::SvbiSep {
            document: model.to_document(),
        },
    }
}

pub fn save_model(model: &TrainedModel, radio_map: &Path, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&model_document(model, radio_map))?;
    write_file(path, &(text + "\n"))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: ModelDocument = serde_json::from_str(&text)?;
    Ok(match doc {
        ModelDocument::Knn { config, radio_map } => TrainedModel::Knn(KnnPositioner::fit(&load_radio_map(&radio_map)?, config)?),
        ModelDocument::Baseline { document } => TrainedModel::Baseline(BaselineModel::from_document(&document)?),
        ModelDocument::SvbiSep { document } => TrainedModel::Svbi {
            joint: false,
            model: SvbiModel::from_document(&document)?,
        },
        ModelDocument::SvbiJoint { document } => TrainedModel::Svbi {
            joint: true,
            model: SvbiModel::from_document(&document)?,
        },
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Radio map and test set from a directory written by `simulate`.
pub fn load_data(data_dir: &Path) -> Result<(RadioMap, TestSet)> {
    Ok((
        load_radio_map(data_dir.join(RADIO_MAP_FILE))?,
        load_radio_map(data_dir.join(TEST_SET_FILE))?,
    ))
}

/// Build the synthetic scenario and write the radio map, test set and
/// environment into `out` (created if missing).
pub fn cmd_simulate(cfg: &PipelineConfig, out: &Path) -> Result<(Environment, RadioMap, TestSet)> {
    let (env, rm, test) = sim::simulate(&cfg.scenario, cfg.seed)?;
    ensure_dir(out)?;
    rm.save(out.join(RADIO_MAP_FILE))?;
    test.save(out.join(TEST_SET_FILE))?;
    env.save(out.join(ENVIRONMENT_FILE))?;
    log::info!("simulated {} RPs and {} test points into {}", rm.n_rp(), test.n_rp(), out.display());
    Ok((env, rm, test))
}

/// Train `cfg.model` on the radio map in `data_dir`; writes the model file and,
/// for trained kinds, the loss history.
pub fn cmd_train(cfg: &PipelineConfig, data_dir: &Path, out: &Path) -> Result<TrainedModel> {
    let rm_path = data_dir.join(RADIO_MAP_FILE);
    let rm = load_radio_map(&rm_path)?;
    let (model, history) = fit_model(cfg.model, &rm, cfg, cfg.seed)?;
    ensure_dir(out)?;
    save_model(&model, &rm_path, &out.join(MODEL_FILE))?;
    if let Some(h) = history {
        write_file(&out.join(HISTORY_FILE), &h.to_csv())?;
        log::info!(
            "{}: stopped after {} epochs, best epoch {} (val loss {:.6})",
            cfg.model,
            h.stopped_epoch,
            h.best_epoch,
            h.best_val_loss()
        );
    }
    Ok(model)
}

/// Positioning errors (and RSS errors for models with an RSS path) of one model.
fn run_errors(model: &TrainedModel, test: &TestSet) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let pred = model.predict(test.rss())?;
    let errors = positioning_errors(pred.view(), test.coords().view())?;
    let rss = match model {
        TrainedModel::Svbi { joint: true, model } => {
            let mut out = Vec::with_capacity(test.n_rp());
            for i in 0..test.n_rp() {
                let x = test.rss_row(i).to_vec();
                out.push(rss_error(&x, &svbi::estimate_rss(model, &x)?)?);
            }
            Some(out)
        }
        _ => None,
    };
    Ok((errors, rss))
}

/// Train and test `kind` `cfg.repeats` times with seeds `cfg.seed + i`. kNN is
/// deterministic, so it is evaluated once.
pub fn evaluate_kind(kind: ModelKind, rm: &RadioMap, test: &TestSet, cfg: &PipelineConfig) -> Result<EvalReport> {
    let repeats = if kind == ModelKind::Knn { 1 } else { cfg.repeats };
    let mut runs = Vec::with_capacity(repeats);
    let mut rss_errors = Vec::new();
    for i in 0..repeats {
        let seed = cfg.seed.wrapping_add(i as u64);
        let (model, _) = fit_model(kind, rm, cfg, seed)?;
        let (errors, rss) = run_errors(&model, test)?;
        log::info!("{kind} run {i} (seed {seed}): rmse {:.4} m", rmse(&errors));
        runs.push(errors);
        rss_errors.extend(rss.unwrap_or_default());
    }
    let mut report = EvalReport::from_runs(&runs, &default_thresholds())?;
    if !rss_errors.is_empty() {
        report.rss_error_mean = Some(rss_errors.iter().sum::<f64>() / rss_errors.len() as f64);
        report.rss_error_rmse = Some(rmse(&rss_errors));
    }
    Ok(report)
}

pub fn eval_file_name(kind: ModelKind) -> String {
    format!("eval_{kind}.csv")
}

/// Evaluate either a persisted model (single run) or `cfg.model` retrained
/// `cfg.repeats` times; writes `eval_<kind>.csv` into `out`.
pub fn cmd_evaluate(cfg: &PipelineConfig, data_dir: &Path, model_file: Option<&Path>, out: &Path) -> Result<EvalReport> {
    let (rm, test) = load_data(data_dir)?;
    let (kind, report) = match model_file {
        Some(path) => {
            let model = load_model(path)?;
            let (errors, rss) = run_errors(&model, &test)?;
            let mut report = EvalReport::from_runs(&[errors], &default_thresholds())?;
            if let Some(r) = rss {
                report.rss_error_mean = Some(r.iter().sum::<f64>() / r.len() as f64);
                report.rss_error_rmse = Some(rmse(&r));
            }
            (model.kind(), report)
        }
        None => (cfg.model, evaluate_kind(cfg.model, &rm, &test, cfg)?),
    };
    ensure_dir(out)?;
    write_file(&out.join(eval_file_name(kind)), &report.to_csv())?;
    log::info!("{kind}: rmse {:.4} ± {:.4} m", report.rmse, report.ci95);
    Ok(report)
}

/// Generate a radio map from a trained joint model and compare kNN positioning
/// on the test set against the original map.
pub fn cmd_generate_rm(cfg: &PipelineConfig, data_dir: &Path, model_file: &Path, out: &Path) -> Result<(RadioMap, RmComparison)> {
    let (rm, test) = load_data(data_dir)?;
    let model = match load_model(model_file)? {
        TrainedModel::Svbi { model, .. } => model,
        other => {
            return Err(CliError::Core(fwips_core::Error::InvalidState(format!(
                "{} models cannot generate radio maps",
                other.kind()
            ))))
        }
    };
    let generated = generate(&model, &rm, cfg)?;
    let cmp = compare_rm(&rm, &generated, &test, cfg.knn, &default_thresholds())?;
    ensure_dir(out)?;
    generated.save(out.join(GENERATED_FILE))?;
    write_file(&out.join(COMPARISON_FILE), &cmp.to_csv())?;
    log::info!("generated {} rows; max CPA gap {:.4}", generated.n_rp(), cmp.max_gap);
    Ok((generated, cmp))
}

/// Radio map generated with the `[generate]` options and the master seed.
pub fn generate(model: &SvbiModel, source: &RadioMap, cfg: &PipelineConfig) -> Result<RadioMap> {
    let g = &cfg.generate;
    let n_points = if g.n_points == 0 { source.n_rp() } else { g.n_points };
    let mut rng = seeded_rng(cfg.seed, GENERATION_STREAM);
    Ok(svbi::generate_radio_map(model, source, g.noise_scale, g.mode, n_points, &mut rng)?)
}

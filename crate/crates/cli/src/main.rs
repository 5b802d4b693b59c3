use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fwips_cli::{pipeline, ModelKind, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "fwips", version, about = "WiFi fingerprint positioning and radio-map generation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model kind.
    #[arg(long, value_enum, global = true)]
    model: Option<ModelKind>,
    /// Number of evaluation repeats.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic radio map, test set and environment file.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on `<data>/radio_map.csv`.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory holding radio_map.csv and test_set.csv.
        #[arg(long, default_value = "out")]
        data: PathBuf,
    },
    /// Evaluate a model kind over repeated runs, or a saved model once.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        data: PathBuf,
        /// Saved model to evaluate instead of retraining.
        #[arg(long)]
        model_file: Option<PathBuf>,
    },
    /// Generate a radio map from a trained joint model and compare it.
    GenerateRm {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        data: PathBuf,
        #[arg(long)]
        model_file: PathBuf,
    },
}

fn config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(model) = common.model {
        cfg.model = model;
    }
    if let Some(r) = common.repeats {
        cfg.repeats = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            pipeline::cmd_simulate(&config(&common)?, &common.out)?;
        }
        Command::Train { common, data } => {
            pipeline::cmd_train(&config(&common)?, &data, &common.out)?;
        }
        Command::Evaluate { common, data, model_file } => {
            let report = pipeline::cmd_evaluate(&config(&common)?, &data, model_file.as_deref(), &common.out)?;
            println!("rmse {:.4} m ± {:.4} (95% CI)", report.rmse, report.ci95);
        }
        Command::GenerateRm { common, data, model_file } => {
            let (_, cmp) = pipeline::cmd_generate_rm(&config(&common)?, &data, &model_file, &common.out)?;
            println!("max CPA gap {:.4}", cmp.max_gap);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crossview::commands::{cmd_ablate, cmd_embed_export, cmd_synth, cmd_train, default_threads, AblationGrid};
use crossview::config::{load_run_config, parse_encoder, parse_gnn};
use crossview::{CliError, Result};
use crossview_core::pipeline::{SplitMode, SynthConfig, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "crossview", version, about = "Cross-view graph fusion classifier for imaging plus clinical data")]
struct Cli {
    /// Seed for data generation or training; overrides the config file.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,

    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic two-class cohort as a dataset bundle.
    Synth(SynthArgs),
    /// Cross-validate on a bundle and write metrics, curves and checkpoints.
    Train(TrainArgs),
    /// Sweep gnn × backbone × beta × delta and tabulate metrics.
    Ablate(AblateArgs),
    /// Export fused embeddings and the similarity matrix of a checkpoint.
    EmbedExport(ExportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    /// Fraction of labels flipped.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 16)]
    image_size: usize,
    #[arg(long, default_value_t = 12)]
    n_clinical: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset bundle directory.
    #[arg(long)]
    data: PathBuf,
    /// Use one stratified split with this many test patients instead of k-fold.
    #[arg(long)]
    holdout: Option<usize>,
    /// Worker threads for folds (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "gat,gcn")]
    gnn: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "identity,dense,conv")]
    backbone: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    delta: Vec<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

fn train_config(cli: &Cli) -> Result<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_run_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Synth(a) => {
            let cfg = SynthConfig {
                n: a.n,
                image_size: a.image_size,
                n_clinical: a.n_clinical,
                separation: a.separation,
                label_noise: a.noise,
                seed: cli.seed.unwrap_or(SynthConfig::default().seed),
            };
            let b = cmd_synth(&cfg, out)?;
            println!("wrote {} patients to {}", b.data.n(), out.display());
        }
        Command::Train(a) => {
            let mut cfg = train_config(cli)?;
            if let Some(test_size) = a.holdout {
                cfg.split = SplitMode::Holdout { test_size };
            }
            let r = cmd_train(&a.data, &cfg, out, a.threads.unwrap_or_else(default_threads))?;
            let m = &r.metrics;
            println!("accuracy {:.4}", m.pooled.accuracy);
            if let Some(auc) = m.pooled.auc {
                println!("pooled auc {auc:.4}");
            }
            if let Some(auc) = m.fold_auc_mean {
                println!("mean fold auc {auc:.4}");
            }
            println!("reports in {}", out.display());
        }
        Command::Ablate(a) => {
            let cfg = train_config(cli)?;
            let grid = AblationGrid {
                gnn: parse_list(&a.gnn, parse_gnn)?,
                backbone: parse_list(&a.backbone, parse_encoder)?,
                beta: a.beta.clone(),
                delta: a.delta.clone(),
            };
            let cells = cmd_ablate(&a.data, &cfg, &grid, out, a.threads.unwrap_or_else(default_threads))?;
            let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
            println!("{} cells, {failed} failed; table in {}", cells.len(), out.display());
        }
        Command::EmbedExport(a) => {
            let p = cmd_embed_export(&a.checkpoint, &a.data, out)?;
            println!("{}\n{}", p.embeddings.display(), p.similarity.display());
        }
    }
    Ok(())
}

fn parse_list<T>(items: &[String], parse: fn(&str) -> std::result::Result<T, String>) -> Result<Vec<T>> {
    items.iter().map(|s| parse(s.trim()).map_err(CliError::Usage)).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

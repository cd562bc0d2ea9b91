use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use mdt_core::harness::{self, RunConfig, RunMode};

#[derive(Parser)]
#[command(name = "mdt", version, about = "Multi-agent medical consultation benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one dataset as described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured mode (train, test, vanilla).
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        sequential: bool,
    },
    /// Six-cell transfer matrix: each dataset with no KB, KB A and KB B.
    Cross {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        #[arg(long)]
        kb_a: PathBuf,
        #[arg(long)]
        kb_b: PathBuf,
        /// Write matrix.json and matrix.csv here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train run that records a learning curve every N cases.
    Curve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        checkpoint_every: usize,
    },
    /// Knowledge-base bundles.
    Kb {
        #[command(subcommand)]
        action: KbAction,
    },
}

#[derive(Subcommand)]
enum KbAction {
    Export {
        #[arg(long)]
        kb_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Import {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        kb_dir: PathBuf,
    },
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Run {
            config,
            mode,
            limit,
            sequential,
        } => {
            let mut cfg = load(&config)?;
            if let Some(m) = mode {
                cfg.mode = serde_json::from_value::<RunMode>(serde_json::Value::String(m.clone()))
                    .with_context(|| format!("unknown mode {m:?}"))?;
            }
            if limit.is_some() {
                cfg.limit = limit;
            }
            cfg.sequential |= sequential;
            let out = harness::run(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&out.metrics)?);
        }
        Command::Cross {
            config_a,
            config_b,
            kb_a,
            kb_b,
            out,
        } => {
            let (a, b) = (load(&config_a)?, load(&config_b)?);
            let backend = harness::build_backend(&a)?;
            let matrix = harness::cross_dataset(&a, &b, &kb_a, &kb_b, backend.as_ref())?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("matrix.json"), serde_json::to_string_pretty(&matrix)?)?;
                    std::fs::write(dir.join("matrix.csv"), matrix.to_csv())?;
                }
                None => print!("{}", matrix.to_csv()),
            }
        }
        Command::Curve {
            config,
            checkpoint_every,
        } => {
            let mut cfg = load(&config)?;
            cfg.mode = RunMode::Train;
            cfg.checkpoint_every = checkpoint_every;
            let out = harness::run(&cfg)?;
            print!("{}", out.curve_csv());
        }
        Command::Kb { action } => match action {
            KbAction::Export { kb_dir, out } => {
                let n = harness::export_bundle(&kb_dir, &out)?;
                println!("exported {} correct and {} chain entries", n.correct, n.chain);
            }
            KbAction::Import { bundle, kb_dir } => {
                let n = harness::import_bundle(&bundle, &kb_dir)?;
                println!("imported {} correct and {} chain entries", n.correct, n.chain);
            }
        },
    }
    Ok(())
}

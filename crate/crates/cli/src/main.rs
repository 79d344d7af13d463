//! `mmgnn`: train, analyse and verify mix-moment graph neural networks.
//!
//! Exit codes: 0 on success, 1 for usage, configuration and data errors,
//! 2 for numeric failures (divergence, non-finite values, failed gradient
//! check).

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mmgnn_core::graph::SplitPolicy;
use mmgnn_core::{FusionMode, MomentKind, SyntheticSpec};

use crate::commands::{AnalyzeArgs, NumericFailure, SynthArgs};
use crate::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "mmgnn", version, about = "Mix-moment graph neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct OverrideArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded repetitions.
    #[arg(long)]
    repeats: Option<usize>,
    /// Largest moment order; disables any order search.
    #[arg(long)]
    k: Option<u32>,
    /// Moment kind: origin or central.
    #[arg(long)]
    moment: Option<MomentKind>,
    /// Fusion: attention, mlp, mean or single:K.
    #[arg(long)]
    fusion: Option<FusionMode>,
    /// Mutual-information bin count.
    #[arg(long)]
    bins: Option<usize>,
    /// Norm order of the complexity measure.
    #[arg(long)]
    p: Option<f64>,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            repeats: self.repeats,
            k: self.k,
            moment: self.moment,
            fusion: self.fusion,
            bins: self.bins,
            p: self.p,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train, evaluate and summarise attention.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: OverrideArgs,
    },
    /// Neighbourhood statistics, Fisher and mutual-information grids and
    /// the complexity measure.
    Analyze {
        /// Run config supplying the dataset and analysis settings.
        #[arg(long, required_unless_present = "data")]
        config: Option<PathBuf>,
        /// Dataset directory, used when no config is given.
        #[arg(long, conflicts_with = "config")]
        data: Option<PathBuf>,
        /// Checkpoint whose logits are also scored.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        flags: OverrideArgs,
    },
    /// Write a synthetic identical-mean, different-variance dataset.
    Synth {
        /// JSON synthetic spec; the flags below are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        nodes_per_class: usize,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// Per-class feature variances, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 9.0])]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        neighbors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip writing a 60/20/20 split file.
        #[arg(long)]
        no_split: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the full model on a fixed 12-node graph.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check a seeded sample of this many coordinates instead of all.
        #[arg(long)]
        coords: Option<usize>,
    },
    /// Compare single-moment, ensemble, MLP and attention fusion.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        flags: OverrideArgs,
    },
}

fn load_config(path: &Path, flags: &OverrideArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&flags.overrides());
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, flags } => commands::cmd_train(load_config(&config, &flags)?),
        Command::Ablate { config, flags } => commands::cmd_ablate(load_config(&config, &flags)?),
        Command::Analyze {
            config,
            data,
            checkpoint,
            flags,
        } => {
            let cfg = match (config, data) {
                (Some(path), _) => load_config(&path, &flags)?,
                (None, Some(dir)) => {
                    let mut cfg: RunConfig = serde_json::from_value(serde_json::json!({ "dataset": { "path": dir } }))?;
                    cfg.apply(&flags.overrides());
                    cfg
                }
                (None, None) => unreachable!("clap requires --config or --data"),
            };
            commands::cmd_analyze(cfg, AnalyzeArgs { checkpoint })
        }
        Command::Synth {
            config,
            nodes_per_class,
            dim,
            scales,
            neighbors,
            seed,
            no_split,
            out,
        } => {
            let spec = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<SyntheticSpec>(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                None => SyntheticSpec::identical_means(nodes_per_class, dim, scales, neighbors, seed),
            };
            let split = (!no_split).then_some(SplitPolicy::Ratio {
                train: 0.6,
                val: 0.2,
                test: 0.2,
            });
            commands::cmd_synth(SynthArgs { spec, split, out })
        }
        Command::Gradcheck { seed, coords } => commands::cmd_gradcheck(seed, coords),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err.chain().any(|e| {
        e.downcast_ref::<NumericFailure>().is_some()
            || e.downcast_ref::<mmgnn_core::Error>().is_some_and(|e| e.is_numeric())
    });
    if numeric {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn numeric_errors_map_to_two() {
        let e: anyhow::Error = mmgnn_core::Error::Numeric("nan".into()).into();
        assert_eq!(exit_code(&e), 2);
        let e: anyhow::Error = NumericFailure("bad".into()).into();
        assert_eq!(exit_code(&e.context("gradcheck")), 2);
        let e: anyhow::Error = mmgnn_core::Error::Config("x".into()).into();
        assert_eq!(exit_code(&e), 1);
    }

    #[test]
    fn fusion_flag_parses() {
        let cli = Cli::try_parse_from([
            "mmgnn", "train", "--config", "c.json", "--fusion", "single:2", "--k", "3",
        ])
        .unwrap();
        let Command::Train { flags, .. } = cli.command else {
            panic!("expected train");
        };
        assert_eq!(flags.fusion, Some(FusionMode::SingleMoment(2)));
    }
}

//! Command-line harness: prepare, train, evaluate, ablate, gradcheck,
//! paramcount, sweep.

mod commands;
mod config;

pub use commands::{
    ablation_table, cmd_ablate, cmd_evaluate, cmd_gradcheck, cmd_paramcount, cmd_prepare,
    cmd_sweep, cmd_train, resolve_input, AblateArgs, AblationRow, EvaluateArgs, GradcheckArgs,
    ParamcountArgs, PrepareArgs, PrepareStats, SweepArgs, SweepAxis, SweepCell, TrainArgs,
    DATA_DIR_ENV,
};
pub use config::RunSettings;

use crate::data::DatasetFormat;
use crate::error::HgnError;
use crate::model::Variant;
use crate::train::GradCheckSettings;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "hgn",
    version,
    about = "Sequential recommender with hierarchical gating trained by pairwise ranking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Hyper-parameter and runtime flags shared by the training-style
/// commands; unset flags fall back to the config file, then defaults.
#[derive(Args, Debug, Default, Clone)]
struct Overrides {
    /// key=value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Context window length.
    #[arg(long = "L")]
    context_len: Option<usize>,
    /// Target horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "lambda")]
    lambda: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// avg or max.
    #[arg(long)]
    pooling: Option<String>,
    /// BPR, BPR+F+avg, ..., HGN.
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated metric cutoffs.
    #[arg(long)]
    ks: Option<String>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunSettings, HgnError> {
        let mut settings = match &self.config {
            Some(path) => RunSettings::from_file(commands::resolve_input(path))?,
            None => RunSettings::default(),
        };
        macro_rules! apply {
            ($field:expr, $key:literal) => {
                if let Some(v) = &$field {
                    settings.set($key, &v.to_string())?;
                }
            };
        }
        apply!(self.seed, "seed");
        apply!(self.workers, "workers");
        apply!(self.d, "d");
        apply!(self.context_len, "L");
        apply!(self.horizon, "T");
        apply!(self.lr, "lr");
        apply!(self.lambda, "lambda");
        apply!(self.batch, "batch");
        apply!(self.epochs, "epochs");
        apply!(self.pooling, "pooling");
        apply!(self.variant, "variant");
        apply!(self.ks, "ks");
        settings.validate()?;
        Ok(settings)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest a rating file (or synthesize one) into a dataset bundle.
    Prepare {
        /// Rating file with user,item,rating,timestamp rows.
        #[arg(long, conflicts_with = "synth")]
        input: Option<PathBuf>,
        /// Input encoding: csv, csv-header, tsv, tsv-header.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Synthesize a preset dataset instead: desk, chance, noisy.
        #[arg(long)]
        synth: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output bundle file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a bundle.
    Train {
        #[arg(long)]
        bundle: PathBuf,
        /// Output directory for checkpoints and logs.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Save a checkpoint every n epochs.
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Log validation metrics after each epoch.
        #[arg(long)]
        eval_val: bool,
    },
    /// Score a checkpoint on the held-out test set.
    Evaluate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Optional output directory for metrics files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train every ablation row under shared seeds and tabulate.
    Ablate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds (defaults to seed, seed+1, seed+2).
        #[arg(long)]
        seeds: Option<String>,
        /// Cutoff for the report table.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Validate analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long = "L", default_value_t = 3)]
        context_len: usize,
        #[arg(long = "N", default_value_t = 10)]
        num_items: usize,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Report learnable-parameter counts.
    Paramcount {
        #[arg(long)]
        d: usize,
        #[arg(long = "L")]
        context_len: usize,
        #[arg(long = "M", default_value_t = 0)]
        num_users: usize,
        #[arg(long = "N", default_value_t = 0)]
        num_items: usize,
        #[arg(long, default_value = "HGN")]
        variant: String,
    },
    /// Train and evaluate across a hyper-parameter grid.
    Sweep {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// d (dimension sweep) or lt (window/horizon grid).
        #[arg(long)]
        axis: String,
        /// Cutoff for the reported metric columns.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Parse arguments and run. Returns the process exit code: 0 on success,
/// 1 for configuration/usage errors, 2 for runtime failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), HgnError> {
    match cli.command {
        Command::Prepare {
            input,
            format,
            synth,
            seed,
            out,
        } => {
            let format: DatasetFormat = format.parse()?;
            cmd_prepare(&PrepareArgs {
                input,
                format,
                synth,
                seed,
                out,
            })?;
            Ok(())
        }
        Command::Train {
            bundle,
            out,
            overrides,
            checkpoint_every,
            eval_val,
        } => {
            let mut settings = overrides.resolve()?;
            if let Some(every) = checkpoint_every {
                settings.checkpoint_every = every;
            }
            cmd_train(&TrainArgs {
                bundle,
                out,
                settings,
                eval_val,
            })?;
            Ok(())
        }
        Command::Evaluate {
            bundle,
            checkpoint,
            out,
            overrides,
        } => {
            let settings = overrides.resolve()?;
            cmd_evaluate(&EvaluateArgs {
                bundle,
                checkpoint,
                out,
                settings,
            })?;
            Ok(())
        }
        Command::Ablate {
            bundle,
            out,
            seeds,
            k,
            overrides,
        } => {
            let settings = overrides.resolve()?;
            let seeds = match seeds {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse::<u64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| HgnError::Config(format!("bad seed list `{list}`")))?,
                None => {
                    let base = settings.train.seed;
                    vec![base, base + 1, base + 2]
                }
            };
            cmd_ablate(&AblateArgs {
                bundle,
                out,
                settings,
                seeds,
                k,
            })?;
            Ok(())
        }
        Command::Gradcheck {
            d,
            context_len,
            num_items,
            seeds,
            tolerance,
        } => {
            if d == 0 || context_len == 0 || num_items < 2 || seeds == 0 {
                return Err(HgnError::Config(
                    "gradcheck needs d >= 1, L >= 1, N >= 2, seeds >= 1".into(),
                ));
            }
            cmd_gradcheck(&GradcheckArgs {
                settings: GradCheckSettings {
                    dim: d,
                    context_len,
                    num_items,
                    seeds,
                    tolerance,
                    ..GradCheckSettings::default()
                },
            })?;
            Ok(())
        }
        Command::Paramcount {
            d,
            context_len,
            num_users,
            num_items,
            variant,
        } => {
            let variant: Variant = variant.parse()?;
            cmd_paramcount(&ParamcountArgs {
                dim: d,
                context_len,
                num_users,
                num_items,
                variant,
            })?;
            Ok(())
        }
        Command::Sweep {
            bundle,
            out,
            axis,
            k,
            overrides,
        } => {
            let settings = overrides.resolve()?;
            let axis: SweepAxis = axis.parse()?;
            cmd_sweep(&SweepArgs {
                bundle,
                out,
                axis,
                settings,
                k,
            })?;
            Ok(())
        }
    }
}

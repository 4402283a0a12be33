//! Command-line front end: argument parsing and exit-code mapping only; all
//! behavior lives in `eraser_core::commands`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eraser_core::commands::{
    cmd_compare, cmd_evaluate, cmd_inspect, cmd_pipeline, cmd_sweep_ratio, cmd_sweep_threshold,
    cmd_unlearn, RemovalRequest,
};
use eraser_core::config::Config;
use eraser_core::error::Error;

#[derive(Parser)]
#[command(
    name = "eraser",
    about = "Exact machine unlearning via frozen-backbone prompt tuning",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train end to end and write a checkpoint.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Remove private points from a checkpointed model.
    Unlearn {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated private ids to remove.
        #[arg(long, conflicts_with = "ratio")]
        ids: Option<String>,
        /// Fraction of private points to remove (seeded uniform choice).
        #[arg(long)]
        ratio: Option<f64>,
        /// Seed for ratio-based selection.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the adaptive system and the baselines, compare costs.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster counts over a grid of distance thresholds.
    SweepThreshold {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated thresholds.
        #[arg(long)]
        thresholds: String,
    },
    /// Accuracy after unlearning increasing fractions of the private data.
    SweepRatio {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated ratios in [0, 1).
        #[arg(long)]
        ratios: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Accuracy of a checkpointed model on the configured test set.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a checkpoint's manifest.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn parse_csv<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, Error> {
    raw.split(',')
        .map(|p| p.trim().parse::<T>())
        .collect::<Result<Vec<T>, _>>()
        .map_err(|_| Error::Config {
            field: what.to_string(),
            message: format!("cannot parse `{raw}` as a comma-separated list"),
        })
}

fn out_dir(flag: Option<PathBuf>, config: &Config) -> PathBuf {
    flag.or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("eraser-out"))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Pipeline { config, out } => {
            let config = Config::load(&config)?;
            let dir = out_dir(out, &config);
            let outcome = cmd_pipeline(&config, &dir)?;
            print!("{}", outcome.summary_tsv);
            eprintln!("checkpoint: {}", outcome.checkpoint_path.display());
            eprintln!("tune log:   {}", outcome.tune_log_path.display());
        }
        Command::Unlearn { checkpoint, ids, ratio, seed, out } => {
            let request = match (ids, ratio) {
                (Some(raw), None) => {
                    RemovalRequest::Ids(parse_csv::<u64>(&raw, "--ids")?.into_iter().collect::<BTreeSet<u64>>())
                }
                (None, Some(ratio)) => RemovalRequest::Ratio { ratio, seed },
                (None, None) => {
                    return Err(Error::Config {
                        field: "--ids|--ratio".into(),
                        message: "one of --ids or --ratio is required".into(),
                    })
                }
                (Some(_), Some(_)) => unreachable!("clap forbids this combination"),
            };
            let outcome = cmd_unlearn(&checkpoint, request, out.as_deref())?;
            print!("{}", outcome.report_tsv);
            eprintln!("checkpoint: {}", outcome.new_checkpoint.display());
        }
        Command::Compare { config, out } => {
            let config = Config::load(&config)?;
            let dir = out_dir(out, &config);
            let stdout = std::io::stdout();
            let mut sink = stdout.lock();
            let outcome = cmd_compare(&config, &dir, &mut sink)?;
            sink.flush().ok();
            eprintln!("accuracy curves: {}", outcome.accuracy_curves_path.display());
            eprintln!("cost reference:  {}", outcome.cost_reference_path.display());
        }
        Command::SweepThreshold { config, thresholds } => {
            let config = Config::load(&config)?;
            let ts = parse_csv::<f64>(&thresholds, "--thresholds")?;
            print!("{}", cmd_sweep_threshold(&config, &ts)?);
        }
        Command::SweepRatio { checkpoint, config, ratios, seed } => {
            let config = Config::load(&config)?;
            let rs = parse_csv::<f64>(&ratios, "--ratios")?;
            print!("{}", cmd_sweep_ratio(&checkpoint, &config, &rs, seed)?);
        }
        Command::Evaluate { checkpoint, config } => {
            let config = Config::load(&config)?;
            print!("{}", cmd_evaluate(&checkpoint, &config)?.tsv);
        }
        Command::Inspect { checkpoint } => {
            print!("{}", cmd_inspect(Path::new(&checkpoint))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

//! `crashsynth` command-line interface.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crashsynth::resampling::Method;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl From<crashsynth::Error> for CliError {
    fn from(e: crashsynth::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "crashsynth", version, about = "Rebalance crash data with CTGAN and fit severity models")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration; flags override its keys
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; stage seeds are derived from it
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Input CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema file (TOML)
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PlanArgs {
    /// ru, smote_nc, ctgan or ctgan_ru
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Exact final count per class, e.g. 114,114
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<usize>>,
    /// Final class ratio, e.g. 1,1 (resolved against the data's counts)
    #[arg(long, value_delimiter = ',')]
    pub ratio: Option<Vec<f64>>,
    /// Exact post-under-sampling counts for ctgan_ru
    #[arg(long, value_delimiter = ',')]
    pub ru_targets: Option<Vec<usize>>,
    /// Post-under-sampling class ratio for ctgan_ru, e.g. 2,1
    #[arg(long, value_delimiter = ',')]
    pub ru_ratio: Option<Vec<f64>>,
    /// Minority neighbours for smote_nc (default 5)
    #[arg(long)]
    pub k_neighbors: Option<usize>,
    /// Use the small CTGAN preset
    #[arg(long)]
    pub desk: bool,
    /// Override the CTGAN epoch count
    #[arg(long)]
    pub epochs: Option<usize>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    toml::Value::String(s.to_string())
        .try_into()
        .map_err(|_| format!("unknown method '{s}' (ru, smote_nc, ctgan, ctgan_ru)"))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rebalance a dataset and write it with a provenance sidecar
    Resample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Fit a binary or ordered logit and print the coefficient table
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Held-out CSV to predict and score
        #[arg(long)]
        test: Option<PathBuf>,
        /// Decision threshold for binary predictions
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Score a predictions file with y_true and y_pred columns
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Number of classes (default: inferred)
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Histogram and joint-density grids of real versus synthetic data
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long)]
        synthetic: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Bins for continuous columns
        #[arg(long)]
        bins: Option<usize>,
        /// Column pairs for joint densities, e.g. x1:x2,x1:road
        #[arg(long, value_delimiter = ',')]
        pairs: Option<Vec<String>>,
    },
    /// Monte Carlo scenarios from a config file
    McRun {
        #[command(flatten)]
        common: Common,
        /// Replications per arm (default 100)
        #[arg(long)]
        replications: Option<usize>,
        /// Use 1000 replications
        #[arg(long)]
        full: bool,
    },
    /// Re-run split, rebalance, fit and score over several seeds
    SeedsSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train a CTGAN (or load a saved one) and sample rows
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        plan: PlanArgs,
        /// Saved model bundle to sample from instead of training
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Fix a discrete column, e.g. y=FI
        #[arg(long)]
        condition: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    use commands::*;
    match cli.command {
        Command::Resample { common, data, plan } => resample(&common, &data, &plan),
        Command::Fit {
            common,
            data,
            test,
            threshold,
        } => fit(&common, &data, test, threshold),
        Command::Evaluate {
            common,
            predictions,
            classes,
        } => evaluate(&common, predictions, classes),
        Command::Diagnose {
            common,
            real,
            synthetic,
            schema,
            bins,
            pairs,
        } => diagnose(&common, real, synthetic, schema, bins, pairs),
        Command::McRun {
            common,
            replications,
            full,
        } => mc_run(&common, replications, full),
        Command::SeedsSweep {
            common,
            data,
            plan,
            seeds,
            threshold,
        } => seeds_sweep(&common, &data, &plan, seeds, threshold),
        Command::Generate {
            common,
            data,
            plan,
            model,
            n,
            condition,
        } => generate(&common, &data, &plan, model, n, condition),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp
                    | clap::error::ErrorKind::DisplayVersion
                    | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("error: config: {}", one_line(&e.to_string()));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("error: config: {}", one_line(&m));
            ExitCode::from(1)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("error: numerical: {}", one_line(&m));
            ExitCode::from(2)
        }
    }
}

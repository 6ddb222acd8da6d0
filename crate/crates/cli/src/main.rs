#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "stormrisk", version, about = "Regional hurricane loss model: fit, diagnose, predict and price")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct Common {
    /// TOML configuration file; relative paths inside it resolve against its directory.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set sampler.n_iterations=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shortcut for `--set sampler.seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shortcut for `--set output_dir=DIR`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the storm, calendar and graph files.
    Validate,
    /// Run MCMC chains for one submodel or all three.
    Fit {
        #[arg(long, default_value = "all")]
        submodel: String,
    },
    /// BGR, HPD and acceptance report for the fitted chains, plus count DIC.
    Diagnose,
    /// Fit the count model for several frequency counts and compare DIC.
    Dic {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        frequencies: Vec<usize>,
    },
    /// Posterior-predictive annual losses and hit-rate maps per phase.
    Predict,
    /// Premiums and allocation proportions from the predicted annual losses.
    Price,
    /// Generate-and-refit simulation study.
    Simstudy,
    /// Write a synthetic storm file resembling the historical record.
    Synth,
}

/// CLI failure with its exit status: 1 for input problems, 2 for numerical ones.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl From<stormrisk::Error> for CliError {
    fn from(e: stormrisk::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = cli.common.overrides.clone();
    if let Some(seed) = cli.common.seed {
        overrides.push(format!("sampler.seed={seed}"));
    }
    if let Some(out) = &cli.common.out {
        overrides.push(format!("output_dir={:?}", out.display().to_string()));
    }
    let result = config::Config::load(cli.common.config.as_deref(), &overrides).and_then(|config| {
        let args: Vec<String> = std::env::args().collect();
        match cli.command {
            Command::Validate => commands::validate(&config),
            Command::Fit { submodel } => commands::fit(&config, &submodel, &args),
            Command::Diagnose => commands::diagnose(&config, &args),
            Command::Dic { frequencies } => commands::dic(&config, &frequencies, &args),
            Command::Predict => commands::predict(&config, &args),
            Command::Price => commands::price(&config, &args),
            Command::Simstudy => commands::simstudy(&config, &args),
            Command::Synth => commands::synth(&config, &args),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}

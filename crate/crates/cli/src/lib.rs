//! Command-line pipeline: generate a labeled dataset, train the classifier,
//! sample with the estimated ratio and evaluate the samples.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod presets;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::LoadedConfig;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ratio-mc", version, about = "Classifier-based density ratio sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw the labeled dataset (target = 1, instrumental = 0).
    GenData(CommonArgs),
    /// Train the classifier on the dataset.
    Train(CommonArgs),
    /// Sample with the configured sampler and the estimated ratio.
    Sample(CommonArgs),
    /// Compare samples against the target and write the ratio grid.
    Evaluate(CommonArgs),
    /// Run all four steps on a preset or a config.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Use the exact posterior from the closed-form densities instead of the
    /// trained model.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// One of gaussian-1d, gmm-2d, two-moons, rings. Its config is written
    /// to the output directory first.
    #[arg(long, value_parser = presets::PRESETS)]
    pub preset: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub oracle: bool,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => commands::gen_data(&load(&a)?).map(drop),
        Command::Train(a) => {
            if a.oracle {
                return Err(CliError::Usage("the oracle posterior needs no training".into()));
            }
            commands::train_model(&load(&a)?).map(drop)
        }
        Command::Sample(a) => commands::sample(&load(&a)?, a.oracle).map(drop),
        Command::Evaluate(a) => commands::evaluate(&load(&a)?, a.oracle).map(drop),
        Command::Demo(a) => {
            let cfg = match (&a.preset, &a.config) {
                (Some(name), _) => {
                    let dir = a.output_dir.clone().unwrap_or_else(|| PathBuf::from(name));
                    let path = commands::write_preset(name, &dir)?;
                    LoadedConfig::load(&path, None)?
                }
                (None, Some(path)) => LoadedConfig::load(path, a.output_dir.as_deref())?,
                (None, None) => return Err(CliError::Usage("demo needs --preset or --config".into())),
            };
            commands::demo(&cfg, a.oracle)
        }
    }
}

fn load(a: &CommonArgs) -> Result<LoadedConfig, CliError> {
    LoadedConfig::load(&a.config, a.output_dir.as_deref())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use factions::synthetic::PlantedSpec;

mod commands;
mod config;
mod error;

use config::{RunArgs, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "factions", version, about = "Detect emerging voting blocs in DAO governance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch vote events into <out>/<dao>/fixture.jsonl.
    Ingest(RunArgs),
    /// Per-proposal disagreement, rolling mean and the flag rule.
    Friction(RunArgs),
    /// Active sets, dissimilarities, embeddings and clusters.
    Analyze(RunArgs),
    /// Fork alignment against the vote-shuffle baseline.
    Validate(RunArgs),
    /// Friction, analyze and validate (when ground truth is given).
    All(RunArgs),
    /// Category chart across every DAO already in the output directory.
    Compare {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the planted two-bloc fixture.
    Synth {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn with_workers<T>(config: &RunConfig, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError>
where
    T: Send,
{
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(f),
        None => f(),
    }
}

fn run(command: Command) -> Result<(), CliError> {
    let pipeline = |args: &RunArgs, f: fn(&RunConfig) -> Result<(), CliError>| {
        let config = args.resolve()?;
        with_workers(&config, || f(&config))
    };
    match command {
        Command::Ingest(a) => pipeline(&a, |c| commands::cmd_ingest(c).map(drop)),
        Command::Friction(a) => pipeline(&a, |c| commands::cmd_friction(c).map(drop)),
        Command::Analyze(a) => pipeline(&a, |c| commands::cmd_analyze(c).map(drop)),
        Command::Validate(a) => pipeline(&a, |c| commands::cmd_validate(c).map(drop)),
        Command::All(a) => pipeline(&a, commands::cmd_all),
        Command::Compare { out } => commands::cmd_compare(&out).map(drop),
        Command::Synth {
            fixture,
            ground_truth,
            seed,
        } => commands::cmd_synth(&PlantedSpec { seed, ..PlantedSpec::default() }, &fixture, &ground_truth),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

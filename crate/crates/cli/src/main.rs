mod config;
mod error;
mod output;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fundmap_core::BigRational;

use crate::config::{Overrides, Settings};
use crate::error::{CliError, Result};
use crate::stages::{with_scalar, Context};

#[derive(Parser)]
#[command(name = "fundmap", version, about = "National research-funding metrics from acknowledgement records")]
struct Cli {
    /// Key=value settings file.
    #[arg(long, global = true, env = "FUNDMAP_CONFIG")]
    config: Option<PathBuf>,
    /// Input corpus (JSON lines).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// How EU-level funding counts for EU members: foreign or domestic.
    #[arg(long, global = true)]
    eu_mode: Option<String>,
    /// Backbone significance level, as a decimal.
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rerun stages even when the manifest says they are current.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse, validate and filter the input corpus.
    Ingest,
    /// Assign every funder name a country, EU, MULTI or UNRESOLVED.
    Resolve,
    /// Funding shares and incidence tables.
    Attribute,
    /// Per-country funding portfolios and continent summaries.
    Portfolio,
    /// Removal scenarios and the funder-by-recipient impact matrix.
    Counterfactual,
    /// Reliance network with edge significance.
    Network,
    /// Significant edges and top funders per country.
    Backbone,
    /// Bundle figure tables under report/.
    Report,
    /// Generate a synthetic corpus with ground truth.
    Synth,
    /// Run ingest through report.
    All,
}

fn run(cli: Cli) -> Result<()> {
    let overrides = Overrides {
        input: cli.input,
        out_dir: cli.out_dir,
        threads: cli.threads,
        eu_mode: cli.eu_mode,
        alpha: cli.alpha,
        seed: cli.seed,
    };
    let settings = Settings::load(cli.config.as_deref(), &overrides)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Context::new(settings, cli.force);
    match cli.command {
        Command::Ingest => stages::ingest(&ctx),
        Command::Resolve => stages::resolve(&ctx),
        Command::Attribute => with_scalar(&ctx, stages::attribute::<f64>, stages::attribute::<BigRational>),
        Command::Portfolio => with_scalar(&ctx, stages::portfolio::<f64>, stages::portfolio::<BigRational>),
        Command::Counterfactual => {
            with_scalar(&ctx, stages::counterfactual::<f64>, stages::counterfactual::<BigRational>)
        }
        Command::Network => with_scalar(&ctx, stages::network::<f64>, stages::network::<BigRational>),
        Command::Backbone => with_scalar(&ctx, stages::backbone::<f64>, stages::backbone::<BigRational>),
        Command::Report => stages::report(&ctx),
        Command::Synth => stages::synth(&ctx),
        Command::All => stages::run_all(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fundmap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use foresight::Seed;

mod commands;
mod config;
mod error;
mod report;

use commands::Example;
use config::{ExperimentConfig, Format};
use error::CliError;
use report::Report;

/// Monte Carlo and exact experiments on random trees with bounded foresight.
#[derive(Parser, Debug)]
#[command(name = "foresight", version)]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample trees and summarize generation sizes.
    SampleTree,
    /// Success probabilities of the configured strategy roster.
    Estimate,
    /// Bracket the omniscient success probability.
    Omniscient,
    /// Empirical checks of the reduction identities on the finite-foresight process.
    Mdp,
    /// One-step law and recurrence of the maximal branching process.
    Mbp,
    /// Exact and simulated survival of the varying-environment branching process.
    Bpve,
    /// Evaluate the zero-one law preconditions for a family.
    Check,
    /// Run the check battery of one worked example.
    Example {
        #[arg(value_enum)]
        which: Example,
        /// Monte Carlo samples per check.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Rebuild the summary table of the worked examples.
    Table2,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SampleTree => "sample-tree",
            Command::Estimate => "estimate",
            Command::Omniscient => "omniscient",
            Command::Mdp => "mdp",
            Command::Mbp => "mbp",
            Command::Bpve => "bpve",
            Command::Check => "check",
            Command::Example { .. } => "example",
            Command::Table2 => "table2",
        }
    }

    fn needs_config(&self) -> bool {
        !matches!(self, Command::Example { .. } | Command::Table2)
    }
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => Some(ExperimentConfig::load(path)?),
        None if cli.command.needs_config() => {
            return Err(CliError::Config(format!("`{}` needs --config", cli.command.name())))
        }
        None => None,
    };
    if let (Some(c), Some(s)) = (cfg.as_mut(), cli.seed) {
        c.seed = s;
    }
    let seed = cfg.as_ref().map(|c| c.seed).or(cli.seed);
    let outcome = match (&cli.command, &cfg) {
        (Command::Example { which, samples }, _) => {
            let seed = seed.ok_or_else(|| CliError::Config("`example` needs --seed or --config".into()))?;
            let n = samples.or(cfg.as_ref().map(|c| c.samples)).unwrap_or(10_000);
            commands::example(*which, n, Seed(seed))?
        }
        (Command::Table2, _) => commands::table2()?,
        (cmd, Some(c)) => match cmd {
            Command::SampleTree => commands::sample_tree(c)?,
            Command::Estimate => commands::estimate(c)?,
            Command::Omniscient => commands::omniscient(c)?,
            Command::Mdp => commands::mdp(c)?,
            Command::Mbp => commands::mbp(c)?,
            Command::Bpve => commands::bpve(c)?,
            Command::Check => commands::check(c)?,
            Command::Example { .. } | Command::Table2 => unreachable!(),
        },
        (_, None) => unreachable!("checked above"),
    };
    let hash = cfg.as_ref().map(ExperimentConfig::hash);
    let report = Report {
        tool: "foresight",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        config_hash: hash.as_deref(),
        seed,
        status: outcome.status,
        result: &outcome.result,
    };
    let out = cli.out.clone().or_else(|| cfg.as_ref().and_then(|c| c.output.path.clone()));
    let format = cli.format.or_else(|| cfg.as_ref().and_then(|c| c.output.format)).unwrap_or(Format::Json);
    report::write(&report, &outcome.table, format, out.as_deref())?;
    if let Some(c) = &cfg {
        for note in c.family()?.notes() {
            eprintln!("note: {note}");
        }
    }
    for line in &outcome.summary {
        eprintln!("{line}");
    }
    eprintln!("status: {:?}", outcome.status);
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

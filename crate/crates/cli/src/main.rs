mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{CliConfig, Layer};
use crate::exit::Failure;

/// Intent-aware permission toolkit.
///
/// Settings come from the config file, then flags, then `CONSENTCORE_*`
/// environment variables; later sources win.
#[derive(Parser, Debug)]
#[command(name = "consentcore", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML config file (also `CONSENTCORE_CONFIG`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Intent registry file; the bundled seed registry when absent.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Directory of policy documents (`*.txt`); the bundled corpus when absent.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Directory of lexicon files; the bundled lexicons when absent.
    #[arg(long, global = true)]
    lexicons: Option<PathBuf>,
    /// Append-only event journal for the broker.
    #[arg(long, global = true)]
    journal: Option<PathBuf>,
    /// Service address, host:port.
    #[arg(long, global = true)]
    listen: Option<String>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    log_level: Option<String>,
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract and group data-request statements into an audit file (JSON lines).
    Ingest {
        /// Audit output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the intent registry from the corpus and the seed registry.
    BuildRegistry {
        /// Registry output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        /// Overrides the port of --listen; 0 picks a free port.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Replay scenarios with the automated decider; all bundled scenarios by default.
    Simulate {
        /// Bundled scenario name or scenario file; repeatable.
        #[arg(long)]
        scenario: Vec<String>,
        /// Overrides the scenario's own seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the transcripts here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time prompt assembly against the number of requested permissions.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "5,10,25,50")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        reps: usize,
        /// Requests timed together per sample.
        #[arg(long, default_value_t = 16)]
        batch: usize,
        /// Also write the table (tab-separated) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 1 unless medians are non-decreasing and R^2 >= 0.9.
        #[arg(long)]
        check: bool,
    },
    /// Drive many requester apps against one broker and audit the event log.
    Stress {
        #[arg(long, default_value_t = 16)]
        apps: usize,
        #[arg(long, default_value_t = 20)]
        requests: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl GlobalArgs {
    fn layer(&self) -> Layer {
        Layer {
            registry: self.registry.clone(),
            corpus: self.corpus.clone(),
            lexicons: self.lexicons.clone(),
            journal: self.journal.clone(),
            listen: self.listen.clone(),
            log_level: self.log_level.clone(),
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<CliConfig, Failure> {
    let env_var = |k: &str| std::env::var(k).ok();
    let file_path = env_var("CONSENTCORE_CONFIG")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| global.config.clone());
    let file = match file_path {
        Some(path) => Layer::from_toml(&path)?,
        None => Layer::default(),
    };
    CliConfig::resolve(file, global.layer(), Layer::from_env(env_var))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli.global)?;
    env_logger::Builder::new()
        .filter_level(config.log_level)
        .format_timestamp(None)
        .init();
    let ctx = commands::Context::new(config, cli.global.sequential);
    match cli.command {
        Command::Ingest { out } => commands::ingest(&ctx, out.as_deref()),
        Command::BuildRegistry { out } => commands::build_registry(&ctx, out.as_deref()),
        Command::Serve { port } => commands::serve(&ctx, port),
        Command::Simulate { scenario, seed, out } => commands::simulate(&ctx, &scenario, seed, out.as_deref()),
        Command::Bench {
            counts,
            reps,
            batch,
            out,
            check,
        } => commands::bench(&ctx, counts, reps, batch, out.as_deref(), check),
        Command::Stress { apps, requests, seed } => commands::stress(&ctx, apps, requests, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS),
        Err(failure) => {
            eprintln!("consentcore: {}", failure.message);
            ExitCode::from(failure.exit)
        }
    }
}

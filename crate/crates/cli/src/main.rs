//! `qlle`: fit, apply and evaluate quasi-curvature LLE embeddings.
//!
//! Exit codes: 0 success, 1 compute failure, 2 usage or I/O failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunFlags;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Compute(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Compute(m) => m,
        }
    }
}

impl From<qlle::Error> for CliError {
    fn from(e: qlle::Error) -> Self {
        match e {
            qlle::Error::Io(_) | qlle::Error::Parse { .. } | qlle::Error::Format(_) => CliError::Io(e.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qlle", version, about = "Quasi-curvature LLE with an explicit out-of-sample map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an nm-qlle or pca model and save it as JSON.
    Fit {
        #[command(flatten)]
        run: RunFlags,
        /// nm-qlle or pca.
        #[arg(long)]
        method: Option<String>,
    },
    /// Embed a feature file with a saved model; writes CSV with the original labels.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<config::DataFormat>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieval precision and timing over a range of target dimensions.
    Sweep {
        #[command(flatten)]
        run: RunFlags,
        /// Comma-separated: nm-qlle, qlle, pca, original.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Neighbors retrieved per query.
        #[arg(long)]
        returns: Option<usize>,
        /// Write zero timings so reports are reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
    },
    /// Generate a labeled synthetic manifold.
    Synth {
        /// swiss_roll, plane or sphere.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Embed the manifold in this many dimensions through a random orthonormal frame.
        #[arg(long)]
        ambient_dim: Option<usize>,
        /// Output file; `.csv` writes CSV, anything else the binary format.
        #[arg(long)]
        out: PathBuf,
    },
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("QLLE_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("QLLE_THREADS must be a positive integer, got '{v}'"))),
        },
        _ => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { run, method } => {
            let cfg = run.resolve(config::RunConfig {
                method,
                ..Default::default()
            })?;
            commands::fit(&cfg)
        }
        Command::Transform { model, data, format, out } => commands::transform(&model, &data, format, &out),
        Command::Sweep {
            run,
            methods,
            returns,
            no_timing,
        } => {
            let cfg = run.resolve(config::RunConfig {
                methods,
                returns,
                no_timing: no_timing.then_some(true),
                ..Default::default()
            })?;
            commands::sweep(&cfg)
        }
        Command::Synth {
            kind,
            n,
            noise,
            seed,
            ambient_dim,
            out,
        } => commands::synth(&kind, n, noise, seed, ambient_dim, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_cap().and_then(|threads| qlle::parallel::install(threads, || run(cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

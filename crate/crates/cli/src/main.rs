//! `robpoly`: fit, simulate and study outlier-robust polynomial regression.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{CommonArgs, LowerBoundKind, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "robpoly", version, about = "Outlier-robust polynomial regression on [-1,1]^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Recover a polynomial from a sample CSV and print a JSON report
    Fit {
        /// Sample CSV with header x1,...,xn,y[,is_outlier]
        #[arg(long, short = 'i')]
        input: Option<PathBuf>,
        /// Polynomial JSON used to report the sup-norm error per step
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write the recovered polynomial JSON here
        #[arg(long)]
        poly_out: Option<PathBuf>,
        /// Also write the iteration,sup_error trace here
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Draw labelled samples and write them as CSV
    Simulate {
        /// Number of samples (default: the Chebyshev sample size for the grid)
        #[arg(long, short = 'M')]
        samples: Option<usize>,
        /// Polynomial JSON to label with (default: random, from the seed)
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write the labelling polynomial JSON here
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Success rate against sample count, distribution and outlier rate
    Sweep {
        /// Comma-separated sample counts
        #[arg(long, value_delimiter = ',')]
        samples_grid: Option<Vec<usize>>,
        /// Comma-separated outlier rates
        #[arg(long, value_delimiter = ',')]
        rho_grid: Option<Vec<f64>>,
        /// Comma-separated distributions
        #[arg(long, value_delimiter = ',')]
        dists: Option<Vec<String>>,
    },
    /// Check the norm inequalities on random and extremal polynomials
    VerifyNorms,
    /// Lower-bound experiments: failure rate against sample count
    Lowerbound {
        #[arg(long, value_enum)]
        kind: Option<LowerBoundKind>,
        /// Approximation factor C
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        samples_grid: Option<Vec<usize>>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(robpoly_core::Error),
    Failed(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            _ => 1,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Input(m) => json!({"error": {"kind": "input", "message": m}}),
            CliError::Failed(m) => json!({"error": {"kind": "failed", "message": m}}),
            CliError::Core(e) => {
                let kind = if e.is_input_error() { "input" } else { "numerical" };
                let mut v = json!({"error": {"kind": kind, "message": e.to_string()}});
                if let robpoly_core::Error::Parse { line, .. } = e {
                    v["error"]["line"] = json!(line);
                }
                v
            }
        }
    }
}

impl From<robpoly_core::Error> for CliError {
    fn from(e: robpoly_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    cfg.apply(&cli.common)?;
    match cli.command {
        Command::Fit {
            input,
            truth,
            poly_out,
            trace_out,
        } => {
            cfg.command = "fit".into();
            if input.is_some() {
                cfg.input = input;
            }
            if truth.is_some() {
                cfg.truth = truth;
            }
            cfg.check_ranges()?;
            commands::fit(&cfg, poly_out.as_deref(), trace_out.as_deref())
        }
        Command::Simulate {
            samples,
            truth,
            truth_out,
        } => {
            cfg.command = "simulate".into();
            if samples.is_some() {
                cfg.samples = samples;
            }
            if truth.is_some() {
                cfg.truth = truth;
            }
            cfg.check_ranges()?;
            commands::simulate(&cfg, truth_out.as_deref())
        }
        Command::Sweep {
            samples_grid,
            rho_grid,
            dists,
        } => {
            cfg.command = "sweep".into();
            if let Some(g) = samples_grid {
                cfg.samples_grid = g;
            }
            if let Some(g) = rho_grid {
                cfg.rho_grid = g;
            }
            if let Some(ds) = dists {
                cfg.dists = ds.iter().map(|d| d.parse()).collect::<Result<_, _>>()?;
            }
            cfg.check_ranges()?;
            commands::sweep(&cfg)
        }
        Command::VerifyNorms => {
            cfg.command = "verify-norms".into();
            commands::verify_norms(&cfg)
        }
        Command::Lowerbound { kind, c, samples_grid } => {
            cfg.command = "lowerbound".into();
            if let Some(k) = kind {
                cfg.kind = k;
            }
            if c.is_some() {
                cfg.c = c;
            }
            if let Some(g) = samples_grid {
                cfg.samples_grid = g;
            }
            cfg.check_ranges()?;
            commands::lowerbound(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

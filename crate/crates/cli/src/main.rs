//! `negmn`: run risk experiments, check dominance conditions, verify risk
//! identities and evaluate predictive masses from versioned JSON configs.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Theorem;

#[derive(Debug, Parser)]
#[command(name = "negmn", version, about = "Negative multinomial shrinkage estimation and prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config with `"schema": 1`.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's replication count.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Writes outputs to this directory instead of stdout.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "NEGMN_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo risks of point estimators over parameter grids.
    SimulatePoint {
        #[command(flatten)]
        common: Common,
        /// Also write an SVG chart (needs --output-dir).
        #[arg(long)]
        svg: bool,
    },
    /// Monte Carlo KL risks of predictive masses and their PRIAL.
    SimulatePred {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        svg: bool,
    },
    /// Evaluates a sufficient dominance condition and prints the verdict.
    Check {
        #[command(flatten)]
        common: Common,
        /// Falls back to the config's `theorem` field.
        #[arg(long, value_enum)]
        theorem: Option<Theorem>,
    },
    /// Compares an exact KL risk with its path-integral form; exits 2 if the
    /// residual exceeds the certified bound.
    VerifyIdentity {
        #[command(flatten)]
        common: Common,
    },
    /// Predictive log masses of table outcomes.
    PredMass {
        #[command(flatten)]
        common: Common,
    },
}

/// An error with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<negmn::Error> for CliError {
    fn from(e: negmn::Error) -> Self {
        use negmn::Error::*;
        match e {
            Integration { .. } | Sampler(_) | Resource(_) => Self::numerical(e.to_string()),
            Domain(_) | Index(_) | Contract(_) | Precondition(_) => Self::validation(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::SimulatePoint { common, .. }
        | Command::SimulatePred { common, .. }
        | Command::Check { common, .. }
        | Command::VerifyIdentity { common }
        | Command::PredMass { common } => common.clone(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(CliError::validation("threads: must be at least 1"));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| CliError::validation(format!("threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::SimulatePoint { common, svg } => commands::simulate_point(&common, svg),
        Command::SimulatePred { common, svg } => commands::simulate_pred(&common, svg),
        Command::Check { common, theorem } => commands::check(&common, theorem),
        Command::VerifyIdentity { common } => commands::verify_identity(&common),
        Command::PredMass { common } => commands::pred_mass(&common),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

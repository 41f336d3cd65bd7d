//! `scbf`: data-driven safe controller synthesis from the command line.
//!
//! Exit codes: 0 success or certified, 2 completed but inconclusive,
//! 3 configuration or usage error, 4 runtime failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INCONCLUSIVE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "scbf", version, about = "Data-driven control barrier certificates for black-box systems")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Base directory for run outputs.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Scenario dataset seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Validation dataset seed.
    #[arg(long = "seed-validation")]
    seed_validation: Option<u64>,
    /// Skip the grid-row tightening (results are never certified).
    #[arg(long = "no-tighten")]
    no_tighten: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseMode {
    Prior,
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Role {
    Scenario,
    Validation,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pilot solve and sample-size plan.
    Plan {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample the plant and write a dataset CSV.
    Collect {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "scenario")]
        role: Role,
        /// Number of samples; defaults to the configured size for the role.
        #[arg(long)]
        count: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Posterior synthesis.
    Synthesize {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Retry inconclusive runs this many times with fresh seeds.
        #[arg(long, default_value_t = 0)]
        retries: u32,
    },
    /// Synthesis with the prior sample-size bound.
    PriorSynthesize {
        config: PathBuf,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-check a report: margin arithmetic, dense-grid conditions against the
    /// plant, closed-loop simulation; also writes plot data.
    Verify {
        report: PathBuf,
        /// Grid points per axis for the condition checks and simulations.
        #[arg(long, default_value_t = 401)]
        grid: usize,
    },
    /// Sample-size and confidence computations.
    Bounds {
        #[command(subcommand)]
        which: BoundsCommand,
    },
    /// The room-temperature case study with the bundled configuration.
    Casestudy {
        #[arg(long, value_enum)]
        mode: CaseMode,
        /// Use this configuration instead of the bundled one.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Violation level for the prior mode.
        #[arg(long, default_value_t = 7.492e-6)]
        eps: f64,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 0)]
        retries: u32,
    },
    /// Repeated posterior runs with derived seeds; violation-count histogram.
    Repeat {
        config: PathBuf,
        #[arg(long)]
        runs: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Subcommand)]
enum BoundsCommand {
    /// Smallest N with binomial tail at most beta.
    Prior {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        dim: u64,
    },
    /// Root of the posterior confidence equation.
    Kappa {
        #[arg(long = "N")]
        n: u64,
        #[arg(long = "N0")]
        n0: u64,
        #[arg(long = "Nstar")]
        n_star: u64,
        #[arg(long = "R")]
        r: u64,
        #[arg(long)]
        beta: f64,
    },
    /// Sample sizes from given estimates of K* and N*.
    Plan {
        config: PathBuf,
        #[arg(long = "k-hat", allow_hyphen_values = true)]
        k_hat: f64,
        #[arg(long = "nstar-hat")]
        n_star_hat: u64,
        /// Starting N; the validation size starts at half of it.
        #[arg(long)]
        start: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = commands::exit_code_for(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "eptas", version, about = "Santa Claus based solvers for stochastic probing problems")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Enumerate)]
    pub mode: ModeArg,
    /// Rounding attempts per guess.
    #[arg(long, global = true, default_value_t = 20)]
    pub retries: usize,
    /// Guesses tried in enumerate mode.
    #[arg(long, global = true, default_value_t = 64)]
    pub budget: usize,
    /// Output file (or directory for `generate`, path prefix for `bench`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Enumerate,
    OracleGuided,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Santa,
    Prophets,
    Probemax,
    Topr,
    Adaptive,
    Pandora,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write random instances as JSON files.
    Generate(GenerateArgs),
    /// Multi-dimensional Santa Claus.
    Santa {
        #[command(subcommand)]
        action: SantaAction,
    },
    /// Free-order prophets.
    Prophets {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Non-adaptive ProbeMax and top-r ProbeMax.
    Probemax {
        #[command(subcommand)]
        action: ProbemaxAction,
    },
    /// Adaptive ProbeMax with block policies.
    Adaptive {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Pandora's box with commitment.
    Pandora {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Exhaustive optimum of a small instance.
    Oracle { problem: Problem, instance: PathBuf },
    /// Solver against oracle and baseline on random instances; CSV plus Markdown summary.
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
pub enum SantaAction {
    Solve {
        instance: PathBuf,
        /// Upper bound on the reference's normalized loads.
        #[arg(long, default_value_t = 4.0)]
        rho: f64,
        /// Small-load threshold override.
        #[arg(long)]
        delta: Option<f64>,
        /// Reference assignment JSON (`{"machine_of": [...]}`) for oracle-guided mode.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum SolveAction {
    Solve {
        instance: PathBuf,
        /// Reference solution JSON; computed by brute force when omitted in oracle-guided mode.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ProbemaxAction {
    Solve {
        instance: PathBuf,
        /// Override the instance's probe budget.
        #[arg(long)]
        k: Option<usize>,
        /// Override the instance's r (sum of the r largest values).
        #[arg(long)]
        r: Option<usize>,
        /// Reference subset JSON; computed by brute force when omitted in oracle-guided mode.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Shape {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 3)]
    pub atoms: usize,
    #[arg(long, default_value_t = 10)]
    pub max_value: u32,
    #[arg(long, default_value_t = 8)]
    pub denominator: u64,
    #[arg(long, default_value_t = 2.0)]
    pub max_cost: f64,
    /// Machines and dimensions of planted Santa Claus instances.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 4.0)]
    pub rho: f64,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    pub problem: Problem,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[command(flatten)]
    pub shape: Shape,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    pub problem: Problem,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    /// Skip the exhaustive oracle column.
    #[arg(long)]
    pub no_oracle: bool,
    #[command(flatten)]
    pub shape: Shape,
}

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BAD_INPUT: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    use eptas_core::Error;
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible | Error::Exhausted { .. } | Error::RetriesExhausted { .. } | Error::InfeasibleGuess(_)) => {
            EXIT_INFEASIBLE
        }
        _ => EXIT_BAD_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

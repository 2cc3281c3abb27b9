//! `vcir`: simulation, transform evaluation, estimation and Monte Carlo
//! campaigns for the Volterra CIR process.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 every estimate degenerate.

mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use config::{
    EstimateArgs, GridArgs, IndependenceArgs, KernelArgs, LlnArgs, ModelArgs, MonteCarloArgs, Overlay, PartitionArgs,
    RunArgs, SimulateArgs, TransformArgs,
};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Degenerate(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate: {m}"),
        }
    }
}

impl From<vcir::Error> for CliError {
    fn from(e: vcir::Error) -> Self {
        match e {
            vcir::Error::Domain { .. } | vcir::Error::Range { .. } => CliError::Config(e.to_string()),
            vcir::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            vcir::Error::AllDegenerate { .. } => CliError::Degenerate(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "vcir",
    version,
    about = "Volterra CIR simulation, transforms and drift estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one Euler path; writes path.csv (t,X) and optionally z.csv (t,Z).
    #[command(after_help = config::FILE_HELP)]
    Simulate(SimulateCmd),
    /// Solve the Riccati-Volterra equation for u at time t; writes riccati.csv (t,V) and laplace.csv.
    #[command(after_help = config::FILE_HELP)]
    Riccati(TransformCmd),
    /// Laplace transform of marginals, joint marginals or the limit law; writes laplace.csv.
    #[command(after_help = config::FILE_HELP)]
    Laplace(TransformCmd),
    /// Estimate (b, beta) from a path CSV; writes estimate.csv.
    #[command(after_help = config::FILE_HELP)]
    Estimate(EstimateCmd),
    /// Monte Carlo estimator table; writes table.csv and normality.csv.
    #[command(after_help = config::FILE_HELP)]
    McTable(McTableCmd),
    /// Time averages along one path; writes lln.csv.
    #[command(after_help = config::FILE_HELP)]
    Lln(LlnCmd),
    /// Asymptotic independence gaps by Monte Carlo and Riccati; writes independence.csv.
    #[command(after_help = config::FILE_HELP)]
    Independence(IndependenceCmd),
    /// Trend of the partition mesh conditions; writes partition.csv.
    #[command(after_help = config::FILE_HELP)]
    CheckPartition(PartitionCmd),
}

/// Declares a subcommand made of config sections. Each section is a TOML
/// table of the same name and a flattened group of flags.
macro_rules! command {
    ($name:ident { $($field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Args, Deserialize, Debug, Default)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            #[command(flatten)]
            #[serde(default)]
            pub run: RunArgs,
            $(
                #[command(flatten)]
                #[serde(default)]
                pub $field: $ty,
            )*
        }

        impl Layered for $name {
            fn run_args(&self) -> &RunArgs {
                &self.run
            }

            fn overlay_all(&mut self, top: Self) {
                self.run.overlay(top.run);
                $( self.$field.overlay(top.$field); )*
            }
        }
    };
}

pub trait Layered: DeserializeOwned + Sized {
    fn run_args(&self) -> &RunArgs;
    fn overlay_all(&mut self, top: Self);

    /// File values from `--config` with the flags laid over them.
    fn resolve(self) -> Result<Self, CliError> {
        let Some(path) = self.run_args().config.clone() else {
            return Ok(self);
        };
        let mut base: Self = config::read_file(&path)?;
        base.overlay_all(self);
        Ok(base)
    }
}

command!(SimulateCmd {
    kernel: KernelArgs,
    model: ModelArgs,
    grid: GridArgs,
    simulate: SimulateArgs
});
command!(TransformCmd {
    kernel: KernelArgs,
    model: ModelArgs,
    grid: GridArgs,
    transform: TransformArgs
});
command!(EstimateCmd {
    kernel: KernelArgs,
    model: ModelArgs,
    grid: GridArgs,
    estimate: EstimateArgs
});
command!(McTableCmd {
    kernel: KernelArgs,
    model: ModelArgs,
    grid: GridArgs,
    monte_carlo: MonteCarloArgs
});
command!(LlnCmd {
    kernel: KernelArgs,
    model: ModelArgs,
    grid: GridArgs,
    monte_carlo: MonteCarloArgs,
    lln: LlnArgs
});
command!(IndependenceCmd {
    kernel: KernelArgs,
    model: ModelArgs,
    grid: GridArgs,
    monte_carlo: MonteCarloArgs,
    independence: IndependenceArgs,
});
command!(PartitionCmd {
    kernel: KernelArgs,
    partition: PartitionArgs
});

fn init_threads(run: &RunArgs) -> Result<(), CliError> {
    if let Some(n) = run.threads {
        if n == 0 {
            return Err(CliError::Config("threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    Ok(())
}

fn execute<C: Layered>(cmd: C, f: fn(&C) -> Result<commands::Outcome, CliError>) -> Result<(), CliError> {
    let cmd = cmd.resolve()?;
    init_threads(cmd.run_args())?;
    let outcome = f(&cmd)?;
    if !cmd.run_args().quiet.unwrap_or(false) {
        // A closed stdout (e.g. piped into `head`) is not an error.
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{}", outcome.summary);
        for p in &outcome.files {
            let _ = writeln!(out, "wrote {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(c) => execute(c, commands::simulate),
        Command::Riccati(c) => execute(c, commands::riccati),
        Command::Laplace(c) => execute(c, commands::laplace),
        Command::Estimate(c) => execute(c, commands::estimate),
        Command::McTable(c) => execute(c, commands::mc_table),
        Command::Lln(c) => execute(c, commands::lln),
        Command::Independence(c) => execute(c, commands::independence),
        Command::CheckPartition(c) => execute(c, commands::check_partition),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vcir: {e}");
            ExitCode::from(e.code())
        }
    }
}

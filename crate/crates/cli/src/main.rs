//! `mixcg`: simulate mixed data, fit graphs, evaluate and stability-select.
//!
//! Exit status: 0 on success, 1 when a run fails, 2 for usage, config or
//! input errors.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "mixcg",
    version,
    about = "Mixed graphical models for binary and continuous data"
)]
struct Cli {
    /// Worker threads for the parallel loops (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a graph, parameters and an exact sample.
    Simulate(config::SimulateArgs),
    /// Fit graphs across a penalty grid.
    Fit(config::FitArgs),
    /// ROC tables and AUC of fitted graphs against a truth.
    Eval(config::EvalArgs),
    /// Edge selection frequencies over half-samples.
    Stability(config::StabilityArgs),
}

/// Bad invocation, config or input data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(UsageError("--threads must be positive".into()).into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("warning: built without parallel support; --threads {n} ignored");
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a.resolve()?, cli.threads),
        Command::Fit(a) => commands::fit(&a.resolve()?, cli.threads),
        Command::Eval(a) => commands::eval(&a.resolve()?),
        Command::Stability(a) => commands::stability(&a.resolve()?, cli.threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

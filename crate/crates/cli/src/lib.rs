//! The `specest` command-line tool.

pub mod args;
pub mod cdf;
pub mod commands;
pub mod simulate;

use std::process::ExitCode;

use anyhow::Result;

pub use args::{Cli, Command};

pub fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate(a) => {
            let failures = simulate::simulate(a)?;
            if failures.is_empty() {
                return Ok(ExitCode::SUCCESS);
            }
            eprintln!("{} cell(s) failed:", failures.len());
            for f in &failures {
                eprintln!("  {f}");
            }
            return Ok(ExitCode::FAILURE);
        }
        Command::Estimate(a) => commands::estimate(a)?,
        Command::LowerBound(a) => commands::lower_bound(a)?,
        Command::Generate(a) => commands::generate(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for an
//! invalid config (or unwritable output), 3 when an iteration fails to
//! converge.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_exhaust, cmd_solve, cmd_verify, CommandError, RunOptions};
pub use config::{ConfigError, EmitFlags, RunConfig, VortexEntry};
pub use report::{Check, Report};

#[derive(Debug, Parser)]
#[command(name = "lattice-vortex", version, about = "Maximal topological vortex solutions on Z^n")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for artifacts; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for per-radius solves in `exhaust`.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve on the largest configured radius.
    Solve { config: PathBuf },
    /// Solve on every radius, compare nested solutions and fit the decay rate.
    Exhaust { config: PathBuf },
    /// Run the property checks at desk scale.
    Verify { config: PathBuf },
}

fn print_report(report: &Report) {
    for r in &report.radii {
        println!(
            "R = {}: {} unknowns, {} iterations, residual {:e}, f(0) = {}",
            r.radius, r.unknowns, r.iterations, r.terminal_residual, r.origin_value
        );
    }
    for c in report.radii.iter().flat_map(|r| &r.checks).chain(&report.checks) {
        let status = if c.passed { "ok  " } else { "FAIL" };
        println!("{status} {:<28} {}", c.name, c.detail);
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let opts = RunOptions { output_dir: cli.output_dir, jobs: cli.jobs as usize, quiet: cli.quiet };
    let result = match &cli.command {
        Command::Solve { config } => cmd_solve(config, &opts),
        Command::Exhaust { config } => cmd_exhaust(config, &opts),
        Command::Verify { config } => cmd_verify(config, &opts),
    };
    match result {
        Ok(report) => {
            if !opts.quiet {
                print_report(&report);
            }
            if report.all_passed {
                0
            } else {
                for c in report.failed_checks() {
                    eprintln!("check failed: {}: {}", c.name, c.detail);
                }
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

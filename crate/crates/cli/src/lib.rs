//! Command-line front end for `xcm-bootstrap`: fitting, confidence regions
//! and coverage studies, with every output carrying the configuration that
//! produced it.

pub mod commands;
pub mod config;
pub mod error;
mod input;
pub mod svg;

use config::{Cli, Cmd, Command, RunConfig};
use error::CliResult;

pub use input::read_experiment;

/// Converts parsed arguments into a run configuration and executes it.
pub fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.command {
        Cmd::Fit(a) => RunConfig::from_fit(a)?,
        Cmd::Region(a) => RunConfig::from_region(a)?,
        Cmd::Simulate(a) => RunConfig::from_sim(a, Command::Simulate)?,
        Cmd::CompareN(a) => RunConfig::from_sim(a, Command::CompareN)?,
        Cmd::Replay(a) => {
            let mut c = commands::load_config(&a.document)?;
            c.out = a.out.clone();
            c.threads = a.threads;
            c
        }
    };
    commands::execute(&config)
}

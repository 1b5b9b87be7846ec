//! Command-line arguments and the run configuration embedded in every output.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use xcm_bootstrap::bandwidth::BandwidthMethod;
use xcm_bootstrap::model::Region;
use xcm_bootstrap::sim::SystemName;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "xcmboot",
    version,
    about = "Bootstrap confidence regions for the constrained maximum of a fitted response surface"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Fit the second-order model and report its constrained maximum.
    Fit(FitArgs),
    /// Build a bootstrap confidence region for the constrained maximum.
    Region(RegionArgs),
    /// Coverage study on a reference surface.
    Simulate(SimArgs),
    /// Coverage studies over several design replication counts.
    CompareN(SimArgs),
    /// Re-run the configuration embedded in an output document.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandwidthArg {
    Rot,
    Plugin,
}

impl From<BandwidthArg> for BandwidthMethod {
    fn from(b: BandwidthArg) -> Self {
        match b {
            BandwidthArg::Rot => BandwidthMethod::RuleOfThumb,
            BandwidthArg::Plugin => BandwidthMethod::PlugIn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    ConcaveDown,
    Saddle,
}

impl From<SystemArg> for SystemName {
    fn from(s: SystemArg) -> Self {
        match s {
            SystemArg::ConcaveDown => SystemName::ConcaveDown,
            SystemArg::Saddle => SystemName::Saddle,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experimental region as lo1,hi1,lo2,hi2.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-1.4,1.4,-1.4,1.4"
    )]
    pub bounds: Vec<f64>,
    /// Output directory.
    #[arg(long, default_value = "xcmboot-out")]
    pub out: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with columns x1,x2,y.
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct RegionArgs {
    /// CSV with columns x1,x2,y.
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 2000)]
    pub b: usize,
    /// One minus the confidence coefficient.
    #[arg(long, default_value_t = 0.10)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "rot")]
    pub bandwidth: BandwidthArg,
    /// Fixed bandwidths h1,h2 instead of a selector.
    #[arg(long, value_delimiter = ',')]
    pub bandwidth_override: Option<Vec<f64>>,
    /// Fail (exit 5) instead of falling back to the rule of thumb.
    #[arg(long)]
    pub no_plugin_fallback: bool,
    /// Lattice intervals per axis for contouring.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long)]
    pub seed: u64,
    /// Write region.svg.
    #[arg(long)]
    pub emit_svg: bool,
    /// Write cloud.csv.
    #[arg(long)]
    pub emit_cloud: bool,
    /// Write grid.csv.
    #[arg(long)]
    pub emit_grid: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(value_enum)]
    pub system: SystemArg,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 500)]
    pub n_reps: usize,
    #[arg(long, default_value_t = 100)]
    pub group_size: usize,
    /// Design replication counts (13 runs each); simulate defaults to 1,
    /// compare-n to 1,2,16.
    #[arg(long, value_delimiter = ',')]
    pub replicates: Option<Vec<usize>>,
    #[arg(long, default_value_t = 2000)]
    pub b: usize,
    /// Alphas to evaluate, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.10,0.08,0.06,0.04,0.02"
    )]
    pub alphas: Vec<f64>,
    #[arg(long, value_enum, default_value = "rot")]
    pub bandwidth: BandwidthArg,
    /// Standard deviation of the simulated errors.
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// An output document (or a bare configuration) written by an earlier run.
    pub document: PathBuf,
    #[arg(long, default_value = "xcmboot-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fit,
    Region,
    Simulate,
    CompareN,
}

/// Everything that determines a run's results. The output directory and
/// thread count are not part of it, so they never change output bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub bounds: [f64; 4],
    pub b: usize,
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub bandwidth: BandwidthMethod,
    pub bandwidth_override: Option<[f64; 2]>,
    pub allow_plugin_fallback: bool,
    pub grid: usize,
    pub seed: Option<u64>,
    pub emit_svg: bool,
    pub emit_cloud: bool,
    pub emit_grid: bool,
    pub system: Option<SystemName>,
    pub n_reps: usize,
    pub group_size: usize,
    pub replicates: Vec<usize>,
    pub sigma: f64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl RunConfig {
    fn base(command: Command, common: &Common) -> CliResult<Self> {
        let bounds: [f64; 4] = common.bounds.as_slice().try_into().map_err(|_| {
            CliError::Usage(format!(
                "--bounds needs 4 values, got {}",
                common.bounds.len()
            ))
        })?;
        Ok(Self {
            command,
            input: None,
            bounds,
            b: 2000,
            alpha: 0.10,
            alphas: Vec::new(),
            bandwidth: BandwidthMethod::RuleOfThumb,
            bandwidth_override: None,
            allow_plugin_fallback: true,
            grid: 256,
            seed: None,
            emit_svg: false,
            emit_cloud: false,
            emit_grid: false,
            system: None,
            n_reps: 0,
            group_size: 0,
            replicates: Vec::new(),
            sigma: 0.0,
            out: common.out.clone(),
            threads: common.threads,
        })
    }

    pub fn from_fit(a: &FitArgs) -> CliResult<Self> {
        Ok(Self {
            input: Some(a.input.clone()),
            ..Self::base(Command::Fit, &a.common)?
        })
    }

    pub fn from_region(a: &RegionArgs) -> CliResult<Self> {
        let bandwidth_override = match &a.bandwidth_override {
            None => None,
            Some(v) => Some(<[f64; 2]>::try_from(v.as_slice()).map_err(|_| {
                CliError::Usage(format!(
                    "--bandwidth-override needs 2 values, got {}",
                    v.len()
                ))
            })?),
        };
        Ok(Self {
            input: Some(a.input.clone()),
            b: a.b,
            alpha: a.alpha,
            bandwidth: a.bandwidth.into(),
            bandwidth_override,
            allow_plugin_fallback: !a.no_plugin_fallback,
            grid: a.grid,
            seed: Some(a.seed),
            emit_svg: a.emit_svg,
            emit_cloud: a.emit_cloud,
            emit_grid: a.emit_grid,
            ..Self::base(Command::Region, &a.common)?
        })
    }

    pub fn from_sim(a: &SimArgs, command: Command) -> CliResult<Self> {
        let replicates = a.replicates.clone().unwrap_or_else(|| match command {
            Command::CompareN => vec![1, 2, 16],
            _ => vec![1],
        });
        if command == Command::Simulate && replicates.len() != 1 {
            return Err(CliError::Usage(
                "simulate takes one --replicates value; use compare-n for several".into(),
            ));
        }
        Ok(Self {
            b: a.b,
            alphas: a.alphas.clone(),
            bandwidth: a.bandwidth.into(),
            seed: Some(a.seed),
            system: Some(a.system.into()),
            n_reps: a.n_reps,
            group_size: a.group_size,
            replicates,
            sigma: a.sigma,
            ..Self::base(command, &a.common)?
        })
    }

    pub fn region(&self) -> CliResult<Region> {
        let [lo1, hi1, lo2, hi2] = self.bounds;
        Region::new([lo1, lo2], [hi1, hi2]).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Usage("a seed is required for this command".into()))
    }
}

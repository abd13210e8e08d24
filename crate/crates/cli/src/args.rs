use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wlan_assoc::policies::PolicyKind;
use wlan_assoc::scenario::Geometry;
use wlan_assoc::AssociationState;

/// Throughput, delay and association-policy experiments for multirate
/// 802.11b WLANs.
#[derive(Debug, Parser)]
#[command(name = "wlan-assoc", version, about)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate TCP throughput of one or more association states.
    Throughput(ThroughputArgs),
    /// Mean download delay at one or more association states.
    Delay(DelayArgs),
    /// Slot-level Monte Carlo estimate of the aggregate throughput.
    Oracle(OracleArgs),
    /// Flow-level simulation with one association policy.
    Simulate(SimulateArgs),
    /// Policy comparison over a sweep of p_centre and arrival rates.
    Compare(CompareArgs),
    /// Run the acceptance checks and report PASS/FAIL per criterion.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (TOML), merged over the built-in defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// PHY/MAC parameters (TOML) overlaid on the `phy_mac` section.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,

    /// File class mix (TOML) overlaid on the `mix` section.
    #[arg(long, value_name = "FILE")]
    pub mix: Option<PathBuf>,

    /// Backlog truncation of the throughput chain.
    #[arg(long, value_name = "N")]
    pub n_max: Option<usize>,

    /// Write CSV, JSON and manifest files into this directory.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

/// Parses `count@rate,...` and rejects states with no stations.
pub fn parse_state(s: &str) -> Result<AssociationState, String> {
    let state: AssociationState = s.parse().map_err(|e: wlan_assoc::Error| e.to_string())?;
    if state.total() == 0 {
        return Err(format!("{s:?} has no stations"));
    }
    Ok(state)
}

#[derive(Debug, Args)]
pub struct ThroughputArgs {
    /// Association states such as `2@11,3@5.5,2@2,3@1`.
    #[arg(required = true, value_parser = parse_state)]
    pub states: Vec<AssociationState>,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DelayArgs {
    #[arg(required = true, value_parser = parse_state)]
    pub states: Vec<AssociationState>,

    /// Add a station at this rate before evaluating.
    #[arg(long, value_name = "MBPS")]
    pub with_newcomer: Option<f64>,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(required = true, value_parser = parse_state)]
    pub states: Vec<AssociationState>,

    /// Successful transmissions to simulate per state.
    #[arg(long, default_value_t = 200_000)]
    pub epochs: u64,

    /// Seed of the first state; later states use consecutive seeds.
    #[arg(long)]
    pub seed: Option<u64>,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioOverrides {
    #[arg(long)]
    pub geometry: Option<Geometry>,

    /// Station arrival rate per second.
    #[arg(long, value_name = "PER_S")]
    pub arrival_rate: Option<f64>,

    /// Simulated time in seconds.
    #[arg(long, value_name = "S")]
    pub duration: Option<f64>,

    /// Check flow conservation during the run.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub policy: Option<PolicyKind>,

    /// Probability that a station arrives in the shaded centre region.
    #[arg(long)]
    pub p_centre: Option<f64>,

    /// First seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of replicated runs with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub seeds: u32,

    #[command(flatten)]
    pub scenario: ScenarioOverrides,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Policies to compare, e.g. `eda,rssi`.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<PolicyKind>>,

    /// p_centre values, e.g. `0.1,0.5,0.9`.
    #[arg(long, value_delimiter = ',')]
    pub p_centre: Option<Vec<f64>>,

    /// Arrival rates per second, e.g. `0.5,1`.
    #[arg(long, value_delimiter = ',')]
    pub arrival_rates: Option<Vec<f64>>,

    /// First seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Replicated runs per grid point.
    #[arg(long)]
    pub seeds: Option<u32>,

    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,

    #[command(flatten)]
    pub scenario: ScenarioOverrides,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Run only these criteria, e.g. `2,4`.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u32>>,

    /// Oracle epochs per state for criterion 2.
    #[arg(long, default_value_t = wlan_assoc::validation::ORACLE_EPOCHS)]
    pub epochs: u64,

    /// Files per state for criterion 5.
    #[arg(long, default_value_t = 5_000)]
    pub files: u64,

    #[command(flatten)]
    pub common: Common,
}

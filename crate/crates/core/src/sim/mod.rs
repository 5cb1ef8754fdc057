//! Seeded discrete-epoch scenario runs.
//!
//! A run is a pure function of the economy document, the scenario and its
//! seed: agent balances are drawn once from a ChaCha8 stream, and every later
//! random draw (governance participation) comes from the same stream in a
//! fixed order.

mod engine;
pub mod presets;
mod report;
mod scenario;

pub use engine::{run_scenario, run_scenario_with, EpochRecord, Event, GovernanceOutcome};
pub use presets::{preset, resolve_spec, PRESETS};
pub use report::{summarize, write_csv, EpochDigest, ScenarioReport, Summary};
pub use scenario::{
    AgentGroup, BalanceDistribution, Behavior, GovernanceSchedule, PriceModel, Scenario, Shock,
    ShockKind, VestingGrant,
};

use crate::governance::GovernanceError;
use crate::metrics::MetricsError;
use crate::quantity::Quantity;
use crate::spec::Finding;
use crate::supply::SupplyError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("economy document has {} validation error(s)", .0.len())]
    InvalidSpec(Vec<Finding>),
    #[error("unknown preset `{name}`; expected one of {}", .expected.join(", "))]
    UnknownPreset { name: String, expected: Vec<String> },
    #[error("token `{0}` is not declared in the economy document")]
    UnknownToken(String),
    #[error("market pool would go negative ({0})")]
    MarketUnderflow(Quantity),
    #[error("invariant broken: {0}")]
    Invariant(String),
    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: u64,
        #[source]
        source: Box<SimError>,
    },
    #[error(transparent)]
    Supply(#[from] SupplyError),
    #[error(transparent)]
    Governance(#[from] GovernanceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

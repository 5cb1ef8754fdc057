use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::governance::{Choice, ProposalKind, VotingMechanism};
use crate::quantity::Quantity;
use crate::spec::{parse_spec_as, SpecError, SpecFormat, StakeholderCategory};
use crate::supply::{ScheduledFlows, VestingSchedule};

/// A stress run over one economy document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Path or bundled fixture name of the economy document, for file-driven runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    pub epochs: u64,
    pub seed: u64,
    /// Token symbol to simulate; defaults to the document's first token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    /// Replaces the document's chosen mechanism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<VotingMechanism>,
    pub agents: Vec<AgentGroup>,
    #[serde(default)]
    pub shocks: Vec<Shock>,
    #[serde(default)]
    pub price_model: PriceModel,
    #[serde(default = "default_price")]
    pub reference_price: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub governance: Option<GovernanceSchedule>,
    /// Scripted supply flows settled against the market pool.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<ScheduledFlows>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vesting: Vec<VestingGrant>,
    /// Tokens held by the market at epoch 0.
    #[serde(default)]
    pub market_pool: Quantity,
    /// Cluster whose voting-power share is reported every epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_cluster: Option<String>,
}

fn default_price() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentGroup {
    pub name: String,
    pub category: StakeholderCategory,
    pub population: u64,
    pub balance: BalanceDistribution,
    #[serde(default)]
    pub behavior: Behavior,
    #[serde(default = "default_stance")]
    pub stance: Choice,
    #[serde(default)]
    pub lock_epochs: u64,
    /// Restores `lock_epochs` every epoch instead of letting the lock run down.
    #[serde(default)]
    pub relock: bool,
    #[serde(default)]
    pub reputation: Quantity,
    /// Voice credits; when absent, credits track the token balance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credits: Option<Quantity>,
    /// Shared identity cluster for every member; each member is its own cluster otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<String>,
}

fn default_stance() -> Choice {
    Choice::For
}

/// Initial balances, floored to whole tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BalanceDistribution {
    Fixed { amount: u64 },
    Uniform { min: u64, max: u64 },
    Pareto { scale: f64, shape: f64 },
}

/// Agent behavior profiles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    #[default]
    Hold,
    /// Sells `fraction` of its balance whenever the price sits more than
    /// `drop` below the reference price.
    ThresholdSeller { fraction: f64, drop: f64 },
    /// Votes with probability `p` in each governance round.
    GovernanceParticipant { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    /// Targets sell `magnitude` of their balance to the market.
    SellOff,
    /// The target cluster buys from everyone else until it holds `magnitude` of agent balances.
    WhaleAccumulation,
    /// Every identity of the target cluster splits into `magnitude` identities.
    SybilSplit,
    /// Releases `magnitude` of the still-locked vesting immediately.
    UnlockEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub epoch: u64,
    pub kind: ShockKind,
    pub magnitude: f64,
    /// Cluster or group name; sell-offs and unlocks hit everyone when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceModel {
    #[default]
    None,
    /// `price_t = price_{t-1} * (1 + coefficient * net_demand_t)`, net demand
    /// being net buys over circulating supply.
    LinearImpact { coefficient: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernanceSchedule {
    #[serde(default = "one")]
    pub start: u64,
    #[serde(default = "one")]
    pub every: u64,
    #[serde(default = "half")]
    pub threshold: Quantity,
    #[serde(default = "default_kind")]
    pub kind: ProposalKind,
    /// Conviction needed to pass; defaults to `threshold` of the steady-state
    /// conviction of the whole voting power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conviction_threshold: Option<Quantity>,
}

fn one() -> u64 {
    1
}

fn half() -> Quantity {
    Quantity::from_ratio(1, 2)
}

fn default_kind() -> ProposalKind {
    ProposalKind::Treasury
}

impl GovernanceSchedule {
    pub fn is_round(&self, epoch: u64) -> bool {
        epoch >= self.start && (epoch - self.start) % self.every == 0
    }
}

/// Vested allocation paid out evenly to the members of `group`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VestingGrant {
    pub group: String,
    pub schedule: VestingSchedule,
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidScenario(msg.into())
}

fn check_fraction(what: &str, v: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be within [0, 1], got {v}")))
    }
}

impl Scenario {
    pub fn check(&self) -> Result<(), SimError> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.agents.is_empty() {
            return Err(invalid("at least one agent group is required"));
        }
        if !self.reference_price.is_finite() || self.reference_price <= 0.0 {
            return Err(invalid("reference_price must be positive"));
        }
        if self.market_pool.is_negative() {
            return Err(invalid("market_pool must not be negative"));
        }
        let mut groups = BTreeSet::new();
        for g in &self.agents {
            if !groups.insert(g.name.as_str()) {
                return Err(invalid(format!("duplicate agent group `{}`", g.name)));
            }
            if g.population == 0 {
                return Err(invalid(format!(
                    "group `{}` needs a population of at least 1",
                    g.name
                )));
            }
            if g.reputation.is_negative() || g.credits.as_ref().is_some_and(Quantity::is_negative) {
                return Err(invalid(format!(
                    "group `{}` has negative reputation or credits",
                    g.name
                )));
            }
            match g.balance {
                BalanceDistribution::Uniform { min, max } if min > max => {
                    return Err(invalid(format!(
                        "group `{}`: uniform min exceeds max",
                        g.name
                    )))
                }
                BalanceDistribution::Pareto { scale, shape } if !(scale > 0.0 && shape > 0.0) => {
                    return Err(invalid(format!(
                        "group `{}`: pareto scale and shape must be positive",
                        g.name
                    )))
                }
                _ => {}
            }
            match g.behavior {
                Behavior::ThresholdSeller { fraction, drop } => {
                    check_fraction("threshold_seller.fraction", fraction)?;
                    check_fraction("threshold_seller.drop", drop)?;
                }
                Behavior::GovernanceParticipant { p } => {
                    check_fraction("governance_participant.p", p)?
                }
                Behavior::Hold => {}
            }
        }
        for s in &self.shocks {
            if s.epoch == 0 || s.epoch > self.epochs {
                return Err(invalid(format!(
                    "shock at epoch {} is outside 1..={}",
                    s.epoch, self.epochs
                )));
            }
            match s.kind {
                ShockKind::SellOff | ShockKind::UnlockEvent => {
                    check_fraction("shock magnitude", s.magnitude)?
                }
                ShockKind::WhaleAccumulation => {
                    if !(s.magnitude > 0.0 && s.magnitude < 1.0) {
                        return Err(invalid(
                            "whale_accumulation magnitude must be within (0, 1)",
                        ));
                    }
                    if s.target.is_none() {
                        return Err(invalid("whale_accumulation needs a target cluster"));
                    }
                }
                ShockKind::SybilSplit => {
                    if s.magnitude < 1.0 || s.magnitude.fract() != 0.0 || s.magnitude > 1024.0 {
                        return Err(invalid(
                            "sybil_split magnitude must be a whole number in 1..=1024",
                        ));
                    }
                    if s.target.is_none() {
                        return Err(invalid("sybil_split needs a target cluster"));
                    }
                }
            }
        }
        if let PriceModel::LinearImpact { coefficient } = self.price_model {
            if !coefficient.is_finite() || coefficient < 0.0 {
                return Err(invalid(
                    "linear_impact coefficient must be finite and non-negative",
                ));
            }
        }
        if let Some(g) = &self.governance {
            if g.every == 0 {
                return Err(invalid("governance.every must be at least 1"));
            }
            if !g.threshold.is_positive() || g.threshold > 1 {
                return Err(invalid("governance.threshold must be within (0, 1]"));
            }
        }
        for v in &self.vesting {
            if !groups.contains(v.group.as_str()) {
                return Err(invalid(format!(
                    "vesting grant for unknown group `{}`",
                    v.group
                )));
            }
            v.schedule
                .check()
                .map_err(|e| invalid(format!("vesting for `{}`: {e}", v.group)))?;
        }
        Ok(())
    }

    pub fn population(&self) -> u64 {
        self.agents.iter().map(|g| g.population).sum()
    }

    pub fn parse(doc: &str) -> Result<Scenario, SpecError> {
        parse_spec_as(doc, SpecFormat::detect(doc)).map(|(s, _)| s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, SpecError> {
        let path = path.as_ref();
        let doc = std::fs::read_to_string(path).map_err(|e| SpecError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let format = SpecFormat::from_path(path).unwrap_or_else(|| SpecFormat::detect(&doc));
        parse_spec_as(&doc, format).map(|(s, _)| s)
    }
}

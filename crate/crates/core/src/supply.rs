//! Token supply accounting over discrete epochs.
//!
//! One epoch applies the clamped identity
//!
//! ```text
//! S_t = min(S_max, S_{t-1} + M_t - B_t)
//! ```
//!
//! to the outstanding supply (circulating + staked + vesting-locked + treasury-held),
//! with staking and vesting releases moving tokens between buckets without
//! changing the total. A mint that would overshoot the cap is truncated and the
//! truncation is reported alongside the new state.

use std::io::Read;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::quantity::Quantity;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SupplyError {
    #[error("supply underflow: {what} needs {needed} but only {available} is available")]
    SupplyUnderflow {
        what: &'static str,
        needed: Quantity,
        available: Quantity,
    },
    #[error("outstanding supply {outstanding} already exceeds cap {s_max}")]
    CapViolation {
        outstanding: Quantity,
        s_max: Quantity,
    },
    #[error(
        "inflationary policy requires minted > burned, got minted {minted} and burned {burned}"
    )]
    ConstraintViolation { minted: Quantity, burned: Quantity },
    #[error("insufficient treasury: buyback costs {cost} but treasury holds {treasury}")]
    InsufficientTreasury { cost: Quantity, treasury: Quantity },
    #[error("flow `{0}` must be non-negative")]
    NegativeFlow(&'static str),
    #[error("invalid supply policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("invalid vesting schedule: {0}")]
    InvalidVesting(&'static str),
    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: u64,
        #[source]
        source: Box<SupplyError>,
    },
    #[error("flow schedule row {row}: {message}")]
    FlowSchedule { row: usize, message: String },
}

impl SupplyError {
    fn at(self, epoch: u64) -> SupplyError {
        SupplyError::AtEpoch {
            epoch,
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SupplyKind {
    Capped,
    Uncapped,
}

/// What happens to tokens acquired by a buyback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BuybackMode {
    #[default]
    Burn,
    TreasuryHold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SupplyPolicyDoc", into = "SupplyPolicyDoc")]
pub struct SupplyPolicy {
    kind: SupplyKind,
    s_max: Option<Quantity>,
    pub inflationary_constraint: bool,
    pub buyback_mode: BuybackMode,
}

#[derive(Serialize, Deserialize, JsonSchema)]
#[schemars(rename = "SupplyPolicy")]
struct SupplyPolicyDoc {
    kind: SupplyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s_max: Option<Quantity>,
    #[serde(default)]
    inflationary_constraint: bool,
    #[serde(default)]
    buyback_mode: BuybackMode,
}

impl TryFrom<SupplyPolicyDoc> for SupplyPolicy {
    type Error = SupplyError;

    fn try_from(doc: SupplyPolicyDoc) -> Result<Self, Self::Error> {
        let base = match (doc.kind, doc.s_max) {
            (SupplyKind::Capped, Some(cap)) => SupplyPolicy::capped(cap)?,
            (SupplyKind::Capped, None) => {
                return Err(SupplyError::InvalidPolicy("capped supply requires s_max"))
            }
            (SupplyKind::Uncapped, None) => SupplyPolicy::uncapped(),
            (SupplyKind::Uncapped, Some(_)) => {
                return Err(SupplyError::InvalidPolicy(
                    "uncapped supply must not define s_max",
                ))
            }
        };
        Ok(base
            .with_inflationary_constraint(doc.inflationary_constraint)
            .with_buyback_mode(doc.buyback_mode))
    }
}

impl From<SupplyPolicy> for SupplyPolicyDoc {
    fn from(p: SupplyPolicy) -> Self {
        SupplyPolicyDoc {
            kind: p.kind,
            s_max: p.s_max,
            inflationary_constraint: p.inflationary_constraint,
            buyback_mode: p.buyback_mode,
        }
    }
}

impl JsonSchema for SupplyPolicy {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        SupplyPolicyDoc::schema_name()
    }

    fn json_schema(gen: &mut schemars::SchemaGenerator) -> schemars::Schema {
        SupplyPolicyDoc::json_schema(gen)
    }
}

impl SupplyPolicy {
    pub fn capped(s_max: Quantity) -> Result<Self, SupplyError> {
        if s_max.is_negative() {
            return Err(SupplyError::InvalidPolicy("s_max must be non-negative"));
        }
        Ok(SupplyPolicy {
            kind: SupplyKind::Capped,
            s_max: Some(s_max),
            inflationary_constraint: false,
            buyback_mode: BuybackMode::Burn,
        })
    }

    pub fn uncapped() -> Self {
        SupplyPolicy {
            kind: SupplyKind::Uncapped,
            s_max: None,
            inflationary_constraint: false,
            buyback_mode: BuybackMode::Burn,
        }
    }

    pub fn with_inflationary_constraint(mut self, on: bool) -> Self {
        self.inflationary_constraint = on;
        self
    }

    pub fn with_buyback_mode(mut self, mode: BuybackMode) -> Self {
        self.buyback_mode = mode;
        self
    }

    pub fn kind(&self) -> SupplyKind {
        self.kind
    }

    pub fn s_max(&self) -> Option<&Quantity> {
        self.s_max.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SupplyState {
    pub epoch: u64,
    pub circulating: Quantity,
    #[serde(default)]
    pub staked: Quantity,
    #[serde(default)]
    pub vesting_locked: Quantity,
    /// Tokens bought back and held rather than burned.
    #[serde(default)]
    pub treasury_held: Quantity,
    #[serde(default)]
    pub cumulative_minted: Quantity,
    #[serde(default)]
    pub cumulative_burned: Quantity,
}

impl SupplyState {
    pub fn with_circulating(circulating: Quantity) -> Self {
        SupplyState {
            circulating,
            ..Default::default()
        }
    }

    /// Everything counted against the cap.
    pub fn outstanding(&self) -> Quantity {
        &(&self.circulating + &self.staked) + &(&self.vesting_locked + &self.treasury_held)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EpochFlows {
    pub minted: Quantity,
    pub burned: Quantity,
    pub buyback: Quantity,
    /// Positive moves circulating into staked, negative unstakes.
    pub stake_delta: Quantity,
    pub vest_release: Quantity,
}

impl EpochFlows {
    pub fn mint(amount: Quantity) -> Self {
        EpochFlows {
            minted: amount,
            ..Default::default()
        }
    }

    pub fn mint_burn(minted: Quantity, burned: Quantity) -> Self {
        EpochFlows {
            minted,
            burned,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<(), SupplyError> {
        for (name, v) in [
            ("minted", &self.minted),
            ("burned", &self.burned),
            ("buyback", &self.buyback),
            ("vest_release", &self.vest_release),
        ] {
            if v.is_negative() {
                return Err(SupplyError::NegativeFlow(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub requested: Quantity,
    pub minted: Quantity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplyStep {
    pub state: SupplyState,
    pub truncation: Option<Truncation>,
}

fn underflow(what: &'static str, needed: &Quantity, available: &Quantity) -> SupplyError {
    SupplyError::SupplyUnderflow {
        what,
        needed: needed.clone(),
        available: available.clone(),
    }
}

pub fn step_supply(
    state: &SupplyState,
    flows: &EpochFlows,
    policy: &SupplyPolicy,
) -> Result<SupplyStep, SupplyError> {
    flows.check()?;
    let outstanding = state.outstanding();
    if let Some(cap) = policy.s_max() {
        if &outstanding > cap {
            return Err(SupplyError::CapViolation {
                outstanding,
                s_max: cap.clone(),
            });
        }
    }

    let burn_variant = policy.buyback_mode == BuybackMode::Burn;
    let burned_total = if burn_variant {
        &flows.burned + &flows.buyback
    } else {
        flows.burned.clone()
    };
    if policy.inflationary_constraint && flows.minted <= burned_total {
        return Err(SupplyError::ConstraintViolation {
            minted: flows.minted.clone(),
            burned: burned_total,
        });
    }

    let removed = &flows.burned + &flows.buyback;
    let available = &state.circulating + &flows.minted;
    if removed > available {
        return Err(underflow("burn and buyback", &removed, &available));
    }
    if flows.vest_release > state.vesting_locked {
        return Err(underflow(
            "vesting release",
            &flows.vest_release,
            &state.vesting_locked,
        ));
    }

    let (minted, truncation) = match policy.s_max() {
        Some(cap) => {
            let headroom = &(cap - &outstanding) + &burned_total;
            if flows.minted > headroom {
                let t = Truncation {
                    requested: flows.minted.clone(),
                    minted: headroom.clone(),
                };
                (headroom, Some(t))
            } else {
                (flows.minted.clone(), None)
            }
        }
        None => (flows.minted.clone(), None),
    };

    let circulating =
        &(&(&state.circulating + &minted) - &removed) + &(&flows.vest_release - &flows.stake_delta);
    if circulating.is_negative() {
        let after_flows = &(&state.circulating + &minted) - &removed;
        return Err(underflow(
            "stake",
            &flows.stake_delta,
            &(&after_flows + &flows.vest_release),
        ));
    }
    let staked = &state.staked + &flows.stake_delta;
    if staked.is_negative() {
        return Err(underflow(
            "unstake",
            &flows.stake_delta.abs(),
            &state.staked,
        ));
    }

    let treasury_held = if burn_variant {
        state.treasury_held.clone()
    } else {
        &state.treasury_held + &flows.buyback
    };

    Ok(SupplyStep {
        state: SupplyState {
            epoch: state.epoch + 1,
            circulating,
            staked,
            vesting_locked: &state.vesting_locked - &flows.vest_release,
            treasury_held,
            cumulative_minted: &state.cumulative_minted + &minted,
            cumulative_burned: &state.cumulative_burned + &burned_total,
        },
        truncation,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupplyPath {
    pub states: Vec<SupplyState>,
    /// `(epoch, truncation)` for every clamped mint, epoch as numbered in the resulting state.
    pub truncations: Vec<(u64, Truncation)>,
}

pub fn simulate_supply_path(
    initial: &SupplyState,
    flows: &[EpochFlows],
    policy: &SupplyPolicy,
) -> Result<SupplyPath, SupplyError> {
    let mut path = SupplyPath::default();
    let mut current = initial.clone();
    for f in flows {
        let step = step_supply(&current, f, policy).map_err(|e| e.at(current.epoch + 1))?;
        if let Some(t) = step.truncation {
            path.truncations.push((step.state.epoch, t));
        }
        path.states.push(step.state.clone());
        current = step.state;
    }
    Ok(path)
}

pub fn apply_burn(state: &SupplyState, amount: &Quantity) -> Result<SupplyState, SupplyError> {
    if amount.is_negative() {
        return Err(SupplyError::NegativeFlow("burn"));
    }
    if amount > &state.circulating {
        return Err(underflow("burn", amount, &state.circulating));
    }
    Ok(SupplyState {
        circulating: &state.circulating - amount,
        cumulative_burned: &state.cumulative_burned + amount,
        ..state.clone()
    })
}

/// Buys `amount` tokens at `price` per token out of `treasury` funds and
/// returns the new state with the remaining treasury.
pub fn apply_buyback(
    state: &SupplyState,
    amount: &Quantity,
    treasury: &Quantity,
    price: &Quantity,
    mode: BuybackMode,
) -> Result<(SupplyState, Quantity), SupplyError> {
    if amount.is_negative() {
        return Err(SupplyError::NegativeFlow("buyback"));
    }
    let cost = amount * price;
    if &cost > treasury {
        return Err(SupplyError::InsufficientTreasury {
            cost,
            treasury: treasury.clone(),
        });
    }
    let next = match mode {
        BuybackMode::Burn => apply_burn(state, amount)?,
        BuybackMode::TreasuryHold => {
            if amount > &state.circulating {
                return Err(underflow("buyback", amount, &state.circulating));
            }
            SupplyState {
                circulating: &state.circulating - amount,
                treasury_held: &state.treasury_held + amount,
                ..state.clone()
            }
        }
    };
    Ok((next, treasury - &cost))
}

pub fn stake(state: &SupplyState, amount: &Quantity) -> Result<SupplyState, SupplyError> {
    if amount.is_negative() {
        return Err(SupplyError::NegativeFlow("stake"));
    }
    if amount > &state.circulating {
        return Err(underflow("stake", amount, &state.circulating));
    }
    Ok(SupplyState {
        circulating: &state.circulating - amount,
        staked: &state.staked + amount,
        ..state.clone()
    })
}

pub fn unstake(state: &SupplyState, amount: &Quantity) -> Result<SupplyState, SupplyError> {
    if amount.is_negative() {
        return Err(SupplyError::NegativeFlow("unstake"));
    }
    if amount > &state.staked {
        return Err(underflow("unstake", amount, &state.staked));
    }
    Ok(SupplyState {
        circulating: &state.circulating + amount,
        staked: &state.staked - amount,
        ..state.clone()
    })
}

/// Linear release after a cliff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct VestingSchedule {
    pub total: Quantity,
    #[serde(default)]
    pub start_epoch: u64,
    #[serde(default)]
    pub cliff_epochs: u64,
    pub duration_epochs: u64,
}

impl VestingSchedule {
    pub fn check(&self) -> Result<(), SupplyError> {
        if self.duration_epochs == 0 {
            return Err(SupplyError::InvalidVesting("duration_epochs must be >= 1"));
        }
        if self.cliff_epochs > self.duration_epochs {
            return Err(SupplyError::InvalidVesting(
                "cliff_epochs must not exceed duration_epochs",
            ));
        }
        if self.total.is_negative() {
            return Err(SupplyError::InvalidVesting("total must be non-negative"));
        }
        Ok(())
    }

    /// Amount unlocked in the step that ends at `epoch`.
    pub fn tranche(&self, epoch: u64) -> Quantity {
        if epoch == 0 {
            return vesting_released(self, 0);
        }
        vesting_released(self, epoch) - vesting_released(self, epoch - 1)
    }
}

/// Zero before `start + cliff`, then linear up to `total` at `start + duration`.
pub fn vesting_released(schedule: &VestingSchedule, epoch: u64) -> Quantity {
    let unlock_start = schedule.start_epoch + schedule.cliff_epochs;
    let end = schedule.start_epoch + schedule.duration_epochs;
    if epoch >= end {
        return schedule.total.clone();
    }
    if epoch < unlock_start {
        return Quantity::zero();
    }
    let elapsed = Quantity::from(epoch - unlock_start);
    let span = Quantity::from(end - unlock_start);
    &(&schedule.total * &elapsed) / &span
}

/// A scripted flow for one epoch of a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledFlows {
    pub epoch: u64,
    #[serde(flatten)]
    pub flows: EpochFlows,
}

/// Reads `epoch,minted,burned,buyback,stake_delta[,vest_release]`.
pub fn read_flow_schedule<R: Read>(reader: R) -> Result<Vec<ScheduledFlows>, SupplyError> {
    let err = |row: usize, message: String| SupplyError::FlowSchedule { row, message };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = ["epoch", "minted", "burned", "buyback", "stake_delta"];
    let mut cols = Vec::new();
    for name in required {
        cols.push(col(name).ok_or_else(|| err(1, format!("missing column `{name}`")))?);
    }
    let vest_col = col("vest_release");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        let cell = |c: usize| -> Result<Quantity, SupplyError> {
            let raw = rec.get(c).unwrap_or("");
            if raw.is_empty() {
                return Ok(Quantity::zero());
            }
            raw.parse().map_err(|e| err(row, format!("{e}")))
        };
        let epoch_raw = rec.get(cols[0]).unwrap_or("");
        let epoch = epoch_raw
            .parse()
            .map_err(|_| err(row, format!("invalid epoch `{epoch_raw}`")))?;
        out.push(ScheduledFlows {
            epoch,
            flows: EpochFlows {
                minted: cell(cols[1])?,
                burned: cell(cols[2])?,
                buyback: cell(cols[3])?,
                stake_delta: cell(cols[4])?,
                vest_release: match vest_col {
                    Some(c) => cell(c)?,
                    None => Quantity::zero(),
                },
            },
        });
    }
    Ok(out)
}

/// Dense per-epoch flows for epochs `1..=epochs`; unscheduled epochs get zero flows.
/// Multiple rows for the same epoch are summed.
pub fn flows_for_horizon(schedule: &[ScheduledFlows], epochs: u64) -> Vec<EpochFlows> {
    let mut dense = vec![EpochFlows::default(); epochs as usize];
    for s in schedule {
        if s.epoch == 0 || s.epoch > epochs {
            continue;
        }
        let slot = &mut dense[(s.epoch - 1) as usize];
        slot.minted += &s.flows.minted;
        slot.burned += &s.flows.burned;
        slot.buyback += &s.flows.buyback;
        slot.stake_delta += &s.flows.stake_delta;
        slot.vest_release += &s.flows.vest_release;
    }
    dense
}

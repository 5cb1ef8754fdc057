//! Voting-mechanism families, their power functions, tallying, the
//! mechanism/property matrix and the property-driven recommender.

mod matrix;
mod sybil;
mod tally;

pub use matrix::{
    property_matrix, recommend_mechanism, MatrixCell, PropertyMatrix, RankedFamily, Recommendation,
};
pub use sybil::{sybil_split, sybil_split_ballots};
pub use tally::{ballots_from_csv, tally, Ballot, Choice, TallyResult};

use std::fmt;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::quantity::Quantity;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GovernanceError {
    #[error("voter `{0}` voted more than once")]
    DuplicateVote(String),
    #[error("conviction decay must lie strictly between 0 and 1, got {0}")]
    InvalidDecay(Quantity),
    #[error("voter `{voter}` spends {spent} credits but the budget is {budget}")]
    BudgetExceeded {
        voter: String,
        spent: Quantity,
        budget: Quantity,
    },
    #[error("no voter belongs to identity cluster `{0}`")]
    UnknownCluster(String),
    #[error("split factor must be at least 1")]
    InvalidSplit,
    #[error("proposal threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(Quantity),
    #[error("conviction tally needs a conviction_threshold on proposal `{0}`")]
    MissingConvictionThreshold(String),
    #[error("invalid mechanism parameters: {0}")]
    InvalidMechanism(&'static str),
    #[error("invalid voter `{voter}`: {reason}")]
    InvalidVoter { voter: String, reason: &'static str },
    #[error("unknown voting property `{0}`")]
    UnknownProperty(String),
    #[error("requirement level {level} for {property} is above the maximum of 2")]
    LevelOutOfRange { property: Property, level: u8 },
    #[error("unknown mechanism family `{0}`")]
    UnknownFamily(String),
    #[error("vote set row {row}: {message}")]
    VoteSet { row: usize, message: String },
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum MechanismFamily {
    OneTokenOneVote,
    Conviction,
    VoteEscrow,
    ReputationWeighted,
    Quadratic,
}

impl MechanismFamily {
    pub const ALL: [MechanismFamily; 5] = [
        MechanismFamily::OneTokenOneVote,
        MechanismFamily::Conviction,
        MechanismFamily::VoteEscrow,
        MechanismFamily::ReputationWeighted,
        MechanismFamily::Quadratic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismFamily::OneTokenOneVote => "one_token_one_vote",
            MechanismFamily::Conviction => "conviction",
            MechanismFamily::VoteEscrow => "vote_escrow",
            MechanismFamily::ReputationWeighted => "reputation_weighted",
            MechanismFamily::Quadratic => "quadratic",
        }
    }

    /// Human-facing label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            MechanismFamily::OneTokenOneVote => "1-Token-1-Vote",
            MechanismFamily::Conviction => "time-weighted conviction voting",
            MechanismFamily::VoteEscrow => "time-weighted vote-escrow",
            MechanismFamily::ReputationWeighted => "reputation-weighted voting",
            MechanismFamily::Quadratic => "quadratic voting",
        }
    }

    pub fn is_time_weighted(self) -> bool {
        matches!(
            self,
            MechanismFamily::Conviction | MechanismFamily::VoteEscrow
        )
    }
}

impl fmt::Display for MechanismFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismFamily {
    type Err = GovernanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "one_token_one_vote" | "1t1v" => Ok(MechanismFamily::OneTokenOneVote),
            "conviction" => Ok(MechanismFamily::Conviction),
            "vote_escrow" | "ve" => Ok(MechanismFamily::VoteEscrow),
            "reputation_weighted" | "reputation" => Ok(MechanismFamily::ReputationWeighted),
            "quadratic" => Ok(MechanismFamily::Quadratic),
            _ => Err(GovernanceError::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Simplicity,
    Accountability,
    Inclusivity,
    TimeEfficiency,
    PreferenceIntensity,
    Security,
}

impl Property {
    pub const ALL: [Property; 6] = [
        Property::Simplicity,
        Property::Accountability,
        Property::Inclusivity,
        Property::TimeEfficiency,
        Property::PreferenceIntensity,
        Property::Security,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Simplicity => "simplicity",
            Property::Accountability => "accountability",
            Property::Inclusivity => "inclusivity",
            Property::TimeEfficiency => "time_efficiency",
            Property::PreferenceIntensity => "preference_intensity",
            Property::Security => "security",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = GovernanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Property::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .or(match norm.as_str() {
                "intensity" | "intensity_of_preferences" => Some(Property::PreferenceIntensity),
                _ => None,
            })
            .ok_or_else(|| GovernanceError::UnknownProperty(s.to_string()))
    }
}

/// Default lock horizon for vote-escrow power.
pub const DEFAULT_LOCK_MAX: u64 = 4;

pub fn default_alpha() -> Quantity {
    Quantity::from_ratio(9, 10)
}

fn default_lock_max() -> u64 {
    DEFAULT_LOCK_MAX
}

fn default_stake_scaling() -> Quantity {
    Quantity::one()
}

fn is_one(q: &Quantity) -> bool {
    *q == 1
}

/// A mechanism family together with its parameters.
///
/// Bond voting is expressed as vote-escrow with a `stake_scaling` factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum VotingMechanism {
    OneTokenOneVote,
    Conviction {
        #[serde(default = "default_alpha")]
        alpha: Quantity,
    },
    VoteEscrow {
        #[serde(default = "default_lock_max")]
        lock_max: u64,
        #[serde(default = "default_stake_scaling", skip_serializing_if = "is_one")]
        stake_scaling: Quantity,
    },
    ReputationWeighted,
    Quadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        credit_budget: Option<Quantity>,
    },
}

impl VotingMechanism {
    pub fn family(&self) -> MechanismFamily {
        match self {
            VotingMechanism::OneTokenOneVote => MechanismFamily::OneTokenOneVote,
            VotingMechanism::Conviction { .. } => MechanismFamily::Conviction,
            VotingMechanism::VoteEscrow { .. } => MechanismFamily::VoteEscrow,
            VotingMechanism::ReputationWeighted => MechanismFamily::ReputationWeighted,
            VotingMechanism::Quadratic { .. } => MechanismFamily::Quadratic,
        }
    }

    /// The family with default parameters.
    pub fn default_for(family: MechanismFamily) -> Self {
        match family {
            MechanismFamily::OneTokenOneVote => VotingMechanism::OneTokenOneVote,
            MechanismFamily::Conviction => VotingMechanism::Conviction {
                alpha: default_alpha(),
            },
            MechanismFamily::VoteEscrow => VotingMechanism::VoteEscrow {
                lock_max: DEFAULT_LOCK_MAX,
                stake_scaling: Quantity::one(),
            },
            MechanismFamily::ReputationWeighted => VotingMechanism::ReputationWeighted,
            MechanismFamily::Quadratic => VotingMechanism::Quadratic {
                credit_budget: None,
            },
        }
    }

    pub fn check(&self) -> Result<(), GovernanceError> {
        match self {
            VotingMechanism::Conviction { alpha } => {
                check_alpha(alpha)?;
            }
            VotingMechanism::VoteEscrow {
                lock_max,
                stake_scaling,
            } => {
                if *lock_max == 0 {
                    return Err(GovernanceError::InvalidMechanism("lock_max must be >= 1"));
                }
                if !stake_scaling.is_positive() {
                    return Err(GovernanceError::InvalidMechanism(
                        "stake_scaling must be > 0",
                    ));
                }
            }
            VotingMechanism::Quadratic {
                credit_budget: Some(b),
            } if !b.is_positive() => {
                return Err(GovernanceError::InvalidMechanism(
                    "credit budget must be > 0",
                ));
            }
            _ => {}
        }
        Ok(())
    }

    /// Standing voting power of a voter under this mechanism, spending the
    /// voter's whole credit balance for quadratic.
    pub fn power(&self, voter: &Voter) -> Quantity {
        match self {
            VotingMechanism::OneTokenOneVote | VotingMechanism::Conviction { .. } => {
                power_1t1v(voter)
            }
            VotingMechanism::VoteEscrow {
                lock_max,
                stake_scaling,
            } => &power_ve(voter, *lock_max) * stake_scaling,
            VotingMechanism::ReputationWeighted => power_reputation(voter),
            VotingMechanism::Quadratic { .. } => {
                Quantity::from_f64(sqrt_quantity(&voter.credits)).unwrap_or_default()
            }
        }
    }
}

impl fmt::Display for VotingMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VotingMechanism::Conviction { alpha } => write!(f, "conviction(alpha={alpha})"),
            VotingMechanism::VoteEscrow {
                lock_max,
                stake_scaling,
            } if *stake_scaling != 1 => {
                write!(
                    f,
                    "vote_escrow(lock_max={lock_max}, stake_scaling={stake_scaling})"
                )
            }
            VotingMechanism::VoteEscrow { lock_max, .. } => {
                write!(f, "vote_escrow(lock_max={lock_max})")
            }
            VotingMechanism::Quadratic {
                credit_budget: Some(b),
            } => write!(f, "quadratic(credit_budget={b})"),
            other => f.write_str(other.family().name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Voter {
    pub id: String,
    #[serde(default)]
    pub balance: Quantity,
    #[serde(default)]
    pub lock_remaining: u64,
    #[serde(default)]
    pub reputation: Quantity,
    #[serde(default)]
    pub credits: Quantity,
    /// Ground-truth owner of the identity; simulation only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_cluster: Option<String>,
}

impl Voter {
    pub fn new(id: impl Into<String>, balance: Quantity) -> Self {
        Voter {
            id: id.into(),
            balance,
            ..Default::default()
        }
    }

    pub fn with_lock(mut self, lock_remaining: u64) -> Self {
        self.lock_remaining = lock_remaining;
        self
    }

    pub fn with_reputation(mut self, reputation: Quantity) -> Self {
        self.reputation = reputation;
        self
    }

    pub fn with_credits(mut self, credits: Quantity) -> Self {
        self.credits = credits;
        self
    }

    pub fn with_cluster(mut self, cluster: impl Into<String>) -> Self {
        self.identity_cluster = Some(cluster.into());
        self
    }

    /// Identity cluster, falling back to the voter's own id.
    pub fn cluster(&self) -> &str {
        self.identity_cluster.as_deref().unwrap_or(&self.id)
    }

    pub(crate) fn check(&self) -> Result<(), GovernanceError> {
        let bad = |reason| GovernanceError::InvalidVoter {
            voter: self.id.clone(),
            reason,
        };
        if self.balance.is_negative() {
            return Err(bad("negative balance"));
        }
        if self.reputation.is_negative() {
            return Err(bad("negative reputation"));
        }
        if self.credits.is_negative() {
            return Err(bad("negative credits"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Treasury,
    GovernanceProcess,
    ProtocolUpgrade,
    Tokenomics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: String,
    pub kind: ProposalKind,
    pub threshold: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conviction_threshold: Option<Quantity>,
    /// Conviction accumulated in earlier rounds.
    #[serde(default)]
    pub prior_conviction: Quantity,
}

impl Proposal {
    pub fn new(id: impl Into<String>, kind: ProposalKind, threshold: Quantity) -> Self {
        Proposal {
            id: id.into(),
            kind,
            threshold,
            conviction_threshold: None,
            prior_conviction: Quantity::zero(),
        }
    }

    pub fn with_conviction_threshold(mut self, t: Quantity) -> Self {
        self.conviction_threshold = Some(t);
        self
    }
}

pub fn power_1t1v(voter: &Voter) -> Quantity {
    voter.balance.clone()
}

/// `balance * lock_remaining / lock_max`; locks beyond `lock_max` count as a full lock.
pub fn power_ve(voter: &Voter, lock_max: u64) -> Quantity {
    if lock_max == 0 || voter.lock_remaining == 0 {
        return Quantity::zero();
    }
    let lock = voter.lock_remaining.min(lock_max);
    &(&voter.balance * &Quantity::from(lock)) / &Quantity::from(lock_max)
}

pub fn power_reputation(voter: &Voter) -> Quantity {
    voter.reputation.clone()
}

fn sqrt_quantity(v: &Quantity) -> f64 {
    v.to_f64().max(0.0).sqrt()
}

/// Votes bought with `credits_spent` under the quadratic cost `cost(v) = v^2`.
pub fn votes_quadratic(
    credits_spent: &Quantity,
    budget: &Quantity,
) -> Result<f64, GovernanceError> {
    if credits_spent.is_negative() {
        return Err(GovernanceError::InvalidMechanism(
            "credits spent must be non-negative",
        ));
    }
    if credits_spent > budget {
        return Err(GovernanceError::BudgetExceeded {
            voter: String::new(),
            spent: credits_spent.clone(),
            budget: budget.clone(),
        });
    }
    Ok(sqrt_quantity(credits_spent))
}

fn check_alpha(alpha: &Quantity) -> Result<(), GovernanceError> {
    if !alpha.is_positive() || *alpha >= 1 {
        return Err(GovernanceError::InvalidDecay(alpha.clone()));
    }
    Ok(())
}

/// `y_t = alpha * y_{t-1} + support`.
pub fn conviction_update(
    y_prev: &Quantity,
    support: &Quantity,
    alpha: &Quantity,
) -> Result<Quantity, GovernanceError> {
    check_alpha(alpha)?;
    if support.is_negative() {
        return Err(GovernanceError::InvalidMechanism(
            "support must be non-negative",
        ));
    }
    Ok(&(alpha * y_prev) + support)
}

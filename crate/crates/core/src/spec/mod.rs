//! Declarative token economy documents.
//!
//! An [`EconomySpec`] records one design across the three pillars:
//! incentives (stakeholders, functions, desirable behaviors, incentive
//! mechanisms), governance (areas, roles, decentralization target, voting
//! mechanism, support mechanisms) and tokenomics (per-token supply policy,
//! timing, distribution, value capture, price management).
//!
//! Documents are TOML on disk and JSON on the wire; both share the schema
//! published under `schema/economy-spec.schema.json`.

mod compare;
mod parse;
mod validate;

pub use compare::{compare_specs, ComparisonReport, ComparisonRow, PillarComparison};
pub use parse::{
    json_schema, load_spec, normalize_and_serialize, parse_spec, parse_spec_as, to_json, SpecError,
    SpecFormat,
};
pub use validate::{validate_spec, Finding, Severity, ValidationReport};

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::governance::{Property, VotingMechanism};
use crate::names::named_enum;
use crate::quantity::Quantity;
use crate::supply::{SupplyPolicy, VestingSchedule};

/// Current document version.
pub const TEDM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EconomySpec {
    pub tedm_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Marks documents whose numbers are placeholders rather than sourced values.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub illustrative: bool,
    pub incentives: Incentives,
    pub governance: Governance,
    pub tokenomics: Tokenomics,
    /// Paths of fields the parser did not recognize.
    #[serde(skip)]
    #[schemars(skip)]
    pub unknown_fields: Vec<String>,
}

named_enum! {
    pub enum StakeholderCategory {
        Users => "users",
        Partners => "partners",
        Developers => "developers",
        Community => "community",
        Investors => "investors",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Stakeholder {
    pub name: String,
    pub category: StakeholderCategory,
    /// What the stakeholder gets from the economy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct DesirableBehavior {
    pub stakeholder: String,
    pub behavior: String,
}

named_enum! {
    pub enum IncentiveType {
        TokenRewards => "token_rewards",
        Staking => "staking",
        LiquidityMining => "liquidity_mining",
        GrowthExpectations => "growth_expectations",
        Access => "access",
        Reputation => "reputation",
        GovernanceParticipation => "governance_participation",
        NetworkEffects => "network_effects",
        Gamification => "gamification",
    }
}

named_enum! {
    pub enum IncentiveClass {
        Monetary => "monetary",
        NonMonetary => "non_monetary",
    }
}

impl IncentiveType {
    /// Class each incentive type belongs to in the incentive taxonomy.
    pub fn class(self) -> IncentiveClass {
        match self {
            IncentiveType::TokenRewards
            | IncentiveType::Staking
            | IncentiveType::LiquidityMining
            | IncentiveType::GrowthExpectations => IncentiveClass::Monetary,
            _ => IncentiveClass::NonMonetary,
        }
    }
}

impl IncentiveClass {
    pub fn label(self) -> &'static str {
        match self {
            IncentiveClass::Monetary => "monetary",
            IncentiveClass::NonMonetary => "non-monetary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct IncentiveMechanism {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: IncentiveType,
    pub class: IncentiveClass,
    /// Stakeholder names this mechanism is aimed at.
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
pub struct Incentives {
    pub stakeholders: Vec<Stakeholder>,
    #[serde(default)]
    pub functions: Vec<String>,
    #[serde(default)]
    pub desirable_behaviors: Vec<DesirableBehavior>,
    #[serde(default)]
    pub incentive_mechanisms: Vec<IncentiveMechanism>,
}

named_enum! {
    pub enum GovernanceArea {
        Treasury => "treasury",
        GovernanceProcess => "governance_process",
        ProtocolUpgrade => "protocol_upgrade",
        Tokenomics => "tokenomics",
        ParameterChanges => "parameter_changes",
        ProductDevelopment => "product_development",
        Recruitment => "recruitment",
        EmergencyActions => "emergency_actions",
        InfrastructureFunding => "infrastructure_funding",
        ResourceAllocation => "resource_allocation",
        EmissionsAllocation => "emissions_allocation",
        FeePolicy => "fee_policy",
    }
}

impl GovernanceArea {
    pub fn label(self) -> &'static str {
        match self {
            GovernanceArea::Treasury => "treasury management",
            GovernanceArea::GovernanceProcess => "governance and process",
            GovernanceArea::ProtocolUpgrade => "protocol upgrades",
            GovernanceArea::Tokenomics => "tokenomics",
            GovernanceArea::ParameterChanges => "parameter changes",
            GovernanceArea::ProductDevelopment => "product development",
            GovernanceArea::Recruitment => "recruitment and management",
            GovernanceArea::EmergencyActions => "emergency actions",
            GovernanceArea::InfrastructureFunding => "infrastructure funding",
            GovernanceArea::ResourceAllocation => "resource allocation",
            GovernanceArea::EmissionsAllocation => "emissions allocation",
            GovernanceArea::FeePolicy => "fee policy",
        }
    }
}

named_enum! {
    pub enum Responsibility {
        Propose => "propose",
        Deliberate => "deliberate",
        Vote => "vote",
        Execute => "execute",
        Oversee => "oversee",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct GovernanceRole {
    pub stakeholder: String,
    pub responsibilities: Vec<Responsibility>,
    /// Areas the role applies to; empty means all declared areas.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub areas: Vec<GovernanceArea>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

named_enum! {
    pub enum DecentralizationTarget {
        PrivateCentralized => "private_centralized",
        PublicCentralized => "public_centralized",
        PublicDecentralized => "public_decentralized",
    }
}

impl DecentralizationTarget {
    pub fn label(self) -> &'static str {
        match self {
            DecentralizationTarget::PrivateCentralized => "private and centralized",
            DecentralizationTarget::PublicCentralized => "public but centralized",
            DecentralizationTarget::PublicDecentralized => "public and decentralized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NumericTargets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_gini: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_nakamoto: Option<u64>,
}

/// Concentration figures reported for a live deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReportedConcentration {
    pub gini: f64,
    pub nakamoto: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

named_enum! {
    pub enum Venue {
        Onchain => "onchain",
        Offchain => "offchain",
        Hybrid => "hybrid",
    }
}

named_enum! {
    pub enum SupportMechanism {
        AgendaSetting => "agenda_setting",
        ProposalScreening => "proposal_screening",
        PredictionMarkets => "prediction_markets",
        AlgorithmicFiltering => "algorithmic_filtering",
        DelegatedVoting => "delegated_voting",
        InformationDesign => "information_design",
        StructuredDeliberation => "structured_deliberation",
        ProofOfPersonhood => "proof_of_personhood",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Governance {
    pub areas: Vec<GovernanceArea>,
    #[serde(default)]
    pub roles: Vec<GovernanceRole>,
    pub decentralization_target: DecentralizationTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decentralization_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_targets: Option<NumericTargets>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_concentration: Option<ReportedConcentration>,
    #[serde(default)]
    pub onchain_offchain: BTreeMap<GovernanceArea, Venue>,
    #[serde(default)]
    pub required_properties: BTreeMap<Property, u8>,
    pub chosen_mechanism: VotingMechanism,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism_note: Option<String>,
    #[serde(default)]
    pub support_mechanisms: Vec<SupportMechanism>,
}

named_enum! {
    pub enum Timing {
        PreLaunch => "pre_launch",
        PostLaunch => "post_launch",
        Hybrid => "hybrid",
    }
}

impl Timing {
    pub fn label(self) -> &'static str {
        match self {
            Timing::PreLaunch => "pre-launch",
            Timing::PostLaunch => "post-launch",
            Timing::Hybrid => "pre- and post-launch",
        }
    }
}

named_enum! {
    pub enum Channel {
        PrivateSale => "private_sale",
        PublicSale => "public_sale",
        Airdrop => "airdrop",
        LiquidityMining => "liquidity_mining",
        Reserve => "reserve",
    }
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::PrivateSale => "private sale",
            Channel::PublicSale => "public sale",
            Channel::Airdrop => "airdrop",
            Channel::LiquidityMining => "liquidity mining",
            Channel::Reserve => "reserve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Allocation {
    pub channel: Channel,
    pub share: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipients: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vesting: Option<VestingSchedule>,
}

named_enum! {
    pub enum ValueCapture {
        GovernanceRights => "governance_rights",
        AssetClaims => "asset_claims",
        NetworkValue => "network_value",
        EarningsClaims => "earnings_claims",
    }
}

impl ValueCapture {
    pub fn label(self) -> &'static str {
        match self {
            ValueCapture::GovernanceRights => "governance rights",
            ValueCapture::AssetClaims => "claims on assets",
            ValueCapture::NetworkValue => "network value",
            ValueCapture::EarningsClaims => "claims on earnings",
        }
    }
}

named_enum! {
    pub enum PriceTool {
        Burn => "burn",
        Staking => "staking",
        Buyback => "buyback",
        Vesting => "vesting",
    }
}

impl PriceTool {
    pub fn label(self) -> &'static str {
        match self {
            PriceTool::Burn => "token burns",
            PriceTool::Staking => "staking/locking",
            PriceTool::Buyback => "buybacks",
            PriceTool::Vesting => "vesting",
        }
    }
}

/// Planned issuance for one epoch, checked against the cap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct MintPlanEntry {
    pub epoch: u64,
    pub minted: Quantity,
    #[serde(default, skip_serializing_if = "Quantity::is_zero")]
    pub burned: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TokenPolicy {
    pub symbol: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    pub supply_policy: SupplyPolicy,
    /// Reported annual inflation rate as a fraction, e.g. `0.02`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annual_inflation: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_supply: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mint_plan: Vec<MintPlanEntry>,
    pub timing: Timing,
    pub distribution: Vec<Allocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution_note: Option<String>,
    #[serde(default)]
    pub value_capture: Vec<ValueCapture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_capture_note: Option<String>,
    #[serde(default)]
    pub price_management: Vec<PriceTool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_management_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Tokenomics {
    pub tokens: Vec<TokenPolicy>,
}

impl EconomySpec {
    pub fn stakeholder(&self, name: &str) -> Option<&Stakeholder> {
        self.incentives.stakeholders.iter().find(|s| s.name == name)
    }

    pub fn token(&self, symbol: &str) -> Option<&TokenPolicy> {
        self.tokenomics.tokens.iter().find(|t| t.symbol == symbol)
    }

    /// The first listed token, used as the governance token by default.
    pub fn primary_token(&self) -> Option<&TokenPolicy> {
        self.tokenomics.tokens.first()
    }
}

/// Bundled example documents.
pub mod fixtures {
    pub const CURRYNOMICS: &str = include_str!("../../fixtures/specs/currynomics.toml");
    pub const UNISWAP: &str = include_str!("../../fixtures/specs/uniswap.toml");
    pub const CURVE: &str = include_str!("../../fixtures/specs/curve.toml");

    pub const ALL: [(&str, &str); 3] = [
        ("currynomics", CURRYNOMICS),
        ("uniswap", UNISWAP),
        ("curve", CURVE),
    ];

    pub fn get(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }
}

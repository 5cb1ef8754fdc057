//! Cross-field consistency rules.
//!
//! | rule | severity | check |
//! |------|----------|-------|
//! | V1   | error    | distribution shares of each token sum to exactly 1 |
//! | V2   | error    | a capped token's initial supply plus mint plan never exceeds the cap |
//! | V3   | error    | the chosen mechanism meets every required property score |
//! | V4   | warning  | every desirable behavior is targeted by an incentive mechanism |
//! | V5   | warning  | public and decentralized target with 1t1v and no support mechanisms |
//! | V6   | warning  | asset claims as the only value channel with pre-launch issuance |
//! | V7   | warning  | unrecognized field |
//! | V8   | error    | unsupported `tedm_version` |
//! | V9   | error    | reference to an undeclared stakeholder |
//! | V10  | error    | incentive class disagrees with its type |
//! | V11  | error    | invalid parameters (mechanism, vesting, shares, inflation) |
//! | V12  | error    | duplicate stakeholder names or token symbols |
//! | V13  | error / warning | numeric decentralization targets out of range / not met by reported figures |
//! | V14  | error    | inflationary token whose mint plan does not mint more than it burns |
//! | V15  | warning  | venue given for an undeclared governance area |
//! | V16  | info     | document flagged as illustrative |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DecentralizationTarget, EconomySpec, TokenPolicy, ValueCapture, TEDM_VERSION};
use crate::governance::{property_matrix, MechanismFamily};
use crate::quantity::Quantity;
use crate::supply::{step_supply, EpochFlows, SupplyError, SupplyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub rule: String,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: {}",
            self.severity, self.rule, self.path, self.message
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.with_severity(Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.with_severity(Severity::Warning)
    }

    pub fn with_severity(&self, severity: Severity) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(move |f| f.severity == severity)
    }

    pub fn rule(&self, rule: &str) -> Vec<&Finding> {
        self.findings.iter().filter(|f| f.rule == rule).collect()
    }
}

struct Collector(Vec<Finding>);

impl Collector {
    fn push(
        &mut self,
        severity: Severity,
        rule: &str,
        path: impl Into<String>,
        message: impl Into<String>,
    ) {
        self.0.push(Finding {
            severity,
            rule: rule.to_string(),
            path: path.into(),
            message: message.into(),
        });
    }

    fn error(&mut self, rule: &str, path: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, rule, path, message);
    }

    fn warning(&mut self, rule: &str, path: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Warning, rule, path, message);
    }
}

/// Runs every rule. Findings come back sorted, so the result does not depend
/// on rule evaluation order.
pub fn validate_spec(spec: &EconomySpec) -> ValidationReport {
    let mut c = Collector(Vec::new());

    if spec.tedm_version != TEDM_VERSION {
        c.error(
            "V8",
            "tedm_version",
            format!(
                "unsupported version {}, expected {TEDM_VERSION}",
                spec.tedm_version
            ),
        );
    }
    for field in &spec.unknown_fields {
        c.warning("V7", field.clone(), "unrecognized field ignored");
    }
    if spec.illustrative {
        c.push(
            Severity::Info,
            "V16",
            "illustrative",
            "document contains placeholder values",
        );
    }

    check_incentives(spec, &mut c);
    check_governance(spec, &mut c);
    for (i, token) in spec.tokenomics.tokens.iter().enumerate() {
        check_token(token, &format!("tokenomics.tokens[{i}]"), &mut c);
    }
    let mut symbols = BTreeSet::new();
    for (i, token) in spec.tokenomics.tokens.iter().enumerate() {
        if !symbols.insert(token.symbol.as_str()) {
            c.error(
                "V12",
                format!("tokenomics.tokens[{i}].symbol"),
                format!("duplicate token `{}`", token.symbol),
            );
        }
    }

    let mut findings = c.0;
    findings.sort();
    findings.dedup();
    ValidationReport { findings }
}

fn check_incentives(spec: &EconomySpec, c: &mut Collector) {
    let inc = &spec.incentives;
    let mut declared = BTreeSet::new();
    for (i, s) in inc.stakeholders.iter().enumerate() {
        if !declared.insert(s.name.as_str()) {
            c.error(
                "V12",
                format!("incentives.stakeholders[{i}].name"),
                format!("duplicate stakeholder `{}`", s.name),
            );
        }
    }

    for (i, b) in inc.desirable_behaviors.iter().enumerate() {
        let path = format!("incentives.desirable_behaviors[{i}]");
        if !declared.contains(b.stakeholder.as_str()) {
            c.error(
                "V9",
                format!("{path}.stakeholder"),
                format!("undeclared stakeholder `{}`", b.stakeholder),
            );
        }
        let targeted = inc
            .incentive_mechanisms
            .iter()
            .any(|m| m.targets.contains(&b.stakeholder));
        if !targeted {
            c.warning(
                "V4",
                path,
                format!(
                    "no incentive mechanism targets `{}` for \"{}\"",
                    b.stakeholder, b.behavior
                ),
            );
        }
    }

    for (i, m) in inc.incentive_mechanisms.iter().enumerate() {
        let path = format!("incentives.incentive_mechanisms[{i}]");
        if m.class != m.kind.class() {
            c.error(
                "V10",
                format!("{path}.class"),
                format!(
                    "`{}` is a {} incentive, not {}",
                    m.kind,
                    m.kind.class(),
                    m.class
                ),
            );
        }
        for (j, t) in m.targets.iter().enumerate() {
            if !declared.contains(t.as_str()) {
                c.error(
                    "V9",
                    format!("{path}.targets[{j}]"),
                    format!("undeclared stakeholder `{t}`"),
                );
            }
        }
    }

    for (i, r) in spec.governance.roles.iter().enumerate() {
        if !declared.contains(r.stakeholder.as_str()) {
            c.error(
                "V9",
                format!("governance.roles[{i}].stakeholder"),
                format!("undeclared stakeholder `{}`", r.stakeholder),
            );
        }
    }
}

fn check_governance(spec: &EconomySpec, c: &mut Collector) {
    let gov = &spec.governance;
    let mechanism = &gov.chosen_mechanism;
    let family = mechanism.family();

    if let Err(e) = mechanism.check() {
        c.error("V11", "governance.chosen_mechanism", e.to_string());
    }

    let shortfalls = property_matrix().shortfalls(family, &gov.required_properties);
    if !shortfalls.is_empty() {
        let detail: Vec<String> = shortfalls
            .iter()
            .map(|(p, min, got)| format!("{p} needs {min}, has {got}"))
            .collect();
        c.error(
            "V3",
            "governance.chosen_mechanism",
            format!(
                "{} does not meet required properties: {}",
                family.label(),
                detail.join("; ")
            ),
        );
    }

    if gov.decentralization_target == DecentralizationTarget::PublicDecentralized
        && family == MechanismFamily::OneTokenOneVote
        && gov.support_mechanisms.is_empty()
    {
        c.warning(
            "V5",
            "governance.chosen_mechanism",
            "1t1v without support mechanisms under a public and decentralized target risks vote buying and plutocracy",
        );
    }

    let declared: BTreeSet<_> = gov.areas.iter().collect();
    for area in gov.onchain_offchain.keys() {
        if !declared.contains(area) {
            c.warning(
                "V15",
                format!("governance.onchain_offchain.{area}"),
                format!("venue given for undeclared area `{area}`"),
            );
        }
    }
    for (i, role) in gov.roles.iter().enumerate() {
        for (j, area) in role.areas.iter().enumerate() {
            if !declared.contains(area) {
                c.warning(
                    "V15",
                    format!("governance.roles[{i}].areas[{j}]"),
                    format!("role refers to undeclared area `{area}`"),
                );
            }
        }
    }

    if let Some(t) = &gov.numeric_targets {
        if let Some(g) = t.max_gini {
            if !(0.0..=1.0).contains(&g) {
                c.error(
                    "V13",
                    "governance.numeric_targets.max_gini",
                    format!("{g} is outside [0, 1]"),
                );
            }
        }
        if t.min_nakamoto == Some(0) {
            c.error(
                "V13",
                "governance.numeric_targets.min_nakamoto",
                "must be at least 1",
            );
        }
        if let Some(r) = &gov.reported_concentration {
            if let Some(g) = t.max_gini.filter(|g| r.gini > *g) {
                c.warning(
                    "V13",
                    "governance.reported_concentration.gini",
                    format!("reported Gini {} exceeds target {g}", r.gini),
                );
            }
            if let Some(n) = t.min_nakamoto.filter(|n| r.nakamoto < *n) {
                c.warning(
                    "V13",
                    "governance.reported_concentration.nakamoto",
                    format!("reported Nakamoto {} below target {n}", r.nakamoto),
                );
            }
        }
    }
}

fn check_token(token: &TokenPolicy, path: &str, c: &mut Collector) {
    let mut sum = Quantity::zero();
    for (i, a) in token.distribution.iter().enumerate() {
        if a.share.is_negative() || a.share > 1 {
            c.error(
                "V11",
                format!("{path}.distribution[{i}].share"),
                format!("share {} is outside [0, 1]", a.share),
            );
        }
        if let Some(v) = &a.vesting {
            if let Err(e) = v.check() {
                c.error(
                    "V11",
                    format!("{path}.distribution[{i}].vesting"),
                    e.to_string(),
                );
            }
        }
        sum += &a.share;
    }
    if sum != 1 {
        c.error(
            "V1",
            format!("{path}.distribution"),
            format!(
                "shares of {} sum to {sum}, expected exactly 1",
                token.symbol
            ),
        );
    }

    if let Some(r) = &token.annual_inflation {
        if r.is_negative() {
            c.error(
                "V11",
                format!("{path}.annual_inflation"),
                "inflation rate must not be negative",
            );
        }
    }

    check_mint_plan(token, path, c);

    if token.timing == super::Timing::PreLaunch
        && token.value_capture == [ValueCapture::AssetClaims]
    {
        c.warning(
            "V6",
            format!("{path}.timing"),
            format!("{} captures value only through asset claims but is issued pre-launch, before assets exist", token.symbol),
        );
    }
}

fn check_mint_plan(token: &TokenPolicy, path: &str, c: &mut Collector) {
    let policy = &token.supply_policy;
    let initial = token.initial_supply.clone().unwrap_or_default();
    if let Some(cap) = policy.s_max() {
        if initial > *cap {
            c.error(
                "V2",
                format!("{path}.initial_supply"),
                format!("initial supply {initial} exceeds cap {cap}"),
            );
            return;
        }
    }

    // Later entries for the same epoch add to earlier ones.
    let mut plan: BTreeMap<u64, (Quantity, Quantity, usize)> = BTreeMap::new();
    for (i, e) in token.mint_plan.iter().enumerate() {
        if e.minted.is_negative() || e.burned.is_negative() {
            c.error(
                "V11",
                format!("{path}.mint_plan[{i}]"),
                "minted and burned must be non-negative",
            );
            return;
        }
        let slot = plan
            .entry(e.epoch)
            .or_insert((Quantity::zero(), Quantity::zero(), i));
        slot.0 += &e.minted;
        slot.1 += &e.burned;
    }

    let mut state = SupplyState::with_circulating(initial);
    for (epoch, (minted, burned, index)) in plan {
        let at = format!("{path}.mint_plan[{index}]");
        let flows = EpochFlows::mint_burn(minted, burned);
        match step_supply(&state, &flows, policy) {
            Ok(step) => {
                if let Some(t) = &step.truncation {
                    let cap = policy.s_max().cloned().unwrap_or_default();
                    c.error(
                        "V2",
                        at,
                        format!(
                            "epoch {epoch} mints {} but only {} fits under cap {cap}",
                            t.requested, t.minted
                        ),
                    );
                    return;
                }
                state = step.state;
            }
            Err(SupplyError::ConstraintViolation { minted, burned }) => {
                c.error(
                    "V14",
                    at,
                    format!("epoch {epoch} mints {minted} but burns {burned}; inflationary supply must grow"),
                );
                return;
            }
            Err(e) => {
                c.error("V11", at, format!("epoch {epoch}: {e}"));
                return;
            }
        }
    }
}

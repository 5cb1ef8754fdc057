//! Side-by-side comparison of two economy documents, one row per design step.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EconomySpec, TokenPolicy};
use crate::governance::VotingMechanism;
use crate::quantity::Quantity;
use crate::supply::SupplyKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub step: String,
    pub left: String,
    pub right: String,
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PillarComparison {
    pub pillar: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub left: String,
    pub right: String,
    pub pillars: Vec<PillarComparison>,
}

impl ComparisonReport {
    pub fn all_identical(&self) -> bool {
        self.pillars
            .iter()
            .flat_map(|p| &p.rows)
            .all(|r| r.identical)
    }

    pub fn row(&self, step: &str) -> Option<&ComparisonRow> {
        self.pillars
            .iter()
            .flat_map(|p| &p.rows)
            .find(|r| r.step == step)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} vs {}", self.left, self.right);
        for p in &self.pillars {
            let _ = writeln!(out, "\n== {} ==", p.pillar);
            for r in &p.rows {
                let mark = if r.identical { " (same)" } else { "" };
                let _ = writeln!(out, "\n{}{mark}", r.step);
                let _ = writeln!(out, "  {}: {}", self.left, r.left);
                let _ = writeln!(out, "  {}: {}", self.right, r.right);
            }
        }
        out
    }
}

type Describe = fn(&EconomySpec) -> String;

const PILLARS: &[(&str, &[(&str, Describe)])] = &[
    (
        "Incentives",
        &[
            ("Value proposition", value_proposition),
            ("Desirable behaviors", desirable_behaviors),
            ("Incentive mechanisms", incentive_mechanisms),
        ],
    ),
    (
        "Governance",
        &[
            ("Governance areas", governance_areas),
            ("Stakeholder roles", stakeholder_roles),
            ("Level of decentralization", decentralization),
            ("Voting mechanism", voting_mechanism),
        ],
    ),
    (
        "Tokenomics",
        &[
            ("Token supply model", supply_model),
            ("Token distribution", distribution),
            ("Value-capture channels", value_capture),
            ("Price-management mechanisms", price_management),
        ],
    ),
];

pub fn compare_specs(a: &EconomySpec, b: &EconomySpec) -> ComparisonReport {
    let pillars = PILLARS
        .iter()
        .map(|(pillar, rows)| PillarComparison {
            pillar: pillar.to_string(),
            rows: rows
                .iter()
                .map(|(step, describe)| {
                    let (left, right) = (describe(a), describe(b));
                    ComparisonRow {
                        step: step.to_string(),
                        identical: left == right,
                        left,
                        right,
                    }
                })
                .collect(),
        })
        .collect();
    ComparisonReport {
        left: a.name.clone(),
        right: b.name.clone(),
        pillars,
    }
}

fn or_none(parts: Vec<String>, sep: &str) -> String {
    if parts.is_empty() {
        "none".to_string()
    } else {
        parts.join(sep)
    }
}

fn with_note(base: String, note: &Option<String>) -> String {
    match note {
        Some(n) => format!("{base}; {n}"),
        None => base,
    }
}

fn value_proposition(s: &EconomySpec) -> String {
    or_none(
        s.incentives
            .stakeholders
            .iter()
            .map(|h| match &h.value {
                Some(v) => format!("{} ({}): {v}", h.name, h.category),
                None => format!("{} ({})", h.name, h.category),
            })
            .collect(),
        "; ",
    )
}

fn desirable_behaviors(s: &EconomySpec) -> String {
    or_none(
        s.incentives
            .desirable_behaviors
            .iter()
            .map(|b| format!("{} ({})", b.behavior, b.stakeholder))
            .collect(),
        "; ",
    )
}

fn incentive_mechanisms(s: &EconomySpec) -> String {
    or_none(
        s.incentives
            .incentive_mechanisms
            .iter()
            .map(|m| format!("{} ({})", m.name, m.class.label()))
            .collect(),
        "; ",
    )
}

fn governance_areas(s: &EconomySpec) -> String {
    or_none(
        s.governance
            .areas
            .iter()
            .map(|a| a.label().to_string())
            .collect(),
        ", ",
    )
}

fn stakeholder_roles(s: &EconomySpec) -> String {
    or_none(
        s.governance
            .roles
            .iter()
            .map(|r| {
                let duties: Vec<&str> = r.responsibilities.iter().map(|d| d.as_str()).collect();
                let mut text = format!("{}: {}", r.stakeholder, duties.join(", "));
                if !r.areas.is_empty() {
                    let areas: Vec<&str> = r.areas.iter().map(|a| a.label()).collect();
                    let _ = write!(text, " [{}]", areas.join(", "));
                }
                with_note(text, &r.note)
            })
            .collect(),
        "; ",
    )
}

fn decentralization(s: &EconomySpec) -> String {
    let g = &s.governance;
    let mut text = with_note(
        g.decentralization_target.label().to_string(),
        &g.decentralization_note,
    );
    if let Some(r) = &g.reported_concentration {
        let _ = write!(text, "; reported Gini {}, Nakamoto {}", r.gini, r.nakamoto);
    }
    if let Some(t) = &g.numeric_targets {
        let mut parts = Vec::new();
        if let Some(x) = t.max_gini {
            parts.push(format!("Gini <= {x}"));
        }
        if let Some(n) = t.min_nakamoto {
            parts.push(format!("Nakamoto >= {n}"));
        }
        if !parts.is_empty() {
            let _ = write!(text, "; target {}", parts.join(", "));
        }
    }
    text
}

fn voting_mechanism(s: &EconomySpec) -> String {
    let m = &s.governance.chosen_mechanism;
    let mut text = m.family().label().to_string();
    match m {
        VotingMechanism::Conviction { alpha } => {
            let _ = write!(text, " (alpha {alpha})");
        }
        VotingMechanism::VoteEscrow {
            lock_max,
            stake_scaling,
        } => {
            let _ = write!(text, " (max lock {lock_max} epochs");
            if *stake_scaling != 1 {
                let _ = write!(text, ", stake scaling {stake_scaling}");
            }
            text.push(')');
        }
        VotingMechanism::Quadratic {
            credit_budget: Some(budget),
        } => {
            let _ = write!(text, " (credit budget {budget})");
        }
        _ => {}
    }
    with_note(text, &s.governance.mechanism_note)
}

fn per_token(s: &EconomySpec, describe: impl Fn(&TokenPolicy) -> String) -> String {
    or_none(
        s.tokenomics
            .tokens
            .iter()
            .map(|t| format!("{}: {}", t.symbol, describe(t)))
            .collect(),
        " | ",
    )
}

fn supply_model(s: &EconomySpec) -> String {
    per_token(s, |t| {
        let p = &t.supply_policy;
        let mut text = match (p.kind(), p.s_max()) {
            (SupplyKind::Capped, Some(cap)) => format!("capped supply, cap {}", humanize(cap)),
            _ if p.inflationary_constraint || t.annual_inflation.is_some() => {
                "inflationary, no hard cap".to_string()
            }
            _ => "uncapped".to_string(),
        };
        if let Some(r) = &t.annual_inflation {
            let _ = write!(text, ", {}% annual inflation reported", percent(r));
        }
        with_note(text, &t.supply_note)
    })
}

fn distribution(s: &EconomySpec) -> String {
    per_token(s, |t| {
        let mut parts = vec![t.timing.label().to_string()];
        for a in &t.distribution {
            let mut part = format!("{} {}%", a.channel.label(), percent(&a.share));
            match (&a.recipients, a.vesting.is_some()) {
                (Some(r), true) => {
                    let _ = write!(part, " ({r}, vested)");
                }
                (Some(r), false) => {
                    let _ = write!(part, " ({r})");
                }
                (None, true) => part.push_str(" (vested)"),
                (None, false) => {}
            }
            parts.push(part);
        }
        with_note(parts.join("; "), &t.distribution_note)
    })
}

fn value_capture(s: &EconomySpec) -> String {
    per_token(s, |t| {
        let channels = or_none(
            t.value_capture
                .iter()
                .map(|v| v.label().to_string())
                .collect(),
            ", ",
        );
        with_note(channels, &t.value_capture_note)
    })
}

fn price_management(s: &EconomySpec) -> String {
    per_token(s, |t| {
        let tools = or_none(
            t.price_management
                .iter()
                .map(|v| v.label().to_string())
                .collect(),
            ", ",
        );
        with_note(tools, &t.price_management_note)
    })
}

fn percent(q: &Quantity) -> String {
    let p = q * &Quantity::from_int(100);
    let exact = p.to_string();
    if exact.contains('/') {
        p.to_decimal_string(2)
    } else {
        exact
    }
}

/// Short form with a K/M/B/T suffix and two decimals, marked `≈` when rounded.
fn humanize(q: &Quantity) -> String {
    const UNITS: [(i64, &str); 4] = [
        (1_000_000_000_000, "T"),
        (1_000_000_000, "B"),
        (1_000_000, "M"),
        (1_000, "K"),
    ];
    for (scale, suffix) in UNITS {
        let scale = Quantity::from_int(scale);
        if q.abs() >= scale {
            let v = q / &scale;
            let text = trim_zeros(v.to_decimal_string(2));
            let approx = if text.parse::<Quantity>().ok().as_ref() == Some(&v) {
                ""
            } else {
                "≈ "
            };
            return format!("{approx}{text}{suffix}");
        }
    }
    q.to_string()
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantity::q;
    use crate::spec::{fixtures, parse_spec};

    #[test]
    fn humanized_amounts() {
        assert_eq!(humanize(&q("3030303031")), "≈ 3.03B");
        assert_eq!(humanize(&q("1000000000")), "1B");
        assert_eq!(humanize(&q("2500000")), "2.5M");
        assert_eq!(humanize(&q("999")), "999");
        assert_eq!(percent(&q("0.02")), "2");
        assert_eq!(percent(&q("0.21266")), "21.266");
        assert_eq!(percent(&q("1/3")), "33.33");
    }

    #[test]
    fn self_comparison_is_identical() {
        for (_, doc) in fixtures::ALL {
            let s = parse_spec(doc).unwrap();
            let r = compare_specs(&s, &s);
            assert!(r.all_identical());
            assert_eq!(r.pillars.iter().map(|p| p.rows.len()).sum::<usize>(), 11);
        }
    }

    #[test]
    fn uniswap_against_curve() {
        let u = parse_spec(fixtures::UNISWAP).unwrap();
        let c = parse_spec(fixtures::CURVE).unwrap();
        let r = compare_specs(&u, &c);
        let voting = r.row("Voting mechanism").unwrap();
        assert!(voting.left.starts_with("1-Token-1-Vote"));
        assert!(voting.right.starts_with("time-weighted vote-escrow"));
        let supply = r.row("Token supply model").unwrap();
        assert!(supply.left.contains("inflationary"));
        assert!(supply.left.contains("2% annual inflation reported"));
        assert!(supply.right.contains("capped supply"));
        assert!(supply.right.contains("≈ 3.03B"));
        assert!(!r.all_identical());
    }
}

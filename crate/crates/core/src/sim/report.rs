use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::engine::EpochRecord;
use crate::governance::VotingMechanism;
use crate::metrics::round_to;
use crate::quantity::Quantity;

const PLACES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub spec: String,
    pub token: String,
    pub seed: u64,
    pub mechanism: VotingMechanism,
    pub initial_agents: usize,
    pub epochs: Vec<EpochRecord>,
    pub summary: Summary,
}

/// Per-run digest. Floats are rounded to six places so the summary is stable
/// across platforms and can be compared byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub epochs: u64,
    pub final_circulating: Quantity,
    pub final_outstanding: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_price: Option<f64>,
    /// Largest peak-to-trough price fall, as a fraction of the peak.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_drawdown: Option<f64>,
    pub min_voting_nakamoto: Option<usize>,
    pub max_voting_nakamoto: Option<usize>,
    pub captured: bool,
    pub first_capture_epoch: Option<u64>,
    pub capture_epochs: usize,
    pub gini_path: Vec<Option<f64>>,
    pub nakamoto_path: Vec<Option<usize>>,
    pub voting_nakamoto_path: Vec<Option<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tracked_share_path: Vec<f64>,
    pub proposals: usize,
    pub passed: usize,
    pub events: usize,
    pub truncations: usize,
}

/// Light per-epoch view: headline numbers without the full distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochDigest {
    pub epoch: u64,
    pub circulating: Quantity,
    pub outstanding: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    pub gini: Option<f64>,
    pub nakamoto: Option<usize>,
    pub voting_nakamoto: Option<usize>,
    pub capture: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_share: Option<f64>,
    pub proposals: usize,
    pub passed: usize,
    pub events: Vec<String>,
}

impl From<&EpochRecord> for EpochDigest {
    fn from(e: &EpochRecord) -> EpochDigest {
        let r = |v: f64| round_to(v, PLACES);
        EpochDigest {
            epoch: e.epoch,
            circulating: e.supply.circulating.clone(),
            outstanding: e.supply.outstanding(),
            price: e.price.map(r),
            gini: e.concentration.as_ref().map(|c| r(c.gini)),
            nakamoto: e.concentration.as_ref().map(|c| c.nakamoto),
            voting_nakamoto: e.voting_concentration.as_ref().map(|c| c.nakamoto),
            capture: e.capture,
            tracked_share: e.tracked_share.map(r),
            proposals: e.governance.len(),
            passed: e.governance.iter().filter(|g| g.result.passed).count(),
            events: e
                .events
                .iter()
                .map(|ev| format!("{}: {}", ev.kind, ev.detail))
                .collect(),
        }
    }
}

pub fn summarize(epochs: &[EpochRecord]) -> Summary {
    let r = |v: f64| round_to(v, PLACES);
    let last = epochs.last();
    let prices: Vec<f64> = epochs.iter().filter_map(|e| e.price).collect();
    let max_drawdown = (!prices.is_empty()).then(|| {
        let mut peak = f64::MIN;
        let mut worst: f64 = 0.0;
        for &p in &prices {
            peak = peak.max(p);
            if peak > 0.0 {
                worst = worst.max((peak - p) / peak);
            }
        }
        r(worst)
    });
    let voting: Vec<Option<usize>> = epochs
        .iter()
        .map(|e| e.voting_concentration.as_ref().map(|c| c.nakamoto))
        .collect();
    let governance = epochs.iter().flat_map(|e| &e.governance);
    Summary {
        epochs: epochs.len() as u64,
        final_circulating: last
            .map(|e| e.supply.circulating.clone())
            .unwrap_or_default(),
        final_outstanding: last.map(|e| e.supply.outstanding()).unwrap_or_default(),
        final_price: prices.last().copied().map(r),
        max_drawdown,
        min_voting_nakamoto: voting.iter().flatten().min().copied(),
        max_voting_nakamoto: voting.iter().flatten().max().copied(),
        captured: epochs.iter().any(|e| e.capture),
        first_capture_epoch: epochs.iter().find(|e| e.capture).map(|e| e.epoch),
        capture_epochs: epochs.iter().filter(|e| e.capture).count(),
        gini_path: epochs
            .iter()
            .map(|e| e.concentration.as_ref().map(|c| r(c.gini)))
            .collect(),
        nakamoto_path: epochs
            .iter()
            .map(|e| e.concentration.as_ref().map(|c| c.nakamoto))
            .collect(),
        voting_nakamoto_path: voting,
        tracked_share_path: epochs
            .iter()
            .filter_map(|e| e.tracked_share)
            .map(r)
            .collect(),
        proposals: governance.clone().count(),
        passed: governance.filter(|g| g.result.passed).count(),
        events: epochs.iter().map(|e| e.events.len()).sum(),
        truncations: epochs.iter().filter(|e| e.truncation.is_some()).count(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl ScenarioReport {
    /// One line per epoch plus a closing digest.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} on {} ({}, {}, seed {}, {} agents)",
            self.scenario, self.spec, self.token, self.mechanism, self.seed, self.initial_agents
        );
        let _ = writeln!(
            out,
            "epoch  circulating  gini      nakamoto  voting_nak  price     events"
        );
        for e in &self.epochs {
            let gini = e.concentration.as_ref().map(|c| format!("{:.4}", c.gini));
            let events: Vec<&str> = e.events.iter().map(|ev| ev.kind.as_str()).collect();
            let _ = writeln!(
                out,
                "{:<6} {:<12} {:<9} {:<9} {:<11} {:<9} {}{}",
                e.epoch,
                e.supply.circulating.to_decimal_string(0),
                opt(gini),
                opt(e.concentration.as_ref().map(|c| c.nakamoto)),
                opt(e.voting_concentration.as_ref().map(|c| c.nakamoto)),
                opt(e.price.map(|p| format!("{p:.4}"))),
                events.join(","),
                if e.capture { " CAPTURED" } else { "" },
            );
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "\nfinal circulating {}, proposals {} ({} passed), capture {}",
            s.final_circulating.to_decimal_string(2),
            s.proposals,
            s.passed,
            match s.first_capture_epoch {
                Some(t) => format!("from epoch {t} ({} epochs)", s.capture_epochs),
                None => "never".to_string(),
            }
        );
        if let Some(d) = s.max_drawdown {
            let _ = writeln!(out, "max drawdown {:.2}%", d * 100.0);
        }
        out
    }
}

/// Writes one CSV row per epoch.
pub fn write_csv<W: io::Write>(report: &ScenarioReport, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "epoch",
        "circulating",
        "staked",
        "vesting_locked",
        "outstanding",
        "market_pool",
        "price",
        "gini",
        "nakamoto",
        "voting_gini",
        "voting_nakamoto",
        "capture",
        "tracked_share",
        "proposals_passed",
        "events",
    ])?;
    for e in &report.epochs {
        let c = e.concentration.as_ref();
        let v = e.voting_concentration.as_ref();
        let kinds: Vec<&str> = e.events.iter().map(|ev| ev.kind.as_str()).collect();
        w.write_record([
            e.epoch.to_string(),
            e.supply.circulating.to_string(),
            e.supply.staked.to_string(),
            e.supply.vesting_locked.to_string(),
            e.supply.outstanding().to_string(),
            e.market_pool.to_string(),
            e.price
                .map(|p| round_to(p, PLACES).to_string())
                .unwrap_or_default(),
            c.map(|c| round_to(c.gini, PLACES).to_string())
                .unwrap_or_default(),
            c.map(|c| c.nakamoto.to_string()).unwrap_or_default(),
            v.map(|c| round_to(c.gini, PLACES).to_string())
                .unwrap_or_default(),
            v.map(|c| c.nakamoto.to_string()).unwrap_or_default(),
            e.capture.to_string(),
            e.tracked_share
                .map(|s| round_to(s, PLACES).to_string())
                .unwrap_or_default(),
            e.governance
                .iter()
                .filter(|g| g.result.passed)
                .count()
                .to_string(),
            kinds.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

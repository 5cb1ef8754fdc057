//! Bundled stress scenarios.

use std::path::Path;

use super::{Scenario, SimError};
use crate::spec::{fixtures, load_spec, parse_spec, EconomySpec, SpecError};

pub const CAPTURE: &str = include_str!("../../fixtures/scenarios/capture.toml");
pub const SELL_OFF_CASCADE: &str = include_str!("../../fixtures/scenarios/sell_off_cascade.toml");
pub const SYBIL: &str = include_str!("../../fixtures/scenarios/sybil.toml");
pub const UNLOCK_CLIFF: &str = include_str!("../../fixtures/scenarios/unlock_cliff.toml");

pub const PRESETS: [(&str, &str); 4] = [
    ("capture", CAPTURE),
    ("sell_off_cascade", SELL_OFF_CASCADE),
    ("sybil", SYBIL),
    ("unlock_cliff", UNLOCK_CLIFF),
];

pub fn preset(name: &str) -> Result<Scenario, SimError> {
    let key = name.trim().to_ascii_lowercase().replace('-', "_");
    let doc = PRESETS
        .iter()
        .find(|(n, _)| *n == key)
        .map(|(_, d)| *d)
        .ok_or_else(|| SimError::UnknownPreset {
            name: name.to_string(),
            expected: PRESETS.iter().map(|(n, _)| n.to_string()).collect(),
        })?;
    Ok(Scenario::parse(doc).expect("bundled preset parses"))
}

/// Loads the economy document a scenario names: a bundled fixture name, or a
/// path resolved against `base` when relative.
pub fn resolve_spec(
    scenario: &Scenario,
    base: Option<&Path>,
) -> Result<Option<EconomySpec>, SpecError> {
    let Some(reference) = &scenario.spec else {
        return Ok(None);
    };
    if let Some(doc) = fixtures::get(reference) {
        return parse_spec(doc).map(Some);
    }
    let path = Path::new(reference);
    let path = match base {
        Some(b) if path.is_relative() => b.join(path),
        _ => path.to_path_buf(),
    };
    load_spec(path).map(Some)
}

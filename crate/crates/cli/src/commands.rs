//! Command bodies shared by the CLI and the HTTP API.
//!
//! Every command produces an [`Outcome`]: a status, a JSON body and a text
//! rendering. The CLI prints one of the two renderings and exits with
//! [`Status::exit_code`]; the API returns the JSON body under
//! [`Status::http_status`]. The JSON is the same value in both cases.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use tedm_core::governance::{property_matrix, recommend_mechanism, MechanismFamily, Property};
use tedm_core::metrics::{concentration_report, gini_exact, HolderDistribution, MetricsError};
use tedm_core::sim::{
    preset, resolve_spec, EpochDigest, EpochRecord, Scenario, ScenarioReport, SimError, PRESETS,
};
use tedm_core::spec::{compare_specs, fixtures, parse_spec, EconomySpec, SpecError};
use tedm_core::spec::{validate_spec, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The input could not be parsed.
    Invalid,
    /// The input parsed but has error-level findings.
    Rejected,
    /// Bad arguments or an unknown name.
    Usage,
    Internal,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Invalid | Status::Rejected => 1,
            Status::Usage => 2,
            Status::Internal => 3,
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            Status::Ok => 200,
            Status::Invalid | Status::Usage => 400,
            Status::Rejected => 422,
            Status::Internal => 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub body: Value,
    pub text: String,
}

impl Outcome {
    pub fn ok(body: Value, text: String) -> Outcome {
        Outcome {
            status: Status::Ok,
            body,
            text,
        }
    }

    pub fn error(status: Status, kind: &str, message: impl Into<String>) -> Outcome {
        let message = message.into();
        Outcome {
            status,
            body: json!({ "error": { "kind": kind, "message": message } }),
            text: format!("error: {message}\n"),
        }
    }

    pub fn usage(message: impl Into<String>) -> Outcome {
        Outcome::error(Status::Usage, "bad_request", message)
    }

    pub fn internal(message: impl Into<String>) -> Outcome {
        Outcome::error(Status::Internal, "internal", message)
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

impl From<SpecError> for Outcome {
    fn from(e: SpecError) -> Outcome {
        let status = match e {
            SpecError::Io { .. } => Status::Usage,
            _ => Status::Invalid,
        };
        let mut error = serde_json::to_value(&e).unwrap_or_else(|_| json!({}));
        error["message"] = Value::String(e.to_string());
        Outcome {
            status,
            body: json!({ "error": error }),
            text: format!("error: {e}\n"),
        }
    }
}

impl From<MetricsError> for Outcome {
    fn from(e: MetricsError) -> Outcome {
        let status = match e {
            MetricsError::Io(_) => Status::Usage,
            _ => Status::Invalid,
        };
        Outcome::error(status, "metrics", e.to_string())
    }
}

impl From<SimError> for Outcome {
    fn from(e: SimError) -> Outcome {
        match e {
            SimError::InvalidSpec(findings) => {
                let mut out = validation_body(&findings);
                out.text.insert_str(0, "economy document has errors:\n");
                out
            }
            SimError::InvalidScenario(_)
            | SimError::UnknownToken(_)
            | SimError::UnknownPreset { .. } => {
                Outcome::error(Status::Usage, "scenario", e.to_string())
            }
            other => Outcome::error(Status::Internal, "simulation", other.to_string()),
        }
    }
}

fn json_of<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("response types serialize")
}

/// Reads a document argument: `-` for stdin, a file path, or a bundled
/// economy document name.
pub fn read_document(arg: &str) -> Result<String, SpecError> {
    if arg == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(|e| {
            SpecError::Io {
                path: "<stdin>".into(),
                message: e.to_string(),
            }
        })?;
        return Ok(s);
    }
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(doc) = fixtures::get(arg) {
            return Ok(doc.to_string());
        }
    }
    std::fs::read_to_string(path).map_err(|e| SpecError::Io {
        path: arg.to_string(),
        message: e.to_string(),
    })
}

// ---- validate

fn validation_body(findings: &[tedm_core::spec::Finding]) -> Outcome {
    let errors = findings
        .iter()
        .filter(|f| f.severity == Severity::Error)
        .count();
    let warnings = findings
        .iter()
        .filter(|f| f.severity == Severity::Warning)
        .count();
    let mut text = String::new();
    for f in findings {
        let _ = writeln!(text, "{f}");
    }
    if errors == 0 {
        let _ = writeln!(text, "valid ({warnings} warnings)");
    } else {
        let _ = writeln!(text, "invalid: {errors} errors, {warnings} warnings");
    }
    Outcome {
        status: if errors == 0 {
            Status::Ok
        } else {
            Status::Rejected
        },
        body: json!({
            "valid": errors == 0,
            "error_count": errors,
            "warning_count": warnings,
            "findings": findings,
        }),
        text,
    }
}

/// Validates a TOML or JSON economy document.
pub fn validate(doc: &str) -> Outcome {
    match parse_spec(doc) {
        Ok(spec) => validate_parsed(&spec),
        Err(e) => {
            let mut out = Outcome::from(e);
            out.body["valid"] = Value::Bool(false);
            out
        }
    }
}

pub fn validate_parsed(spec: &EconomySpec) -> Outcome {
    validation_body(&validate_spec(spec).findings)
}

// ---- metrics

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRequest {
    pub entries: Vec<tedm_core::metrics::Holding>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

pub fn default_top_k() -> usize {
    10
}

pub fn metrics(dist: &HolderDistribution, top_k: usize) -> Outcome {
    let report = match concentration_report(dist, top_k) {
        Ok(r) => r,
        Err(e) => return e.into(),
    };
    let exact = match gini_exact(dist) {
        Ok(g) => g,
        Err(e) => return e.into(),
    };
    let mut body = json_of(&report);
    body["gini_exact"] = Value::String(exact.to_string());
    let mut text = String::new();
    let _ = writeln!(text, "holders      {}", report.holder_count);
    let _ = writeln!(text, "total weight {}", report.total_weight);
    let _ = writeln!(text, "gini         {:.6} ({exact})", report.gini);
    let _ = writeln!(text, "nakamoto     {}", report.nakamoto);
    let _ = writeln!(text, "top-k shares");
    for (k, s) in &report.top_k_shares {
        let _ = writeln!(text, "  {k:>6}  {s:.6}");
    }
    Outcome::ok(body, text)
}

// ---- simulate

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub preset: Option<String>,
    /// Inline economy document; otherwise the scenario's own reference is used.
    #[serde(default)]
    pub spec: Option<EconomySpec>,
    #[serde(default)]
    pub epochs: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Return full per-epoch records instead of digests.
    #[serde(default)]
    pub full: bool,
    /// Stream one JSON line per epoch.
    #[serde(default)]
    pub stream: bool,
}

/// A run ready to execute, keyed by the hash of its resolved inputs.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub spec: EconomySpec,
    pub scenario: Scenario,
    pub content_hash: String,
}

/// Resolves the scenario and its economy document. `base` enables file
/// references relative to it; without it only bundled names resolve.
pub fn prepare_run(req: SimulateRequest, base: Option<&Path>) -> Result<PreparedRun, Outcome> {
    let mut scenario = match (req.scenario, req.preset) {
        (Some(s), None) => s,
        (None, Some(name)) => preset(&name)?,
        (Some(_), Some(_)) => {
            return Err(Outcome::usage(
                "give either a scenario or a preset, not both",
            ))
        }
        (None, None) => return Err(Outcome::usage("a scenario or a preset is required")),
    };
    if let Some(e) = req.epochs {
        scenario.epochs = e;
    }
    if let Some(s) = req.seed {
        scenario.seed = s;
    }
    let spec = match req.spec {
        Some(spec) => spec,
        None => {
            let reference = scenario.spec.as_deref().unwrap_or_default();
            if base.is_none() && fixtures::get(reference).is_none() {
                return Err(Outcome::usage(format!(
                    "scenario refers to economy document `{reference}`; pass it inline or name a bundled one ({})",
                    fixtures::ALL.map(|(n, _)| n).join(", ")
                )));
            }
            resolve_spec(&scenario, base)?
                .ok_or_else(|| Outcome::usage("no economy document given for the scenario"))?
        }
    };
    let content_hash = content_hash(&spec, &scenario);
    Ok(PreparedRun {
        spec,
        scenario,
        content_hash,
    })
}

/// SHA-256 over the canonical JSON of the resolved inputs.
pub fn content_hash(spec: &EconomySpec, scenario: &Scenario) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(spec).expect("spec serializes"));
    h.update([0]);
    h.update(serde_json::to_vec(scenario).expect("scenario serializes"));
    hex(h)
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex(Sha256::new_with_prefix(bytes))
}

fn hex(h: Sha256) -> String {
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn simulation(report: &ScenarioReport, content_hash: &str, full: bool) -> Outcome {
    let mut body = json_of(report);
    if !full {
        body["epochs"] = json_of(
            &report
                .epochs
                .iter()
                .map(EpochDigest::from)
                .collect::<Vec<_>>(),
        );
    }
    body["content_hash"] = Value::String(content_hash.to_string());
    Outcome::ok(body, report.render_text())
}

/// One NDJSON line for a finished epoch.
pub fn epoch_line(record: &EpochRecord, full: bool) -> Value {
    let mut v = if full {
        json_of(record)
    } else {
        json_of(&EpochDigest::from(record))
    };
    v["type"] = Value::String("epoch".into());
    v
}

/// Closing NDJSON line.
pub fn summary_line(report: &ScenarioReport, content_hash: &str) -> Value {
    json!({
        "type": "summary",
        "content_hash": content_hash,
        "scenario": report.scenario,
        "spec": report.spec,
        "token": report.token,
        "seed": report.seed,
        "summary": report.summary,
    })
}

pub fn error_line(outcome: &Outcome) -> Value {
    json!({ "type": "error", "error": outcome.body["error"] })
}

// ---- compare

pub fn compare(left: &str, right: &str) -> Outcome {
    let a = match parse_spec(left) {
        Ok(s) => s,
        Err(e) => return e.into(),
    };
    let b = match parse_spec(right) {
        Ok(s) => s,
        Err(e) => return e.into(),
    };
    compare_parsed(&a, &b)
}

pub fn compare_parsed(a: &EconomySpec, b: &EconomySpec) -> Outcome {
    let report = compare_specs(a, b);
    Outcome::ok(json_of(&report), report.render_text())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRequest {
    pub left: EconomySpec,
    pub right: EconomySpec,
}

// ---- recommend

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendRequest {
    #[serde(default)]
    pub require: BTreeMap<Property, u8>,
    #[serde(default)]
    pub prefer: Vec<Property>,
}

/// Parses `property=level` pairs.
pub fn parse_requirements<S: AsRef<str>>(pairs: &[S]) -> Result<BTreeMap<Property, u8>, Outcome> {
    let mut out = BTreeMap::new();
    for raw in pairs {
        let raw = raw.as_ref();
        let (name, level) = raw
            .split_once('=')
            .ok_or_else(|| Outcome::usage(format!("expected property=level, got `{raw}`")))?;
        let property: Property =
            name.parse()
                .map_err(|e: tedm_core::governance::GovernanceError| {
                    Outcome::usage(format!(
                        "{e}; known: {}",
                        Property::ALL.map(|p| p.name()).join(", ")
                    ))
                })?;
        let level: u8 = level.trim().parse().map_err(|_| {
            Outcome::usage(format!(
                "level for {property} must be 0, 1 or 2, got `{level}`"
            ))
        })?;
        out.insert(property, level);
    }
    Ok(out)
}

pub fn recommend(req: &RecommendRequest) -> Outcome {
    let rec = match recommend_mechanism(&req.require, &req.prefer) {
        Ok(r) => r,
        Err(e) => return Outcome::usage(e.to_string()),
    };
    let mut text = String::new();
    if rec.no_candidate {
        let _ = writeln!(text, "no mechanism family meets the requirements");
    }
    for (i, r) in rec.ranked.iter().enumerate() {
        let scores: Vec<String> = r.scores.iter().map(|(p, s)| format!("{p} {s}")).collect();
        let _ = writeln!(
            text,
            "{}. {:<22} {}",
            i + 1,
            r.family.label(),
            scores.join(", ")
        );
    }
    Outcome::ok(json_of(&rec), text)
}

// ---- catalogues

pub fn presets() -> Outcome {
    let mut list = Vec::new();
    let mut text = String::new();
    for (name, _) in PRESETS {
        let s = preset(name).expect("bundled preset parses");
        let _ = writeln!(
            text,
            "{name:<18} {} epochs, {} agents, on {}",
            s.epochs,
            s.population(),
            s.spec.as_deref().unwrap_or("-")
        );
        list.push(json!({
            "name": name,
            "description": s.description,
            "spec": s.spec,
            "epochs": s.epochs,
            "seed": s.seed,
            "agents": s.population(),
            "scenario": s,
        }));
    }
    Outcome::ok(json!({ "presets": list }), text)
}

pub fn matrix() -> Outcome {
    let m = property_matrix();
    let mut text = format!("{:<32}", "");
    for p in Property::ALL {
        let _ = write!(text, " {:>10}", abbreviate(p.name()));
    }
    text.push('\n');
    for f in MechanismFamily::ALL {
        let _ = write!(text, "{:<32}", f.label());
        for p in Property::ALL {
            let _ = write!(text, " {:>10}", m.score(f, p));
        }
        text.push('\n');
    }
    Outcome::ok(json_of(m), text)
}

fn abbreviate(name: &str) -> String {
    name.chars().take(10).collect()
}

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::EconomySpec;
use crate::names;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecFormat {
    Toml,
    Json,
}

impl SpecFormat {
    /// JSON when the first non-blank character opens an object, TOML otherwise.
    pub fn detect(doc: &str) -> SpecFormat {
        match doc.trim_start().chars().next() {
            Some('{') => SpecFormat::Json,
            _ => SpecFormat::Toml,
        }
    }

    pub fn from_path(path: &Path) -> Option<SpecFormat> {
        match path.extension()?.to_str()? {
            "json" => Some(SpecFormat::Json),
            "toml" => Some(SpecFormat::Toml),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecError {
    #[error("{}{}: {message}", display_path(path), display_line(*line))]
    Schema {
        path: String,
        line: Option<usize>,
        message: String,
    },
    #[error(
        "{}{}: unknown value `{value}`{}",
        display_path(path),
        display_line(*line),
        suggestion.as_ref().map(|s| format!(", did you mean `{s}`?")).unwrap_or_default()
    )]
    UnknownEnumValue {
        path: String,
        line: Option<usize>,
        value: String,
        expected: Vec<String>,
        suggestion: Option<String>,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn display_path(path: &str) -> &str {
    if path.is_empty() || path == "." {
        "document"
    } else {
        path
    }
}

fn display_line(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl SpecError {
    pub fn path(&self) -> &str {
        match self {
            SpecError::Schema { path, .. }
            | SpecError::UnknownEnumValue { path, .. }
            | SpecError::Io { path, .. } => path,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            SpecError::Schema { line, .. } | SpecError::UnknownEnumValue { line, .. } => *line,
            SpecError::Io { .. } => None,
        }
    }

    fn from_message(path: String, line: Option<usize>, message: String) -> SpecError {
        match parse_unknown_variant(&message) {
            Some((value, expected)) => {
                let names: Vec<&str> = expected.iter().map(String::as_str).collect();
                SpecError::UnknownEnumValue {
                    suggestion: names::suggest(&value, &names).map(str::to_string),
                    path,
                    line,
                    value,
                    expected,
                }
            }
            None => SpecError::Schema {
                path,
                line,
                message,
            },
        }
    }
}

/// Picks apart serde's "unknown variant `x`, expected one of `a`, `b`" message.
fn parse_unknown_variant(message: &str) -> Option<(String, Vec<String>)> {
    let rest = message.strip_prefix("unknown variant `")?;
    let (value, tail) = rest.split_once('`')?;
    let expected = tail
        .split('`')
        .skip(1)
        .step_by(2)
        .map(str::to_string)
        .collect();
    Some((value.to_string(), expected))
}

fn line_of(doc: &str, offset: usize) -> usize {
    doc.as_bytes()[..offset.min(doc.len())]
        .iter()
        .filter(|b| **b == b'\n')
        .count()
        + 1
}

/// Deserializes any document type, collecting unknown field paths.
pub fn parse_spec_as<T: DeserializeOwned>(
    doc: &str,
    format: SpecFormat,
) -> Result<(T, Vec<String>), SpecError> {
    let mut unknown = Vec::new();
    let mut record = |p: serde_ignored::Path<'_>| unknown.push(p.to_string());
    let value = match format {
        SpecFormat::Toml => {
            let de = toml::de::Deserializer::parse(doc).map_err(|e| SpecError::Schema {
                path: String::new(),
                line: e.span().map(|s| line_of(doc, s.start)),
                message: e.message().to_string(),
            })?;
            let de = serde_ignored::Deserializer::new(de, &mut record);
            serde_path_to_error::deserialize(de).map_err(|e| {
                let path = e.path().to_string();
                let inner = e.into_inner();
                SpecError::from_message(
                    path,
                    inner.span().map(|s| line_of(doc, s.start)),
                    inner.message().to_string(),
                )
            })?
        }
        SpecFormat::Json => {
            let mut raw = serde_json::Deserializer::from_str(doc);
            let de = serde_ignored::Deserializer::new(&mut raw, &mut record);
            let value = serde_path_to_error::deserialize(de).map_err(|e| {
                let path = e.path().to_string();
                let inner = e.into_inner();
                let line = (inner.line() > 0).then_some(inner.line());
                let mut message = inner.to_string();
                if let Some(i) = message.rfind(" at line ") {
                    message.truncate(i);
                }
                SpecError::from_message(path, line, message)
            })?;
            raw.end().map_err(|e| SpecError::Schema {
                path: String::new(),
                line: Some(e.line()),
                message: "trailing characters after document".into(),
            })?;
            value
        }
    };
    Ok((value, unknown))
}

/// Parses a TOML or JSON economy document.
pub fn parse_spec(doc: &str) -> Result<EconomySpec, SpecError> {
    let (mut spec, unknown): (EconomySpec, _) = parse_spec_as(doc, SpecFormat::detect(doc))?;
    spec.unknown_fields = unknown;
    Ok(spec)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<EconomySpec, SpecError> {
    let path = path.as_ref();
    let doc = std::fs::read_to_string(path).map_err(|e| SpecError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let format = SpecFormat::from_path(path).unwrap_or_else(|| SpecFormat::detect(&doc));
    let (mut spec, unknown): (EconomySpec, _) = parse_spec_as(&doc, format)?;
    spec.unknown_fields = unknown;
    Ok(spec)
}

/// Canonical TOML: sorted keys, canonical enum names, exact quantities as
/// strings, no comments, LF line endings.
pub fn normalize_and_serialize(spec: &EconomySpec) -> String {
    let value = toml::Value::try_from(spec).expect("economy specs always serialize");
    toml::to_string(&value).expect("toml values always serialize")
}

/// JSON form with sorted keys, as exchanged over the HTTP API.
pub fn to_json(spec: &EconomySpec) -> serde_json::Value {
    serde_json::to_value(spec).expect("economy specs always serialize")
}

/// JSON Schema for economy documents.
pub fn json_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(EconomySpec)).expect("schema serializes")
}

//! Python bindings. Structured values cross the boundary as plain Python
//! dicts and lists; exact quantities come back as decimal or `p/q` strings.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use tedm_core::governance::{self, Ballot, Property, Proposal, VotingMechanism};
use tedm_core::metrics::{self, HolderDistribution, Holding};
use tedm_core::quantity::Quantity;
use tedm_core::sim::{self, Scenario};
use tedm_core::spec::{self, EconomySpec, SpecFormat};
use tedm_core::supply::{self, EpochFlows, SupplyPolicy, SupplyState, VestingSchedule};

create_exception!(
    tedm,
    TedmError,
    PyValueError,
    "Raised for invalid inputs and failed operations."
);

fn err(e: impl std::fmt::Display) -> PyErr {
    TedmError::new_err(e.to_string())
}

/// Python object to a core type, through JSON so field paths show up in errors.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let py = obj.py();
    let kwargs = PyDict::new(py);
    kwargs.set_item("default", py.get_type::<pyo3::types::PyString>())?;
    let text: String = py
        .import("json")?
        .call_method("dumps", (obj,), Some(&kwargs))?
        .extract()?;
    spec::parse_spec_as::<T>(&text, SpecFormat::Json)
        .map(|(v, _)| v)
        .map_err(err)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn quantity(obj: &Bound<'_, PyAny>) -> PyResult<Quantity> {
    obj.str()?.to_str()?.parse::<Quantity>().map_err(err)
}

/// A list of weights or a mapping of entity to weight.
fn distribution(obj: &Bound<'_, PyAny>) -> PyResult<HolderDistribution> {
    if let Ok(map) = obj.cast::<PyDict>() {
        let mut entries = Vec::with_capacity(map.len());
        for (k, v) in map.iter() {
            entries.push(Holding {
                entity: k.str()?.to_string(),
                weight: quantity(&v)?,
            });
        }
        return HolderDistribution::new(entries).map_err(err);
    }
    let weights = obj
        .try_iter()?
        .map(|item| quantity(&item?))
        .collect::<PyResult<Vec<_>>>()?;
    HolderDistribution::from_weights(weights).map_err(err)
}

fn fraction<'py>(py: Python<'py>, q: &Quantity) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((q.to_string(),))
}

// ---- metrics

/// Gini coefficient of a weight list or entity mapping.
#[pyfunction]
fn gini(weights: &Bound<'_, PyAny>) -> PyResult<f64> {
    metrics::gini(&distribution(weights)?).map_err(err)
}

/// Exact Gini coefficient as a `fractions.Fraction`.
#[pyfunction]
fn gini_exact<'py>(py: Python<'py>, weights: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let g = metrics::gini_exact(&distribution(weights)?).map_err(err)?;
    fraction(py, &Quantity::from_rational(g))
}

#[pyfunction]
fn nakamoto(weights: &Bound<'_, PyAny>) -> PyResult<usize> {
    metrics::nakamoto(&distribution(weights)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (weights, top_k = 10))]
fn concentration_report<'py>(
    py: Python<'py>,
    weights: &Bound<'py, PyAny>,
    top_k: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let report = metrics::concentration_report(&distribution(weights)?, top_k).map_err(err)?;
    to_py(py, &report)
}

/// Reads an `entity,weight` CSV into an entity to weight-string mapping.
#[pyfunction]
fn load_snapshot<'py>(py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyAny>> {
    let dist = metrics::load_snapshot(path).map_err(err)?;
    let out: BTreeMap<String, String> = dist
        .entries
        .into_iter()
        .map(|h| (h.entity, h.weight.to_string()))
        .collect();
    to_py(py, &out)
}

// ---- supply

/// One epoch of supply accounting. `policy` is `{"kind": "capped", "s_max": ...}`
/// or `{"kind": "uncapped"}`; returns `(state, truncation or None)`.
#[pyfunction]
fn step_supply<'py>(
    py: Python<'py>,
    state: &Bound<'py, PyAny>,
    flows: &Bound<'py, PyAny>,
    policy: &Bound<'py, PyAny>,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let state: SupplyState = from_py(state)?;
    let flows: EpochFlows = from_py(flows)?;
    let policy: SupplyPolicy = from_py(policy)?;
    let step = supply::step_supply(&state, &flows, &policy).map_err(err)?;
    Ok((to_py(py, &step.state)?, to_py(py, &step.truncation)?))
}

/// Cumulative amount released by `epoch` under a vesting schedule.
#[pyfunction]
fn vesting_released<'py>(
    py: Python<'py>,
    schedule: &Bound<'py, PyAny>,
    epoch: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let schedule: VestingSchedule = from_py(schedule)?;
    schedule.check().map_err(err)?;
    fraction(py, &supply::vesting_released(&schedule, epoch))
}

// ---- governance

/// Tallies ballots (`[{"voter": {"id", "balance", ...}, "choice": "for"}]`)
/// under a mechanism such as `{"family": "quadratic"}`.
#[pyfunction]
#[pyo3(signature = (ballots, mechanism, proposal = None))]
fn tally<'py>(
    py: Python<'py>,
    ballots: &Bound<'py, PyAny>,
    mechanism: &Bound<'py, PyAny>,
    proposal: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let ballots: Vec<Ballot> = from_py(ballots)?;
    let mechanism: VotingMechanism = from_py(mechanism)?;
    let proposal = match proposal {
        Some(p) => from_py::<Proposal>(p)?,
        None => Proposal::new(
            "proposal",
            governance::ProposalKind::Treasury,
            Quantity::from_ratio(1, 2),
        ),
    };
    to_py(
        py,
        &governance::tally(&proposal, &ballots, &mechanism).map_err(err)?,
    )
}

/// Families meeting minimum property levels, best first.
#[pyfunction]
#[pyo3(signature = (require = None, prefer = None))]
fn recommend_mechanism<'py>(
    py: Python<'py>,
    require: Option<BTreeMap<String, u8>>,
    prefer: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut required = BTreeMap::new();
    for (k, v) in require.unwrap_or_default() {
        required.insert(k.parse::<Property>().map_err(err)?, v);
    }
    let prefer = prefer
        .unwrap_or_default()
        .iter()
        .map(|p| p.parse::<Property>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    to_py(
        py,
        &governance::recommend_mechanism(&required, &prefer).map_err(err)?,
    )
}

#[pyfunction]
fn property_matrix(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, governance::property_matrix())
}

// ---- economy documents

#[pyclass(name = "EconomySpec", module = "tedm", frozen)]
struct PyEconomySpec {
    inner: EconomySpec,
}

#[pymethods]
impl PyEconomySpec {
    /// Parses TOML or JSON text.
    #[staticmethod]
    fn parse(doc: &str) -> PyResult<Self> {
        spec::parse_spec(doc)
            .map(|inner| PyEconomySpec { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        spec::load_spec(path)
            .map(|inner| PyEconomySpec { inner })
            .map_err(err)
    }

    /// One of the bundled documents: currynomics, uniswap or curve.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        let doc = spec::fixtures::get(name)
            .ok_or_else(|| err(format!("no bundled document `{name}`")))?;
        Self::parse(doc)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &spec::validate_spec(&self.inner))
    }

    fn is_valid(&self) -> bool {
        spec::validate_spec(&self.inner).is_valid()
    }

    fn compare<'py>(&self, py: Python<'py>, other: &PyEconomySpec) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &spec::compare_specs(&self.inner, &other.inner))
    }

    /// Canonical TOML text.
    fn to_toml(&self) -> String {
        spec::normalize_and_serialize(&self.inner)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("EconomySpec({:?})", self.inner.name)
    }
}

/// Validation findings for TOML or JSON text.
#[pyfunction]
fn validate_spec<'py>(py: Python<'py>, doc: &str) -> PyResult<Bound<'py, PyAny>> {
    let spec = spec::parse_spec(doc).map_err(err)?;
    to_py(py, &spec::validate_spec(&spec))
}

// ---- scenarios

#[pyfunction]
fn presets() -> Vec<&'static str> {
    sim::PRESETS.iter().map(|(n, _)| *n).collect()
}

/// Runs a preset or a scenario document (TOML/JSON text). The economy
/// document defaults to the scenario's bundled reference.
#[pyfunction]
#[pyo3(signature = (preset = None, scenario = None, spec = None, epochs = None, seed = None))]
fn simulate<'py>(
    py: Python<'py>,
    preset: Option<&str>,
    scenario: Option<&str>,
    spec: Option<&PyEconomySpec>,
    epochs: Option<u64>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut s: Scenario = match (preset, scenario) {
        (Some(name), None) => sim::preset(name).map_err(err)?,
        (None, Some(doc)) => Scenario::parse(doc).map_err(err)?,
        _ => return Err(err("give exactly one of preset or scenario")),
    };
    if let Some(e) = epochs {
        s.epochs = e;
    }
    if let Some(v) = seed {
        s.seed = v;
    }
    let economy = match spec {
        Some(p) => p.inner.clone(),
        None => sim::resolve_spec(&s, None)
            .map_err(err)?
            .ok_or_else(|| err("scenario names no economy document; pass spec="))?,
    };
    let report = py.detach(|| sim::run_scenario(&economy, &s)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
pub fn tedm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TedmError", m.py().get_type::<TedmError>())?;
    m.add_class::<PyEconomySpec>()?;
    m.add_function(wrap_pyfunction!(gini, m)?)?;
    m.add_function(wrap_pyfunction!(gini_exact, m)?)?;
    m.add_function(wrap_pyfunction!(nakamoto, m)?)?;
    m.add_function(wrap_pyfunction!(concentration_report, m)?)?;
    m.add_function(wrap_pyfunction!(load_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(step_supply, m)?)?;
    m.add_function(wrap_pyfunction!(vesting_released, m)?)?;
    m.add_function(wrap_pyfunction!(tally, m)?)?;
    m.add_function(wrap_pyfunction!(recommend_mechanism, m)?)?;
    m.add_function(wrap_pyfunction!(property_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(validate_spec, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}

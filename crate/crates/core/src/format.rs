//! The model file format: a TOML document. See `docs/model-format.md`.
//!
//! ```toml
//! states = ["A", "B"]
//!
//! [[events]]
//! name = "a"
//! kind = "uniform"
//! lower = 0
//! upper = 1
//!
//! [schedule]
//! A = ["a"]
//! B = ["a"]
//!
//! [[succ]]
//! state = "A"
//! events = ["a"]
//! targets = { B = 1.0 }
//!
//! [init]
//! A = 1.0
//! ```

use indexmap::IndexMap;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, ModelError};
use crate::model::{DelayKind, DelayLaw, GsmpModel, Rational, UpperBound};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum BoundRepr {
    Int(i64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventEntry {
    name: String,
    kind: DelayKind,
    lower: i64,
    upper: BoundRepr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccEntry {
    state: String,
    events: Vec<String>,
    targets: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    states: Vec<String>,
    events: Vec<EventEntry>,
    schedule: IndexMap<String, Vec<String>>,
    #[serde(default)]
    succ: Vec<SuccEntry>,
    init: IndexMap<String, f64>,
}

fn upper_of(repr: &BoundRepr) -> Result<UpperBound, FormatError> {
    match repr {
        BoundRepr::Int(u) => Ok(UpperBound::Finite(Rational::from_integer(*u))),
        BoundRepr::Text(t) if t == "inf" => Ok(UpperBound::Infinite),
        BoundRepr::Text(t) => Err(FormatError::Bound(t.clone())),
    }
}

/// Parses and resolves names without checking semantic invariants.
pub fn parse_model_unchecked(text: &str) -> Result<GsmpModel, FormatError> {
    let file: ModelFile = toml::from_str(text)?;
    for state in file.schedule.keys() {
        if !file.states.contains(state) {
            return Err(ModelError::UnknownState(state.clone()).into());
        }
    }
    let mut b = GsmpModel::builder();
    for ev in &file.events {
        b = b.event(
            &ev.name,
            DelayLaw {
                kind: ev.kind,
                lower: Rational::from_integer(ev.lower),
                upper: upper_of(&ev.upper)?,
                rate: ev.rate,
            },
        );
    }
    for s in &file.states {
        let sched: Vec<&str> = file
            .schedule
            .get(s)
            .map(|v| v.iter().map(String::as_str).collect())
            .unwrap_or_default();
        b = b.state(s, &sched);
    }
    for row in &file.succ {
        let events: Vec<&str> = row.events.iter().map(String::as_str).collect();
        let targets: Vec<(&str, f64)> = row.targets.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        b = b.succ(&row.state, &events, &targets);
    }
    let init: Vec<(&str, f64)> = file.init.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    Ok(b.init(&init).build()?)
}

/// Parses, validates and renormalizes a model file.
pub fn parse_model(text: &str) -> Result<GsmpModel, FormatError> {
    parse_model_unchecked(text)?
        .validated()
        .map_err(FormatError::Invalid)
}

pub fn serialize_model(model: &GsmpModel) -> Result<String, FormatError> {
    let names = |set: crate::model::EventSet| -> Vec<String> {
        set.iter().map(|e| model.event_name(e).to_string()).collect()
    };
    let file = ModelFile {
        states: model.states().to_vec(),
        events: model
            .events()
            .iter()
            .map(|e| EventEntry {
                name: e.name.clone(),
                kind: e.law.kind,
                lower: e.law.lower.to_integer(),
                upper: match e.law.upper {
                    UpperBound::Finite(u) => BoundRepr::Int(u.to_i64().unwrap_or(i64::MAX)),
                    UpperBound::Infinite => BoundRepr::Text("inf".into()),
                },
                rate: e.law.rate,
            })
            .collect(),
        schedule: model
            .state_ids()
            .map(|s| (model.state_name(s).to_string(), names(model.scheduled(s))))
            .collect(),
        succ: model
            .succ_rows()
            .iter()
            .map(|row| SuccEntry {
                state: model.state_name(row.state).to_string(),
                events: names(row.events),
                targets: row
                    .targets
                    .iter()
                    .map(|&(s, p)| (model.state_name(s).to_string(), p))
                    .collect(),
            })
            .collect(),
        init: model
            .init()
            .iter()
            .map(|&(s, p)| (model.state_name(s).to_string(), p))
            .collect(),
    };
    Ok(toml::to_string(&file)?)
}

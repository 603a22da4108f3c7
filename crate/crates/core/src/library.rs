//! Built-in catalog of models.
//!
//! The catalog holds the two producer-consumer counterexamples (with and
//! without an absorbing sink), a network time protocol client, and small
//! models with known answers. Every entry also ships as a model file under
//! `models/`.

use serde::Serialize;
use thiserror::Error;

use crate::model::{DelayLaw, GsmpModel, GsmpModelBuilder};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectedProperty {
    pub property: String,
    pub value: String,
    pub provenance: String,
}

#[derive(Clone, Debug)]
pub struct NamedModel {
    pub key: &'static str,
    pub model: GsmpModel,
    pub provenance: &'static str,
    /// Default target states for frequency measurements.
    pub target: Vec<&'static str>,
    pub expected_properties: Vec<ExpectedProperty>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown catalog model {0:?}")]
pub struct UnknownModel(pub String);

const KEYS: [&str; 7] = [
    "fig1-producer-consumer",
    "fig2-sink",
    "fig2-cycled",
    "ntp",
    "renewal-2",
    "regions-demo",
    "chain-ticking",
];

pub fn catalog_keys() -> &'static [&'static str] {
    &KEYS
}

fn prop(property: &str, value: &str, provenance: &str) -> ExpectedProperty {
    ExpectedProperty {
        property: property.into(),
        value: value.into(),
        provenance: provenance.into(),
    }
}

fn finish(b: GsmpModelBuilder) -> GsmpModel {
    b.build()
        .expect("catalog names resolve")
        .validated()
        .expect("catalog models are valid")
}

pub fn get_model(key: &str) -> Result<NamedModel, UnknownModel> {
    let entry = match key {
        "fig1-producer-consumer" | "fig1" => NamedModel {
            key: "fig1-producer-consumer",
            model: producer_consumer(),
            provenance: "producer-consumer with two consumer modules; fixed p, c with delay 1, \
                         uniform t on [0,1]; transition relation encoded from the textual \
                         description, point successor distributions",
            target: vec![
                "1-Transporting",
                "1-Buffered",
                "1-Consuming",
                "1-C-waiting",
            ],
            expected_properties: vec![
                prop("bound", "1", "reference"),
                prop("single-ticking", "false", "reference: p and c both self-schedule"),
                prop("frequencies", "may fail to exist", "reference"),
            ],
        },
        "fig2-sink" | "fig2" => NamedModel {
            key: "fig2-sink",
            model: producer_consumer_sink(false),
            provenance: "single consumer module with an extra uniform t' on [0,1] leading from \
                         C-waiting to an absorbing Sink; encoded from the textual description",
            target: vec!["Sink"],
            expected_properties: vec![
                prop("single-ticking", "false", "reference"),
                prop("bscc", "Sink region", "reference"),
                prop("reach probability of Sink", "below 1 (never-reach mass > 0.009)", "reference"),
            ],
        },
        "fig2-cycled" => NamedModel {
            key: "fig2-cycled",
            model: producer_consumer_sink(true),
            provenance: "fig2-sink with the Sink self-loop replaced by a p-transition to Init",
            target: vec!["Sink"],
            expected_properties: vec![
                prop("single-ticking", "false", "reference"),
                prop("region graph", "one strongly connected component", "reference"),
                prop("Sink visits", "finitely many almost surely", "reference"),
            ],
        },
        "ntp" => NamedModel {
            key: "ntp",
            model: ntp(),
            provenance: "network time protocol client with fixed delays roundtrip_d = 1, \
                         polling_d = 90, stable_d = 100; transition relation reconstructed from \
                         prose. A completed synchronization restarts both stable_d and \
                         polling_d",
            target: vec!["Init'", "Q-sent'"],
            expected_properties: vec![
                prop("bound", "100", "reference"),
                prop("frequencies", "reproducible across seeds", "self-consistency"),
            ],
        },
        "renewal-2" => NamedModel {
            key: "renewal-2",
            model: renewal(),
            provenance: "alternating renewal process, uniform(0,1) then uniform(1,3)",
            target: vec!["A"],
            expected_properties: vec![
                prop("single-ticking", "true", "no fixed-delay events"),
                prop("c(A)", "0.2", "renewal-reward: 0.5 / 2.5"),
                prop("d(A)", "0.5", "strict alternation"),
            ],
        },
        "regions-demo" => NamedModel {
            key: "regions-demo",
            model: regions_demo(),
            provenance: "one state with e uniform on [0,1] and f uniform on [2,3]",
            target: vec!["S"],
            expected_properties: vec![
                prop("bound", "3", "reference"),
                prop(
                    "P(dwell > 0.3) from (e=0.2, f=0.7)",
                    "0.625",
                    "residual survival (0.8 - 0.3) / 0.8",
                ),
            ],
        },
        "chain-ticking" => NamedModel {
            key: "chain-ticking",
            model: chain_ticking(),
            provenance: "hand-built chain: fixed e (3) ticks and schedules f (1), which \
                         schedules g (1); a uniform v in between",
            target: vec!["C"],
            expected_properties: vec![
                prop("single-ticking", "true, order e < f < g", "causes enumeration"),
                prop("d(C)", "0.25", "deterministic four-step cycle"),
                prop("c(C)", "1/6", "mean dwell 0.5 over cycle length 3"),
            ],
        },
        _ => return Err(UnknownModel(key.to_string())),
    };
    Ok(entry)
}

fn producer_consumer() -> GsmpModel {
    let mut b = GsmpModel::builder()
        .event("p", DelayLaw::fixed(1))
        .event("c", DelayLaw::fixed(1))
        .event("t", DelayLaw::uniform(0, 1))
        .state("Init", &["p"]);
    for m in [1, 2] {
        b = b
            .state(&format!("{m}-Transporting"), &["p", "t", "c"])
            .state(&format!("{m}-Buffered"), &["p", "c"])
            .state(&format!("{m}-Consuming"), &["p", "c"])
            .state(&format!("{m}-C-waiting"), &["p", "t"]);
    }
    b = b.succ("Init", &["p"], &[("1-C-waiting", 1.0)]);
    for m in [1, 2] {
        let other = 3 - m;
        b = b
            .succ(&format!("{m}-C-waiting"), &["t"], &[(&format!("{m}-Consuming"), 1.0)])
            .succ(&format!("{m}-Consuming"), &["p"], &[(&format!("{m}-Transporting"), 1.0)])
            .succ(&format!("{m}-Transporting"), &["t"], &[(&format!("{m}-Buffered"), 1.0)])
            .succ(
                &format!("{m}-Transporting"),
                &["c"],
                &[(&format!("{other}-C-waiting"), 1.0)],
            )
            .succ(&format!("{m}-Buffered"), &["c"], &[(&format!("{m}-Consuming"), 1.0)]);
    }
    finish(b.init(&[("Init", 1.0)]))
}

fn producer_consumer_sink(cycled: bool) -> GsmpModel {
    let b = GsmpModel::builder()
        .event("p", DelayLaw::fixed(1))
        .event("c", DelayLaw::fixed(1))
        .event("t", DelayLaw::uniform(0, 1))
        .event("t'", DelayLaw::uniform(0, 1))
        .state("Init", &["p"])
        .state("Transporting", &["p", "t", "c"])
        .state("Buffered", &["p", "c"])
        .state("Consuming", &["p", "c"])
        .state("C-waiting", &["p", "t", "t'"])
        .state("Sink", &["p"])
        .succ("Init", &["p"], &[("C-waiting", 1.0)])
        .succ("C-waiting", &["t"], &[("Consuming", 1.0)])
        .succ("C-waiting", &["t'"], &[("Sink", 1.0)])
        .succ("Consuming", &["p"], &[("Transporting", 1.0)])
        .succ("Transporting", &["t"], &[("Buffered", 1.0)])
        .succ("Transporting", &["c"], &[("C-waiting", 1.0)])
        .succ("Buffered", &["c"], &[("Consuming", 1.0)])
        .succ("Sink", &["p"], &[(if cycled { "Init" } else { "Sink" }, 1.0)]);
    finish(b.init(&[("Init", 1.0)]))
}

fn ntp() -> GsmpModel {
    let b = GsmpModel::builder()
        .event("roundtrip_d", DelayLaw::fixed(1))
        .event("polling_d", DelayLaw::fixed(90))
        .event("stable_d", DelayLaw::fixed(100))
        .event("query", DelayLaw::uniform(0, 1))
        .event("response", DelayLaw::uniform(0, 2))
        .event("sync", DelayLaw::uniform(0, 1))
        .state("Idle", &["polling_d", "stable_d"])
        .state("Init", &["query", "stable_d"])
        .state("Q-sent", &["response", "roundtrip_d", "stable_d"])
        .state("Sync", &["sync"])
        .state("Init'", &["query"])
        .state("Q-sent'", &["response", "roundtrip_d"])
        .succ("Idle", &["polling_d"], &[("Init", 1.0)])
        .succ("Init", &["query"], &[("Q-sent", 1.0)])
        .succ("Init", &["stable_d"], &[("Init'", 1.0)])
        .succ("Q-sent", &["response"], &[("Sync", 1.0)])
        .succ("Q-sent", &["roundtrip_d"], &[("Init", 1.0)])
        .succ("Q-sent", &["stable_d"], &[("Q-sent'", 1.0)])
        .succ("Sync", &["sync"], &[("Idle", 1.0)])
        .succ("Init'", &["query"], &[("Q-sent'", 1.0)])
        .succ("Q-sent'", &["response"], &[("Sync", 1.0)])
        .succ("Q-sent'", &["roundtrip_d"], &[("Init'", 1.0)]);
    finish(b.init(&[("Idle", 1.0)]))
}

fn renewal() -> GsmpModel {
    finish(
        GsmpModel::builder()
            .event("a", DelayLaw::uniform(0, 1))
            .event("b", DelayLaw::uniform(1, 3))
            .state("A", &["a"])
            .state("B", &["b"])
            .succ("A", &["a"], &[("B", 1.0)])
            .succ("B", &["b"], &[("A", 1.0)])
            .init(&[("A", 1.0)]),
    )
}

fn regions_demo() -> GsmpModel {
    finish(
        GsmpModel::builder()
            .event("e", DelayLaw::uniform(0, 1))
            .event("f", DelayLaw::uniform(2, 3))
            .state("S", &["e", "f"])
            .succ("S", &["e"], &[("S", 1.0)])
            .succ("S", &["f"], &[("S", 1.0)])
            .init(&[("S", 1.0)]),
    )
}

fn chain_ticking() -> GsmpModel {
    finish(
        GsmpModel::builder()
            .event("e", DelayLaw::fixed(3))
            .event("f", DelayLaw::fixed(1))
            .event("g", DelayLaw::fixed(1))
            .event("v", DelayLaw::uniform(0, 1))
            .state("A", &["e", "f"])
            .state("B", &["e", "g"])
            .state("C", &["e", "v"])
            .state("D", &["e"])
            .succ("A", &["f"], &[("B", 1.0)])
            .succ("B", &["g"], &[("C", 1.0)])
            .succ("C", &["v"], &[("D", 1.0)])
            .succ("D", &["e"], &[("A", 1.0)])
            .init(&[("A", 1.0)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn every_entry_validates() {
        for key in catalog_keys() {
            let entry = get_model(key).unwrap();
            assert_eq!(entry.key, *key);
            assert!(validate_model(&entry.model).is_valid(), "{key}");
            for t in &entry.target {
                assert!(entry.model.state_id(t).is_some(), "{key}: {t}");
            }
        }
        assert!(get_model("nope").is_err());
    }

    #[test]
    fn bounds() {
        assert_eq!(get_model("fig1").unwrap().model.bound(), 1);
        assert_eq!(get_model("ntp").unwrap().model.bound(), 100);
        assert_eq!(get_model("regions-demo").unwrap().model.bound(), 3);
        let fig1 = get_model("fig1").unwrap().model;
        assert_eq!(fig1.num_events(), 3);
        assert_eq!(fig1.fixed_events().len(), 2);
    }
}

//! Structural checks: the causes relation between fixed-delay events, the
//! single-ticking classifier, δ-separation of configurations, and the
//! overall classification that decides whether frequencies are guaranteed
//! to exist.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::RegionError;
use crate::model::{EventId, GsmpModel};
use crate::regions::{build_region_graph, RegionGraph};
use crate::simulator::Configuration;

/// `(f, g)`: an occurrence involving fixed `f` can newly schedule fixed `g`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CausesRelation {
    pub edges: BTreeSet<(EventId, EventId)>,
}

impl CausesRelation {
    pub fn contains(&self, f: EventId, g: EventId) -> bool {
        self.edges.contains(&(f, g))
    }

    pub fn self_loops(&self) -> Vec<EventId> {
        self.edges.iter().filter(|(f, g)| f == g).map(|&(f, _)| f).collect()
    }

    pub fn named(&self, model: &GsmpModel) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(f, g)| (model.event_name(f).to_string(), model.event_name(g).to_string()))
            .collect()
    }
}

/// Scans every positive-probability successor entry. "Newly scheduled"
/// uses the same old/inherited/new split as the simulator.
pub fn causes_relation(model: &GsmpModel) -> CausesRelation {
    let fixed = model.fixed_events();
    let mut edges = BTreeSet::new();
    for row in model.succ_rows() {
        for &(to, p) in &row.targets {
            if p <= 0.0 {
                continue;
            }
            let new = model.fates(row.state, row.events, to).new.intersection(fixed);
            for f in row.events.intersection(fixed).iter() {
                for g in new.iter() {
                    edges.insert((f, g));
                }
            }
        }
    }
    CausesRelation { edges }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "events", rename_all = "kebab-case")]
pub enum Witness {
    /// A strict total order on the fixed events, least first.
    Order(Vec<String>),
    /// A causes cycle through distinct events.
    Cycle(Vec<String>),
    /// Two or more distinct self-scheduling events.
    SelfLoops(Vec<String>),
    /// The only self-scheduling event is caused by another one: `[from, ticking]`.
    CausedTicker(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TickingVerdict {
    pub single_ticking: bool,
    pub ticking_event: Option<String>,
    pub witness: Witness,
}

fn find_cycle(n: usize, adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    // iterative colouring DFS; 0 white, 1 on stack, 2 done
    let mut color = vec![0u8; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        color[root] = 1;
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            if *i < adj[u].len() {
                let v = adj[u][*i];
                *i += 1;
                if color[v] == 0 {
                    color[v] = 1;
                    parent[v] = u;
                    stack.push((v, 0));
                } else if color[v] == 1 {
                    let mut cycle = vec![v];
                    let mut w = u;
                    while w != v {
                        cycle.push(w);
                        w = parent[w];
                    }
                    cycle.reverse();
                    cycle.rotate_right(1);
                    return Some(cycle);
                }
            } else {
                color[u] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Decides whether a strict total order on the fixed events exists with a
/// least element `e` such that every causes edge `(f, g)` has `f < g` or
/// `f = g = e`.
pub fn single_ticking_check(model: &GsmpModel) -> TickingVerdict {
    let fixed: Vec<EventId> = model.fixed_events().iter().collect();
    let name = |e: EventId| model.event_name(e).to_string();
    if fixed.is_empty() {
        return TickingVerdict {
            single_ticking: true,
            ticking_event: None,
            witness: Witness::Order(Vec::new()),
        };
    }
    let rel = causes_relation(model);
    let loops = rel.self_loops();
    if loops.len() >= 2 {
        return TickingVerdict {
            single_ticking: false,
            ticking_event: None,
            witness: Witness::SelfLoops(loops.into_iter().map(name).collect()),
        };
    }
    let pos = |e: EventId| fixed.iter().position(|&x| x == e).unwrap();
    let n = fixed.len();
    let mut adj = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for &(f, g) in &rel.edges {
        if f != g {
            adj[pos(f)].push(pos(g));
            indegree[pos(g)] += 1;
        }
    }
    if let Some(cycle) = find_cycle(n, &adj) {
        return TickingVerdict {
            single_ticking: false,
            ticking_event: None,
            witness: Witness::Cycle(cycle.into_iter().map(|i| name(fixed[i])).collect()),
        };
    }
    let candidates: Vec<usize> = match loops.first() {
        Some(&e) => vec![pos(e)],
        None => (0..n).collect(),
    };
    let Some(&e) = candidates.iter().find(|&&c| indegree[c] == 0) else {
        let e = candidates[0];
        let from = (0..n).find(|&f| adj[f].contains(&e)).unwrap();
        return TickingVerdict {
            single_ticking: false,
            ticking_event: None,
            witness: Witness::CausedTicker(vec![name(fixed[from]), name(fixed[e])]),
        };
    };
    // Kahn's algorithm with `e` first, then lowest index
    let mut order = vec![e];
    let mut indeg = indegree.clone();
    let mut ready: BTreeSet<usize> = BTreeSet::new();
    for &v in &adj[e] {
        indeg[v] -= 1;
    }
    for v in 0..n {
        if v != e && indeg[v] == 0 {
            ready.insert(v);
        }
    }
    while let Some(u) = ready.pop_first() {
        order.push(u);
        for &v in &adj[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.insert(v);
            }
        }
    }
    debug_assert_eq!(order.len(), n);
    TickingVerdict {
        single_ticking: true,
        ticking_event: Some(name(fixed[e])),
        witness: Witness::Order(order.into_iter().map(|i| name(fixed[i])).collect()),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FractionalDistance {
    /// `min(|x − y|, 1 − |x − y|)` on fractional parts.
    #[default]
    Circular,
    /// `|x − y|` on fractional parts.
    Literal,
}

/// All pairs over `{0} ∪ {ν(e)}` have fractional parts that are equal or
/// further apart than `delta`.
pub fn is_delta_separated(model: &GsmpModel, cfg: &Configuration, delta: f64) -> bool {
    is_delta_separated_with(model, cfg, delta, FractionalDistance::Circular)
}

pub fn is_delta_separated_with(
    model: &GsmpModel,
    cfg: &Configuration,
    delta: f64,
    mode: FractionalDistance,
) -> bool {
    let mut fracs = vec![0.0];
    for e in model.scheduled(cfg.state).iter() {
        if let Some(v) = cfg.value(e) {
            fracs.push(v - v.floor());
        }
    }
    for (i, &x) in fracs.iter().enumerate() {
        for &y in &fracs[i + 1..] {
            if x == y {
                continue;
            }
            let d = (x - y).abs();
            let d = match mode {
                FractionalDistance::Circular => d.min(1.0 - d),
                FractionalDistance::Literal => d,
            };
            if d <= delta {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, Serialize)]
pub struct BsccSummary {
    pub id: usize,
    pub size: usize,
    pub period: u64,
    pub states: Vec<String>,
    pub regions: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub verdict: TickingVerdict,
    pub causes: Vec<(String, String)>,
    /// Equals `verdict.single_ticking`.
    pub guarantee: bool,
    pub statement: String,
    pub regions: usize,
    pub edges: usize,
    pub bsccs: Vec<BsccSummary>,
}

pub const GUARANTEE_GRANTED: &str =
    "single-ticking: d and c are almost surely well-defined, taking one (d_i, c_i) pair per BSCC";
pub const GUARANTEE_REFUSED: &str = "no guarantee: frequencies may fail to exist and BSCCs may be \
     unreachable; estimation results are diagnostic only";

pub fn summarize_bsccs(model: &GsmpModel, graph: &RegionGraph) -> Vec<BsccSummary> {
    graph
        .labels
        .bsccs()
        .enumerate()
        .map(|(id, members)| {
            let states: BTreeSet<&str> = members
                .iter()
                .map(|&v| model.state_name(graph.regions[v].state))
                .collect();
            BsccSummary {
                id,
                size: members.len(),
                period: graph.labels.periods[id],
                states: states.into_iter().map(String::from).collect(),
                regions: members
                    .iter()
                    .map(|&v| graph.regions[v].describe(model))
                    .collect(),
            }
        })
        .collect()
}

/// Builds the region graph, decomposes it, and runs the classifier.
pub fn classify(model: &GsmpModel) -> Result<(AnalysisReport, RegionGraph), RegionError> {
    let graph = build_region_graph(model)?;
    let verdict = single_ticking_check(model);
    let guarantee = verdict.single_ticking;
    let report = AnalysisReport {
        causes: causes_relation(model).named(model),
        guarantee,
        statement: if guarantee {
            GUARANTEE_GRANTED
        } else {
            GUARANTEE_REFUSED
        }
        .to_string(),
        regions: graph.num_vertices(),
        edges: graph.num_edges(),
        bsccs: summarize_bsccs(model, &graph),
        verdict,
    };
    Ok((report, graph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::model::{DelayLaw, StateId};
    use proptest::prelude::*;

    fn ev(m: &GsmpModel, n: &str) -> EventId {
        m.event_id(n).unwrap()
    }

    #[test]
    fn producer_consumer_self_loops() {
        for key in ["fig1-producer-consumer", "fig2-sink", "fig2-cycled"] {
            let m = library::get_model(key).unwrap().model;
            let rel = causes_relation(&m);
            assert!(rel.contains(ev(&m, "p"), ev(&m, "p")), "{key}");
            assert!(rel.contains(ev(&m, "c"), ev(&m, "c")), "{key}");
            let v = single_ticking_check(&m);
            assert!(!v.single_ticking);
            assert_eq!(v.witness, Witness::SelfLoops(vec!["p".into(), "c".into()]));
        }
    }

    #[test]
    fn chain_order() {
        let m = library::get_model("chain-ticking").unwrap().model;
        let rel = causes_relation(&m);
        let expected: BTreeSet<_> = [("e", "e"), ("e", "f"), ("f", "g")]
            .iter()
            .map(|(a, b)| (ev(&m, a), ev(&m, b)))
            .collect();
        assert_eq!(rel.edges, expected);
        let v = single_ticking_check(&m);
        assert!(v.single_ticking);
        assert_eq!(v.ticking_event.as_deref(), Some("e"));
        assert_eq!(v.witness, Witness::Order(vec!["e".into(), "f".into(), "g".into()]));
    }

    #[test]
    fn no_fixed_events() {
        for key in ["renewal-2", "regions-demo"] {
            let m = library::get_model(key).unwrap().model;
            assert!(causes_relation(&m).edges.is_empty());
            let v = single_ticking_check(&m);
            assert!(v.single_ticking && v.ticking_event.is_none());
        }
    }

    #[test]
    fn discarding_occurrence_causes_nothing() {
        let m = GsmpModel::builder()
            .event("f", DelayLaw::fixed(1))
            .event("v", DelayLaw::uniform(0, 1))
            .state("A", &["f"])
            .state("B", &["v"])
            .succ("A", &["f"], &[("B", 1.0)])
            .succ("B", &["v"], &[("A", 1.0)])
            .init(&[("A", 1.0)])
            .build()
            .unwrap();
        assert!(causes_relation(&m).edges.is_empty());
    }

    #[test]
    fn cycle_and_caused_ticker_witnesses() {
        let cyc = GsmpModel::builder()
            .event("f", DelayLaw::fixed(1))
            .event("g", DelayLaw::fixed(2))
            .state("A", &["f"])
            .state("B", &["g"])
            .succ("A", &["f"], &[("B", 1.0)])
            .succ("B", &["g"], &[("A", 1.0)])
            .init(&[("A", 1.0)])
            .build()
            .unwrap();
        let v = single_ticking_check(&cyc);
        assert!(!v.single_ticking);
        assert_eq!(v.witness, Witness::Cycle(vec!["f".into(), "g".into()]));

        let caused = GsmpModel::builder()
            .event("e", DelayLaw::fixed(1))
            .event("f", DelayLaw::fixed(2))
            .state("A", &["f"])
            .state("B", &["e"])
            .succ("A", &["f"], &[("B", 1.0)])
            .succ("B", &["e"], &[("B", 1.0)])
            .init(&[("A", 1.0)])
            .build()
            .unwrap();
        let v = single_ticking_check(&caused);
        assert!(!v.single_ticking);
        assert_eq!(v.witness, Witness::CausedTicker(vec!["f".into(), "e".into()]));
    }

    #[test]
    fn delta_separation_examples() {
        let m = library::get_model("regions-demo").unwrap().model;
        let cfg = |a, b| Configuration::with_values(&m, StateId(0), &[(EventId(0), a), (EventId(1), b)]);
        assert!(is_delta_separated(&m, &cfg(0.2, 0.7), 0.1));
        assert!(!is_delta_separated(&m, &cfg(0.2, 0.25), 0.1));
        assert!(is_delta_separated(&m, &cfg(0.375, 2.375), 0.3));
        // wrap-around: 0.95 is 0.05 away from 0 on the circle only
        assert!(!is_delta_separated(&m, &cfg(0.5, 0.95), 0.1));
        assert!(is_delta_separated_with(&m, &cfg(0.5, 0.95), 0.1, FractionalDistance::Literal));
    }

    #[test]
    fn classification() {
        let (r, _) = classify(&library::get_model("renewal-2").unwrap().model).unwrap();
        assert!(r.guarantee);
        assert_eq!(r.bsccs.len(), 1);
        let (r, _) = classify(&library::get_model("fig1").unwrap().model).unwrap();
        assert!(!r.guarantee);
        let (r, _) = classify(&library::get_model("fig2").unwrap().model).unwrap();
        assert!(!r.guarantee);
        assert!(r.bsccs.iter().any(|b| b.states == vec!["Sink".to_string()]));
        for key in library::catalog_keys() {
            let m = library::get_model(key).unwrap().model;
            let (r, _) = classify(&m).unwrap();
            assert_eq!(r.guarantee, single_ticking_check(&m).single_ticking);
        }
    }

    #[test]
    fn accepted_verdicts_have_dag_witness() {
        for key in library::catalog_keys() {
            let m = library::get_model(key).unwrap().model;
            let v = single_ticking_check(&m);
            if !v.single_ticking {
                continue;
            }
            let rel = causes_relation(&m);
            let loops = rel.self_loops();
            assert!(loops.len() <= 1);
            if let Some(&e) = loops.first() {
                assert_eq!(v.ticking_event.as_deref(), Some(m.event_name(e)));
            }
            let Witness::Order(order) = &v.witness else { panic!() };
            let rank = |e: EventId| order.iter().position(|n| n == m.event_name(e)).unwrap();
            for &(f, g) in &rel.edges {
                assert!(rank(f) < rank(g) || (f == g && rank(f) == 0), "{key}");
            }
        }
    }

    proptest! {
        #[test]
        fn delta_separation_is_antitone(a in 0.0f64..3.0, b in 0.0f64..3.0, d in 0.001f64..0.5, k in 0.0f64..1.0) {
            let m = library::get_model("regions-demo").unwrap().model;
            let cfg = Configuration::with_values(&m, StateId(0), &[(EventId(0), a.min(0.99)), (EventId(1), b)]);
            if is_delta_separated(&m, &cfg, d) {
                prop_assert!(is_delta_separated(&m, &cfg, d * k));
            }
        }

        #[test]
        fn causes_is_monotone_in_support(extra in 0usize..4) {
            // adding a positive-probability row never removes edges
            let base = GsmpModel::builder()
                .event("e", DelayLaw::fixed(1))
                .event("f", DelayLaw::fixed(2))
                .event("v", DelayLaw::uniform(0, 1))
                .state("A", &["e", "v"])
                .state("B", &["f"])
                .state("C", &["e", "f"])
                .succ("A", &["e"], &[("B", 1.0)])
                .succ("B", &["f"], &[("A", 1.0)])
                .init(&[("A", 1.0)]);
            let before = causes_relation(&base.clone().build().unwrap());
            let rows: [(&str, &[&str], &str); 4] = [
                ("A", &["v"], "C"),
                ("C", &["e"], "A"),
                ("C", &["f"], "B"),
                ("C", &["e", "f"], "C"),
            ];
            let (s, evs, t) = rows[extra];
            let after = causes_relation(&base.succ(s, evs, &[(t, 1.0)]).build().unwrap());
            prop_assert!(before.edges.is_subset(&after.edges));
        }
    }
}

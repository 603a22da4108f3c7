use std::fmt::Write;

use indexmap::IndexMap;
use serde::Serialize;

use super::{IntPart, RegionGraph};
use crate::model::GsmpModel;

const PALETTE: [&str; 8] = [
    "#8dd3c7", "#fdb462", "#bebada", "#fb8072", "#80b1d3", "#b3de69", "#fccde5", "#ffffb3",
];

/// One region in the JSON listing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionListing {
    pub id: usize,
    pub state: String,
    /// Integral part per scheduled event, or `">B"`.
    pub ints: IndexMap<String, String>,
    pub zero: Vec<String>,
    /// Nonzero fractional blocks, ascending.
    pub order: Vec<Vec<String>>,
    pub bscc: Option<usize>,
}

pub fn region_listing(model: &GsmpModel, graph: &RegionGraph) -> Vec<RegionListing> {
    let names = |set: crate::model::EventSet| -> Vec<String> {
        set.iter().map(|e| model.event_name(e).to_string()).collect()
    };
    graph
        .regions
        .iter()
        .enumerate()
        .map(|(id, r)| RegionListing {
            id,
            state: model.state_name(r.state).to_string(),
            ints: r
                .scheduled()
                .iter()
                .map(|e| {
                    let v = match r.ints[e.0] {
                        Some(IntPart::Int(k)) => k.to_string(),
                        _ => ">B".to_string(),
                    };
                    (model.event_name(e).to_string(), v)
                })
                .collect(),
            zero: names(r.zero),
            order: r.blocks.iter().map(|b| names(*b)).collect(),
            bscc: graph.labels.bscc_of(id),
        })
        .collect()
}

/// Graphviz rendering; BSCC vertices are filled, one colour per BSCC.
pub fn to_dot(model: &GsmpModel, graph: &RegionGraph) -> String {
    let mut out = String::from("digraph regions {\n  node [shape=box, fontname=\"monospace\"];\n");
    for (id, r) in graph.regions.iter().enumerate() {
        let label = r.describe(model).replace('"', "\\\"");
        let style = match graph.labels.bscc_of(id) {
            Some(b) => format!(
                ", style=filled, fillcolor=\"{}\"",
                PALETTE[b % PALETTE.len()]
            ),
            None => String::new(),
        };
        let init = if graph.initial.contains(&id) { ", peripheries=2" } else { "" };
        writeln!(out, "  r{id} [label=\"{label}\"{style}{init}];").unwrap();
    }
    for e in &graph.edges {
        let label = e
            .events
            .iter()
            .map(|set| {
                set.iter()
                    .map(|ev| model.event_name(ev))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join(" | ");
        writeln!(out, "  r{} -> r{} [label=\"{label}\"];", e.from, e.to).unwrap();
    }
    out.push_str("}\n");
    out
}

use std::collections::{BTreeSet, HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use super::{initial_regions, successors_collecting, Region};
use crate::error::RegionError;
use crate::model::{EventSet, GsmpModel};

/// Practical limit on the number of vertices explored.
pub const DEFAULT_REGION_CAP: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Occurring sets realizing this edge.
    pub events: Vec<EventSet>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SccLabels {
    /// Strongly connected components, each sorted by vertex index.
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    /// Indices into `components` of the bottom components, in order.
    pub bottom: Vec<usize>,
    /// Period of each bottom component (gcd of its cycle lengths).
    pub periods: Vec<u64>,
}

impl SccLabels {
    pub fn bsccs(&self) -> impl Iterator<Item = &[usize]> {
        self.bottom.iter().map(|&c| self.components[c].as_slice())
    }

    pub fn num_bsccs(&self) -> usize {
        self.bottom.len()
    }

    /// Index of the BSCC containing vertex `v`, if any.
    pub fn bscc_of(&self, v: usize) -> Option<usize> {
        let c = self.component_of[v];
        self.bottom.iter().position(|&b| b == c)
    }
}

/// The reachable part of the region graph with its SCC labels.
#[derive(Clone, Debug, Serialize)]
pub struct RegionGraph {
    pub regions: Vec<Region>,
    #[serde(skip)]
    index: HashMap<Region, usize>,
    pub initial: Vec<usize>,
    pub edges: Vec<Edge>,
    /// Adjacency: successor vertices of each vertex, ascending.
    pub adjacency: Vec<Vec<usize>>,
    pub labels: SccLabels,
}

impl RegionGraph {
    pub fn num_vertices(&self) -> usize {
        self.regions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn find(&self, region: &Region) -> Option<usize> {
        self.index.get(region).copied()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Whether `v` lies in some BSCC.
    pub fn in_bscc(&self, v: usize) -> bool {
        self.labels.bscc_of(v).is_some()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.labels.components.len() == 1
    }
}

/// Upper bound on the number of regions: `|S| · (B+2)^k` integral-part
/// choices times the ordered set partitions of the `k` events together
/// with the point 0 (whose block is the zero-block). Saturating.
pub fn region_count_cap(model: &GsmpModel) -> u128 {
    let k = model.num_events() as u32;
    let b = model.bound() as u128 + 2;
    // Fubini numbers count ordered set partitions
    let mut fubini = vec![1u128; k as usize + 2];
    for n in 1..=k as usize + 1 {
        let mut total = 0u128;
        let mut binom = 1u128;
        for i in 1..=n {
            binom = binom.saturating_mul((n - i + 1) as u128) / i as u128;
            total = total.saturating_add(binom.saturating_mul(fubini[n - i]));
        }
        fubini[n] = total;
    }
    (model.num_states() as u128)
        .saturating_mul(b.saturating_pow(k))
        .saturating_mul(fubini[k as usize + 1])
}

pub fn build_region_graph(model: &GsmpModel) -> Result<RegionGraph, RegionError> {
    build_region_graph_with_cap(model, DEFAULT_REGION_CAP)
}

/// Breadth-first exploration from the initial regions.
pub fn build_region_graph_with_cap(model: &GsmpModel, cap: usize) -> Result<RegionGraph, RegionError> {
    let hard_cap = region_count_cap(model);
    let mut regions: Vec<Region> = Vec::new();
    let mut index: HashMap<Region, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut initial = Vec::new();
    for r in initial_regions(model) {
        let id = regions.len();
        index.insert(r.clone(), id);
        regions.push(r);
        initial.push(id);
        queue.push_back(id);
    }
    let mut gaps = BTreeSet::new();
    let mut labeled: Vec<Vec<(usize, EventSet)>> = Vec::new();
    while let Some(v) = queue.pop_front() {
        let succ = successors_collecting(model, &regions[v], &mut gaps);
        let mut out = Vec::with_capacity(succ.len());
        for (occurring, region) in succ {
            let id = match index.get(&region) {
                Some(&id) => id,
                None => {
                    let id = regions.len();
                    if id >= cap || id as u128 >= hard_cap {
                        return Err(RegionError::TooManyRegions {
                            cap: (cap as u128).min(hard_cap),
                        });
                    }
                    index.insert(region.clone(), id);
                    regions.push(region);
                    queue.push_back(id);
                    id
                }
            };
            out.push((id, occurring));
        }
        if labeled.len() <= v {
            labeled.resize(v + 1, Vec::new());
        }
        labeled[v] = out;
    }
    if !gaps.is_empty() {
        return Err(RegionError::MissingSuccessors(gaps.into_iter().collect()));
    }
    labeled.resize(regions.len(), Vec::new());
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); regions.len()];
    for (from, out) in labeled.into_iter().enumerate() {
        let mut by_target: std::collections::BTreeMap<usize, Vec<EventSet>> = Default::default();
        for (to, occ) in out {
            let sets = by_target.entry(to).or_default();
            if !sets.contains(&occ) {
                sets.push(occ);
            }
        }
        for (to, mut events) in by_target {
            events.sort();
            adjacency[from].push(to);
            edges.push(Edge { from, to, events });
        }
    }
    let mut graph = RegionGraph {
        regions,
        index,
        initial,
        edges,
        adjacency,
        labels: SccLabels::default(),
    };
    graph.labels = bscc_decompose(&graph);
    Ok(graph)
}

/// SCC decomposition; a component is bottom iff no edge leaves it.
pub fn bscc_decompose(graph: &RegionGraph) -> SccLabels {
    let n = graph.num_vertices();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, graph.num_edges());
    for _ in 0..n {
        g.add_node(());
    }
    for e in &graph.edges {
        g.add_edge(NodeIndex::new(e.from), NodeIndex::new(e.to), ());
    }
    let mut components: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    components.sort();
    let mut component_of = vec![0; n];
    for (i, c) in components.iter().enumerate() {
        for &v in c {
            component_of[v] = i;
        }
    }
    let bottom: Vec<usize> = (0..components.len())
        .filter(|&i| {
            components[i]
                .iter()
                .all(|&v| graph.adjacency[v].iter().all(|&w| component_of[w] == i))
        })
        .collect();
    let periods = bottom
        .iter()
        .map(|&c| component_period(graph, &components[c], &component_of, c))
        .collect();
    SccLabels {
        components,
        component_of,
        bottom,
        periods,
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of a strongly connected component from BFS levels: the gcd of
/// `level(u) + 1 − level(v)` over its internal edges.
fn component_period(graph: &RegionGraph, members: &[usize], component_of: &[usize], c: usize) -> u64 {
    let root = members[0];
    let mut level: HashMap<usize, i64> = HashMap::new();
    level.insert(root, 0);
    let mut queue = VecDeque::from([root]);
    let mut g = 0u64;
    while let Some(u) = queue.pop_front() {
        let lu = level[&u];
        for &v in &graph.adjacency[u] {
            if component_of[v] != c {
                continue;
            }
            match level.get(&v) {
                Some(&lv) => g = gcd(g, (lu + 1 - lv).unsigned_abs()),
                None => {
                    level.insert(v, lu + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::model::DelayLaw;
    use crate::model::GsmpModel;

    fn clock() -> GsmpModel {
        GsmpModel::builder()
            .event("e", DelayLaw::fixed(1))
            .state("S", &["e"])
            .succ("S", &["e"], &[("S", 1.0)])
            .init(&[("S", 1.0)])
            .build()
            .unwrap()
    }

    #[test]
    fn single_clock_is_a_cycle() {
        let g = build_region_graph(&clock()).unwrap();
        assert_eq!(g.num_vertices(), 1);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.labels.num_bsccs(), 1);
        assert_eq!(g.labels.periods, vec![1]);
    }

    #[test]
    fn dag_into_self_loop() {
        let m = GsmpModel::builder()
            .event("e", DelayLaw::fixed(1))
            .state("A", &["e"])
            .state("B", &["e"])
            .succ("A", &["e"], &[("B", 1.0)])
            .succ("B", &["e"], &[("B", 1.0)])
            .init(&[("A", 1.0)])
            .build()
            .unwrap();
        let g = build_region_graph(&m).unwrap();
        assert_eq!(g.num_vertices(), 2);
        assert_eq!(g.labels.num_bsccs(), 1);
        let bscc: Vec<&[usize]> = g.labels.bsccs().collect();
        assert_eq!(bscc[0].len(), 1);
        assert_eq!(g.regions[bscc[0][0]].state, m.state_id("B").unwrap());
    }

    #[test]
    fn two_cycle_has_period_two() {
        let m = GsmpModel::builder()
            .event("e", DelayLaw::fixed(1))
            .state("A", &["e"])
            .state("B", &["e"])
            .succ("A", &["e"], &[("B", 1.0)])
            .succ("B", &["e"], &[("A", 1.0)])
            .init(&[("A", 1.0)])
            .build()
            .unwrap();
        let g = build_region_graph(&m).unwrap();
        assert_eq!(g.labels.periods, vec![2]);
    }

    #[test]
    fn bottom_components_have_no_exit() {
        for key in library::catalog_keys() {
            let m = library::get_model(key).unwrap().model;
            let g = build_region_graph(&m).unwrap();
            let l = &g.labels;
            for (i, comp) in l.components.iter().enumerate() {
                let leaves = comp
                    .iter()
                    .any(|&v| g.adjacency[v].iter().any(|&w| l.component_of[w] != i));
                assert_eq!(!leaves, l.bottom.contains(&i), "{key}");
            }
            assert!(g.num_vertices() as u128 <= region_count_cap(&m));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let m = library::get_model("fig1-producer-consumer").unwrap().model;
        assert!(matches!(
            build_region_graph_with_cap(&m, 3),
            Err(RegionError::TooManyRegions { cap: 3 })
        ));
    }

    #[test]
    fn fubini_cap() {
        // 1 state, 2 events, B = 3: 5^2 integer choices times 13 ordered
        // partitions of {0, e, f}
        let m = library::get_model("regions-demo").unwrap().model;
        assert_eq!(region_count_cap(&m), 25 * 13);
    }
}

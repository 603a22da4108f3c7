//! The region relation and the finite region graph.
//!
//! Two configurations are equivalent when they share the control state,
//! every scheduled event agrees on its integral part (or both exceed the
//! bound `B`), and the events not beyond `B` have the same ordering of
//! fractional parts. Regions are computed exactly: from rational
//! valuations, or from `f64` valuations whose fractional parts are exact.

mod export;
mod graph;

pub use export::{region_listing, to_dot, RegionListing};
pub use graph::{
    bscc_decompose, build_region_graph, build_region_graph_with_cap, region_count_cap, Edge,
    RegionGraph, SccLabels, DEFAULT_REGION_CAP,
};

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::RegionError;
use crate::model::{EventId, EventSet, GsmpModel, Rational, StateId};
use crate::simulator::{Configuration, TICKS_PER_UNIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IntPart {
    Int(u64),
    /// Strictly greater than `B`.
    Beyond,
}

/// An equivalence class of configurations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Region {
    pub state: StateId,
    /// Per event id; `None` for unscheduled events.
    pub ints: Vec<Option<IntPart>>,
    /// Scheduled events, not beyond `B`, with integral valuation.
    pub zero: EventSet,
    /// Remaining events not beyond `B`, grouped by equal fractional part,
    /// in ascending order.
    pub blocks: Vec<EventSet>,
}

impl Region {
    pub fn int_part(&self, e: EventId) -> Option<IntPart> {
        self.ints[e.0]
    }

    pub fn scheduled(&self) -> EventSet {
        self.ints
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| EventId(i))
            .collect()
    }

    /// Readable form, e.g. `S[e = 0; 1 < f < 2; e < f]`.
    pub fn describe(&self, model: &GsmpModel) -> String {
        let mut parts = Vec::new();
        for e in self.scheduled().iter() {
            let name = model.event_name(e);
            parts.push(match self.ints[e.0] {
                Some(IntPart::Beyond) => format!("{name} > {}", model.bound()),
                Some(IntPart::Int(k)) if self.zero.contains(e) => format!("{name} = {k}"),
                Some(IntPart::Int(k)) => format!("{k} < {name} < {}", k + 1),
                None => unreachable!(),
            });
        }
        if self.blocks.len() + usize::from(!self.zero.is_empty()) > 1 {
            let mut groups: Vec<String> = Vec::new();
            if !self.zero.is_empty() {
                groups.push(names(model, self.zero).join(" = "));
            }
            for b in &self.blocks {
                groups.push(names(model, *b).join(" = "));
            }
            parts.push(format!("fr: {}", groups.join(" < ")));
        }
        format!("{}[{}]", model.state_name(self.state), parts.join("; "))
    }
}

fn names(model: &GsmpModel, set: EventSet) -> Vec<String> {
    set.iter().map(|e| model.event_name(e).to_string()).collect()
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}{:?}", self.state.0, self.ints)
    }
}

/// Exact floor / fractional-part split.
trait Value: Copy + PartialOrd {
    fn split(self) -> (i64, Self);
    fn is_zero_fraction(self) -> bool;
    fn from_bound(b: u64) -> Self;
}

impl Value for f64 {
    fn split(self) -> (i64, Self) {
        let k = self.floor();
        (k as i64, self - k)
    }
    fn is_zero_fraction(self) -> bool {
        self == 0.0
    }
    fn from_bound(b: u64) -> Self {
        b as f64
    }
}

impl Value for Rational {
    fn split(self) -> (i64, Self) {
        let k = self.floor();
        (k.to_integer(), self - k)
    }
    fn is_zero_fraction(self) -> bool {
        self.is_zero()
    }
    fn from_bound(b: u64) -> Self {
        Rational::from_integer(b as i64)
    }
}

fn classify<V: Value>(state: StateId, values: &[Option<V>], bound: u64) -> Region {
    let b = V::from_bound(bound);
    let mut ints = Vec::with_capacity(values.len());
    let mut zero = EventSet::empty();
    let mut fracs: Vec<(V, EventId)> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        ints.push(v.map(|v| {
            if v > b {
                return IntPart::Beyond;
            }
            let (k, fr) = v.split();
            if fr.is_zero_fraction() {
                zero.insert(EventId(i));
            } else {
                fracs.push((fr, EventId(i)));
            }
            IntPart::Int(k.max(0) as u64)
        }));
    }
    fracs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut blocks: Vec<EventSet> = Vec::new();
    let mut last: Option<V> = None;
    for (fr, e) in fracs {
        match (last, blocks.last_mut()) {
            (Some(l), Some(block)) if l == fr => block.insert(e),
            _ => blocks.push(EventSet::singleton(e)),
        }
        last = Some(fr);
    }
    Region {
        state,
        ints,
        zero,
        blocks,
    }
}

/// Region of a simulated configuration. Exact for valuations whose
/// fractional parts are represented without rounding (all simulator
/// output), best effort otherwise.
pub fn region_of(model: &GsmpModel, cfg: &Configuration) -> Region {
    classify(cfg.state, &cfg.valuation, model.bound())
}

/// Region of a configuration with rational valuations.
pub fn region_of_rational(model: &GsmpModel, state: StateId, valuation: &[Option<Rational>]) -> Region {
    classify(state, valuation, model.bound())
}

/// A configuration with exact rational valuations (no `ν(△)`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalConfiguration {
    pub state: StateId,
    pub valuation: Vec<Option<Rational>>,
}

impl RationalConfiguration {
    pub fn to_configuration(&self) -> Configuration {
        Configuration {
            state: self.state,
            valuation: self
                .valuation
                .iter()
                .map(|v| v.map(|r| r.to_f64().unwrap_or(f64::NAN)))
                .collect(),
            last_step: 0.0,
        }
    }
}

/// Integral parts as stated; zero-block events at fraction 0, the k-th of
/// m nonzero blocks at `k/(m+1)`, beyond-`B` events at `B + 1/2`.
pub fn canonical_representative(model: &GsmpModel, region: &Region) -> RationalConfiguration {
    let m = region.blocks.len() as i64;
    let mut valuation: Vec<Option<Rational>> = region
        .ints
        .iter()
        .map(|p| {
            p.map(|p| match p {
                IntPart::Int(k) => Rational::from_integer(k as i64),
                IntPart::Beyond => Rational::new(2 * model.bound() as i64 + 1, 2),
            })
        })
        .collect();
    for (k, block) in region.blocks.iter().enumerate() {
        let fr = Rational::new(k as i64 + 1, m + 1);
        for e in block.iter() {
            if let Some(v) = &mut valuation[e.0] {
                *v += fr;
            }
        }
    }
    RationalConfiguration {
        state: region.state,
        valuation,
    }
}

/// Draws a configuration inside `region` whose valuations lie on the
/// simulator's dyadic grid, so that `region_of` is exact on it. Fractions
/// of the nonzero blocks are drawn uniformly as sorted distinct values;
/// beyond-`B` events are placed in `(B, B + 1)`.
pub fn sample_in_region<R: Rng + ?Sized>(model: &GsmpModel, region: &Region, rng: &mut R) -> Configuration {
    const GRID: u64 = 1 << 20;
    let m = region.blocks.len();
    let mut fracs: BTreeSet<u64> = BTreeSet::new();
    while fracs.len() < m {
        fracs.insert(rng.random_range(1..GRID));
    }
    let fracs: Vec<f64> = fracs.into_iter().map(|k| k as f64 / GRID as f64).collect();
    let mut valuation: Vec<Option<f64>> = region
        .ints
        .iter()
        .map(|p| {
            p.map(|p| match p {
                IntPart::Int(k) => k as f64,
                IntPart::Beyond => {
                    let k: u64 = rng.random_range(1..GRID);
                    model.bound() as f64 + k as f64 / GRID as f64
                }
            })
        })
        .collect();
    for (block, fr) in region.blocks.iter().zip(&fracs) {
        for e in block.iter() {
            if let Some(v) = &mut valuation[e.0] {
                *v += fr;
            }
        }
    }
    debug_assert!(fracs.iter().all(|f| (f * TICKS_PER_UNIT).fract() == 0.0));
    Configuration {
        state: region.state,
        valuation,
        last_step: 0.0,
    }
}

/// Candidate firing times from `cfg`: midpoints of the open windows
/// between consecutive integer crossings (up to the fixed deadline), and
/// the deadline itself when there is one.
fn candidate_times(model: &GsmpModel, cfg: &RationalConfiguration) -> (Vec<Rational>, Option<Rational>) {
    let bound = Rational::from_integer(model.bound() as i64);
    let sched = model.scheduled(cfg.state);
    let mut deadline: Option<Rational> = None;
    for e in sched.iter() {
        let law = &model.event(e).law;
        if law.is_fixed() {
            let rem = law.lower - cfg.valuation[e.0].unwrap_or_else(Rational::zero);
            deadline = Some(deadline.map_or(rem, |d| d.min(rem)));
        }
    }
    let mut crossings: BTreeSet<Rational> = BTreeSet::new();
    crossings.insert(Rational::zero());
    for e in sched.iter() {
        let v = cfg.valuation[e.0].unwrap_or_else(Rational::zero);
        if v > bound {
            continue;
        }
        let mut k = v.floor() + Rational::from_integer(1);
        while k <= bound {
            let t = k - v;
            if deadline.is_some_and(|d| t > d) {
                break;
            }
            crossings.insert(t);
            k += Rational::from_integer(1);
        }
    }
    if let Some(d) = deadline {
        crossings.insert(d);
    }
    let points: Vec<Rational> = crossings.into_iter().collect();
    let mut times: Vec<Rational> = points
        .windows(2)
        .map(|w| (w[0] + w[1]) / Rational::from_integer(2))
        .collect();
    if deadline.is_none() {
        times.push(*points.last().unwrap() + Rational::new(1, 2));
    }
    (times, deadline)
}

/// Occurring sets and dwell witnesses with positive probability from `cfg`.
fn eligible_occurrences(model: &GsmpModel, cfg: &RationalConfiguration) -> Vec<(EventSet, Rational)> {
    let sched = model.scheduled(cfg.state);
    let variable = sched.intersection(model.variable_events());
    let (times, deadline) = candidate_times(model, cfg);
    let val = |e: EventId| cfg.valuation[e.0].unwrap_or_else(Rational::zero);
    let survives = |c: EventId, t: Rational| match model.event(c).law.upper.finite() {
        Some(u) => val(c) + t < u,
        None => true,
    };
    let mut out = Vec::new();
    for t in times {
        for e in variable.iter() {
            let law = &model.event(e).law;
            let x = val(e) + t;
            let in_support = x > law.lower && law.upper.finite().is_none_or(|u| x < u);
            if in_support && variable.iter().all(|c| c == e || survives(c, t)) {
                out.push((EventSet::singleton(e), t));
            }
        }
    }
    if let Some(d) = deadline {
        if variable.iter().all(|c| survives(c, d)) {
            let first: EventSet = sched
                .difference(variable)
                .iter()
                .filter(|&e| model.event(e).law.lower - val(e) == d)
                .collect();
            out.push((first, d));
        }
    }
    out
}

/// All one-step successor regions of `region`, with the occurring set.
pub fn successor_regions(model: &GsmpModel, region: &Region) -> Result<Vec<(EventSet, Region)>, RegionError> {
    let mut gaps = BTreeSet::new();
    let out = successors_collecting(model, region, &mut gaps);
    if gaps.is_empty() {
        Ok(out)
    } else {
        Err(RegionError::MissingSuccessors(gaps.into_iter().collect()))
    }
}

pub(crate) fn successors_collecting(
    model: &GsmpModel,
    region: &Region,
    gaps: &mut BTreeSet<String>,
) -> Vec<(EventSet, Region)> {
    let cfg = canonical_representative(model, region);
    let mut found: BTreeSet<(EventSet, Region)> = BTreeSet::new();
    for (occurring, t) in eligible_occurrences(model, &cfg) {
        let Some(targets) = model.succ(cfg.state, occurring) else {
            gaps.insert(format!(
                "{} on {{{}}}",
                model.state_name(cfg.state),
                names(model, occurring).join(", ")
            ));
            continue;
        };
        for &(to, p) in targets {
            if p <= 0.0 {
                continue;
            }
            let fates = model.fates(cfg.state, occurring, to);
            let next: Vec<Option<Rational>> = model
                .event_ids()
                .map(|e| {
                    if fates.new.contains(e) {
                        Some(Rational::zero())
                    } else if fates.inherited.contains(e) {
                        cfg.valuation[e.0].map(|v| v + t)
                    } else {
                        None
                    }
                })
                .collect();
            found.insert((occurring, region_of_rational(model, to, &next)));
        }
    }
    found.into_iter().collect()
}

/// Regions holding the initial configurations (zero valuation).
pub fn initial_regions(model: &GsmpModel) -> Vec<Region> {
    let mut out: BTreeSet<Region> = BTreeSet::new();
    for &(s, p) in model.init() {
        if p > 0.0 {
            out.insert(region_of(model, &Configuration::zero(model, s)));
        }
    }
    out.into_iter().collect()
}

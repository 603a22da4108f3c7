//! GSMP models: states, events with their delay laws, the scheduling map
//! `E(s)`, the successor table `Succ(s, E)` and the initial distribution.
//!
//! A [`GsmpModel`] is an immutable value. It is built through
//! [`GsmpModelBuilder`], which only resolves names; semantic invariants are
//! checked by [`validate_model`], which reports violations as data.

use std::collections::HashSet;
use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Exact rational used for bounds and region arithmetic.
pub type Rational = Ratio<i64>;

/// Tolerance on the total mass of input distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Events are stored in a 64-bit mask.
pub const MAX_EVENTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventId(pub usize);

/// A set of events, as a bitmask over event ids.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventSet(u64);

impl EventSet {
    pub const fn empty() -> Self {
        EventSet(0)
    }

    pub fn singleton(e: EventId) -> Self {
        EventSet(1 << e.0)
    }

    pub fn from_bits(bits: u64) -> Self {
        EventSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn insert(&mut self, e: EventId) {
        self.0 |= 1 << e.0;
    }

    pub fn contains(self, e: EventId) -> bool {
        self.0 & (1 << e.0) != 0
    }

    pub fn union(self, other: Self) -> Self {
        EventSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        EventSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        EventSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Events in ascending id order.
    pub fn iter(self) -> impl Iterator<Item = EventId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(EventId(i))
            }
        })
    }
}

impl FromIterator<EventId> for EventSet {
    fn from_iter<I: IntoIterator<Item = EventId>>(iter: I) -> Self {
        let mut s = EventSet::empty();
        for e in iter {
            s.insert(e);
        }
        s
    }
}

impl fmt::Debug for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|e| e.0)).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayKind {
    Fixed,
    Uniform,
    ShiftedExponential,
}

impl fmt::Display for DelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DelayKind::Fixed => "fixed",
            DelayKind::Uniform => "uniform",
            DelayKind::ShiftedExponential => "shifted-exponential",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpperBound {
    Finite(Rational),
    Infinite,
}

impl UpperBound {
    pub fn to_f64(self) -> f64 {
        match self {
            UpperBound::Finite(r) => r.to_f64().unwrap_or(f64::INFINITY),
            UpperBound::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<Rational> {
        match self {
            UpperBound::Finite(r) => Some(r),
            UpperBound::Infinite => None,
        }
    }
}

impl fmt::Display for UpperBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpperBound::Finite(r) => write!(f, "{r}"),
            UpperBound::Infinite => f.write_str("inf"),
        }
    }
}

/// Delay distribution of an event. Bounds are exact rationals; the
/// supported families only admit integer bounds once validated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayLaw {
    pub kind: DelayKind,
    pub lower: Rational,
    pub upper: UpperBound,
    /// Only meaningful for [`DelayKind::ShiftedExponential`].
    pub rate: Option<f64>,
}

impl DelayLaw {
    pub fn fixed(delay: i64) -> Self {
        DelayLaw {
            kind: DelayKind::Fixed,
            lower: Rational::from_integer(delay),
            upper: UpperBound::Finite(Rational::from_integer(delay)),
            rate: None,
        }
    }

    pub fn uniform(lower: i64, upper: i64) -> Self {
        DelayLaw {
            kind: DelayKind::Uniform,
            lower: Rational::from_integer(lower),
            upper: UpperBound::Finite(Rational::from_integer(upper)),
            rate: None,
        }
    }

    pub fn shifted_exponential(lower: i64, rate: f64) -> Self {
        DelayLaw {
            kind: DelayKind::ShiftedExponential,
            lower: Rational::from_integer(lower),
            upper: UpperBound::Infinite,
            rate: Some(rate),
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.kind == DelayKind::Fixed
    }

    pub fn lower_f64(&self) -> f64 {
        self.lower.to_f64().unwrap_or(0.0)
    }

    pub fn upper_f64(&self) -> f64 {
        self.upper.to_f64()
    }

    pub fn rate_f64(&self) -> f64 {
        self.rate.unwrap_or(f64::NAN)
    }

    /// Invariant breaches of this law alone.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lower < Rational::zero() {
            out.push(format!("lower bound {} is negative", self.lower));
        }
        if !self.lower.is_integer() {
            out.push(format!("lower bound {} is not an integer", self.lower));
        }
        if let UpperBound::Finite(u) = self.upper {
            if !u.is_integer() {
                out.push(format!("upper bound {u} is not an integer"));
            }
        }
        match self.kind {
            DelayKind::Fixed => {
                if self.upper != UpperBound::Finite(self.lower) {
                    out.push(format!(
                        "fixed delay needs lower = upper (got {} and {})",
                        self.lower, self.upper
                    ));
                }
                if self.lower <= Rational::zero() {
                    out.push("fixed delay must be a positive integer".to_string());
                }
            }
            DelayKind::Uniform => match self.upper {
                UpperBound::Finite(u) if self.lower < u => {}
                UpperBound::Finite(u) => out.push(format!(
                    "uniform delay needs lower < upper (got {} and {u})",
                    self.lower
                )),
                UpperBound::Infinite => out.push("uniform delay needs a finite upper bound".into()),
            },
            DelayKind::ShiftedExponential => {
                if self.upper != UpperBound::Infinite {
                    out.push("shifted-exponential delay needs upper = inf".into());
                }
                match self.rate {
                    Some(r) if r > 0.0 && r.is_finite() => {}
                    Some(r) => out.push(format!("rate {r} must be positive and finite")),
                    None => out.push("shifted-exponential delay needs a rate".into()),
                }
            }
        }
        if self.kind != DelayKind::ShiftedExponential && self.rate.is_some() {
            out.push(format!("rate given for a {} delay", self.kind));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventSpec {
    pub name: String,
    pub law: DelayLaw,
}

impl EventSpec {
    pub fn is_fixed(&self) -> bool {
        self.law.is_fixed()
    }
}

/// One row of the successor table: `Succ(state, events)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccRow {
    pub state: StateId,
    pub events: EventSet,
    pub targets: Vec<(StateId, f64)>,
}

/// What happens to each event on a transition `s --E--> s'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fates {
    /// Scheduled in `s` but not in `s'`: discarded.
    pub old: EventSet,
    /// Scheduled in both, not occurring: keeps its elapsed time.
    pub inherited: EventSet,
    /// Newly scheduled in `s'`: elapsed time reset to zero.
    pub new: EventSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GsmpModel {
    states: Vec<String>,
    events: Vec<EventSpec>,
    scheduled: Vec<EventSet>,
    succ: Vec<SuccRow>,
    init: Vec<(StateId, f64)>,
    // per state: (event set, row index)
    succ_index: Vec<Vec<(EventSet, usize)>>,
}

impl GsmpModel {
    pub fn builder() -> GsmpModelBuilder {
        GsmpModelBuilder::default()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn events(&self) -> &[EventSpec] {
        &self.events
    }

    pub fn succ_rows(&self) -> &[SuccRow] {
        &self.succ
    }

    pub fn init(&self) -> &[(StateId, f64)] {
        &self.init
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0]
    }

    pub fn event(&self, e: EventId) -> &EventSpec {
        &self.events[e.0]
    }

    pub fn event_name(&self, e: EventId) -> &str {
        &self.events[e.0].name
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(StateId)
    }

    pub fn event_id(&self, name: &str) -> Option<EventId> {
        self.events.iter().position(|e| e.name == name).map(EventId)
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len()).map(StateId)
    }

    pub fn event_ids(&self) -> impl Iterator<Item = EventId> {
        (0..self.events.len()).map(EventId)
    }

    /// `E(s)`.
    pub fn scheduled(&self, s: StateId) -> EventSet {
        self.scheduled[s.0]
    }

    pub fn fixed_events(&self) -> EventSet {
        self.event_ids().filter(|&e| self.event(e).is_fixed()).collect()
    }

    pub fn variable_events(&self) -> EventSet {
        self.event_ids().filter(|&e| !self.event(e).is_fixed()).collect()
    }

    /// `Succ(s, E)`, if the row is specified.
    pub fn succ(&self, s: StateId, occurring: EventSet) -> Option<&[(StateId, f64)]> {
        self.succ_index[s.0]
            .iter()
            .find(|(set, _)| *set == occurring)
            .map(|&(_, row)| self.succ[row].targets.as_slice())
    }

    /// The bound `B`: largest finite lower or upper bound over all events.
    pub fn bound(&self) -> u64 {
        self.events
            .iter()
            .flat_map(|e| [Some(e.law.lower), e.law.upper.finite()])
            .flatten()
            .map(|r| r.to_integer().max(0) as u64)
            .max()
            .unwrap_or(0)
    }

    /// Old / inherited / new classification for a transition `from --occurring--> to`.
    pub fn fates(&self, from: StateId, occurring: EventSet, to: StateId) -> Fates {
        let before = self.scheduled(from);
        let after = self.scheduled(to);
        Fates {
            old: before.difference(after),
            inherited: after.intersection(before).difference(occurring),
            new: after.difference(before).union(after.intersection(occurring)),
        }
    }

    /// Validates and renormalizes every distribution.
    pub fn validated(mut self) -> Result<Self, ValidationReport> {
        let report = validate_model(&self);
        if !report.is_valid() {
            return Err(report);
        }
        for row in &mut self.succ {
            normalize(&mut row.targets);
        }
        normalize(&mut self.init);
        Ok(self)
    }
}

fn normalize(dist: &mut [(StateId, f64)]) {
    let total: f64 = dist.iter().map(|(_, p)| p).sum();
    for (_, p) in dist.iter_mut() {
        *p /= total;
    }
}

/// Builds a model from names. Name resolution errors are returned here;
/// semantic checks are left to [`validate_model`].
#[derive(Default, Debug, Clone)]
pub struct GsmpModelBuilder {
    states: Vec<(String, Vec<String>)>,
    events: Vec<EventSpec>,
    succ: Vec<(String, Vec<String>, Vec<(String, f64)>)>,
    init: Vec<(String, f64)>,
}

impl GsmpModelBuilder {
    pub fn event(mut self, name: &str, law: DelayLaw) -> Self {
        self.events.push(EventSpec {
            name: name.to_string(),
            law,
        });
        self
    }

    pub fn state(mut self, name: &str, scheduled: &[&str]) -> Self {
        self.states.push((
            name.to_string(),
            scheduled.iter().map(|s| s.to_string()).collect(),
        ));
        self
    }

    pub fn succ(mut self, state: &str, events: &[&str], targets: &[(&str, f64)]) -> Self {
        self.succ.push((
            state.to_string(),
            events.iter().map(|s| s.to_string()).collect(),
            targets.iter().map(|(s, p)| (s.to_string(), *p)).collect(),
        ));
        self
    }

    pub fn init(mut self, dist: &[(&str, f64)]) -> Self {
        self.init = dist.iter().map(|(s, p)| (s.to_string(), *p)).collect();
        self
    }

    pub fn build(self) -> Result<GsmpModel, ModelError> {
        if self.events.len() > MAX_EVENTS {
            return Err(ModelError::TooManyEvents(self.events.len()));
        }
        let states: Vec<String> = self.states.iter().map(|(n, _)| n.clone()).collect();
        let state_id = |name: &str| {
            states
                .iter()
                .position(|s| s == name)
                .map(StateId)
                .ok_or_else(|| ModelError::UnknownState(name.to_string()))
        };
        let event_id = |name: &str| {
            self.events
                .iter()
                .position(|e| e.name == name)
                .map(EventId)
                .ok_or_else(|| ModelError::UnknownEvent(name.to_string()))
        };
        let mut scheduled = Vec::with_capacity(states.len());
        for (_, evs) in &self.states {
            let mut set = EventSet::empty();
            for e in evs {
                set.insert(event_id(e)?);
            }
            scheduled.push(set);
        }
        let mut succ = Vec::with_capacity(self.succ.len());
        for (s, evs, targets) in &self.succ {
            let mut set = EventSet::empty();
            for e in evs {
                set.insert(event_id(e)?);
            }
            let targets = targets
                .iter()
                .map(|(t, p)| Ok((state_id(t)?, *p)))
                .collect::<Result<Vec<_>, ModelError>>()?;
            succ.push(SuccRow {
                state: state_id(s)?,
                events: set,
                targets,
            });
        }
        let init = self
            .init
            .iter()
            .map(|(s, p)| Ok((state_id(s)?, *p)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        let mut succ_index = vec![Vec::new(); states.len()];
        for (i, row) in succ.iter().enumerate() {
            succ_index[row.state.0].push((row.events, i));
        }
        Ok(GsmpModel {
            states,
            events: self.events,
            scheduled,
            succ,
            init,
            succ_index,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    InvalidLaw { event: String, reason: String },
    DuplicateEvent { event: String },
    DuplicateState { state: String },
    EmptySchedulingSet { state: String },
    NotNormalized { what: String, total: f64 },
    NegativeProbability { what: String },
    EmptyOccurringSet { state: String },
    UnscheduledOccurrence { state: String, event: String },
    ImpossibleOccurrence { state: String, events: Vec<String> },
    DuplicateSuccRow { state: String, events: Vec<String> },
    NoStates,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidLaw { event, reason } => write!(f, "event {event}: {reason}"),
            Violation::DuplicateEvent { event } => write!(f, "duplicate event name {event}"),
            Violation::DuplicateState { state } => write!(f, "duplicate state name {state}"),
            Violation::EmptySchedulingSet { state } => {
                write!(f, "state {state}: empty scheduling set")
            }
            Violation::NotNormalized { what, total } => {
                write!(f, "{what}: distribution not normalized (sums to {total})")
            }
            Violation::NegativeProbability { what } => write!(f, "{what}: negative probability"),
            Violation::EmptyOccurringSet { state } => {
                write!(f, "state {state}: successor row with empty event set")
            }
            Violation::UnscheduledOccurrence { state, event } => {
                write!(f, "state {state}: successor row uses unscheduled event {event}")
            }
            Violation::ImpossibleOccurrence { state, events } => write!(
                f,
                "state {state}: events {{{}}} can never occur together",
                events.join(", ")
            ),
            Violation::DuplicateSuccRow { state, events } => write!(
                f,
                "state {state}: duplicate successor row for {{{}}}",
                events.join(", ")
            ),
            Violation::NoStates => f.write_str("model has no states"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every model invariant. Pure: the model is not touched.
pub fn validate_model(model: &GsmpModel) -> ValidationReport {
    let mut violations = Vec::new();
    if model.states.is_empty() {
        violations.push(Violation::NoStates);
    }
    let mut seen = HashSet::new();
    for ev in &model.events {
        if !seen.insert(ev.name.as_str()) {
            violations.push(Violation::DuplicateEvent {
                event: ev.name.clone(),
            });
        }
        for reason in ev.law.violations() {
            violations.push(Violation::InvalidLaw {
                event: ev.name.clone(),
                reason,
            });
        }
    }
    let mut seen = HashSet::new();
    for (i, name) in model.states.iter().enumerate() {
        if !seen.insert(name.as_str()) {
            violations.push(Violation::DuplicateState {
                state: name.clone(),
            });
        }
        if model.scheduled[i].is_empty() {
            violations.push(Violation::EmptySchedulingSet {
                state: name.clone(),
            });
        }
    }
    let names = |set: EventSet| -> Vec<String> {
        set.iter().map(|e| model.event_name(e).to_string()).collect()
    };
    let mut rows_seen = HashSet::new();
    for row in &model.succ {
        let state = model.state_name(row.state).to_string();
        if !rows_seen.insert((row.state, row.events)) {
            violations.push(Violation::DuplicateSuccRow {
                state: state.clone(),
                events: names(row.events),
            });
        }
        if row.events.is_empty() {
            violations.push(Violation::EmptyOccurringSet {
                state: state.clone(),
            });
        }
        for e in row.events.difference(model.scheduled(row.state)).iter() {
            violations.push(Violation::UnscheduledOccurrence {
                state: state.clone(),
                event: model.event_name(e).to_string(),
            });
        }
        // Variable events occur alone; fixed events only together with fixed events.
        let variable = row.events.intersection(model.variable_events());
        if variable.len() > 1 || (variable.len() == 1 && row.events.len() > 1) {
            violations.push(Violation::ImpossibleOccurrence {
                state: state.clone(),
                events: names(row.events),
            });
        }
        let what = format!("succ({state}, {{{}}})", names(row.events).join(", "));
        check_distribution(&row.targets, &what, &mut violations);
    }
    check_distribution(&model.init, "init", &mut violations);
    ValidationReport { violations }
}

fn check_distribution(dist: &[(StateId, f64)], what: &str, out: &mut Vec<Violation>) {
    if dist.iter().any(|(_, p)| *p < 0.0 || !p.is_finite()) {
        out.push(Violation::NegativeProbability {
            what: what.to_string(),
        });
    }
    let total: f64 = dist.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        out.push(Violation::NotNormalized {
            what: what.to_string(),
            total,
        });
    }
}

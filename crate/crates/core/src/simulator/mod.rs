//! Sampling the one-step transition kernel of the configuration chain and
//! accumulating the discrete (`d`) and timed (`c`) frequency statistics.
//!
//! Variable-delay draws are rounded to a dyadic grid of `2^-32` time units
//! (strictly inside the residual support). With integer delay bounds every
//! valuation then stays a dyadic rational, so valuation arithmetic in `f64`
//! is exact and region classification of simulated configurations never
//! suffers from rounding.

mod export;
mod phases;

pub use export::{write_checkpoints_csv, write_trace_csv, TraceWriter};
pub use phases::{phase_tracker, Phase, PhaseSpec, PhaseTracker};

use rand::Rng;
use serde::Serialize;

use crate::delay;
use crate::error::SimError;
use crate::model::{EventId, EventSet, GsmpModel, StateId};

/// Resolution of simulated variable delays.
pub const TICKS_PER_UNIT: f64 = 4_294_967_296.0;

/// `(s, ν)` together with `ν(△)`, the dwell time of the previous step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Configuration {
    pub state: StateId,
    /// Elapsed time per event id; `None` is the unscheduled marker.
    pub valuation: Vec<Option<f64>>,
    pub last_step: f64,
}

impl Configuration {
    /// Zero valuation for every event scheduled in `state`.
    pub fn zero(model: &GsmpModel, state: StateId) -> Self {
        let sched = model.scheduled(state);
        Configuration {
            state,
            valuation: model
                .event_ids()
                .map(|e| sched.contains(e).then_some(0.0))
                .collect(),
            last_step: 0.0,
        }
    }

    pub fn value(&self, e: EventId) -> Option<f64> {
        self.valuation[e.0]
    }

    /// Builds a configuration from named valuations; unnamed scheduled
    /// events get zero.
    pub fn with_values(model: &GsmpModel, state: StateId, values: &[(EventId, f64)]) -> Self {
        let mut cfg = Configuration::zero(model, state);
        for &(e, v) in values {
            cfg.valuation[e.0] = Some(v);
        }
        cfg
    }

    /// Checks `ν(e) ≠ ⊥ iff e ∈ E(s)` and the upper-bound invariants.
    pub fn is_consistent(&self, model: &GsmpModel) -> bool {
        let sched = model.scheduled(self.state);
        model.event_ids().all(|e| match self.valuation[e.0] {
            None => !sched.contains(e),
            Some(v) => {
                let law = &model.event(e).law;
                sched.contains(e)
                    && v >= 0.0
                    && if law.is_fixed() {
                        v <= law.upper_f64()
                    } else {
                        v < law.upper_f64()
                    }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepOutcome {
    pub occurring: EventSet,
    pub dwell: f64,
    pub next: Configuration,
}

/// Draws the initial state from `α₀`; all scheduled events start at zero.
pub fn initial_configuration<R: Rng + ?Sized>(model: &GsmpModel, rng: &mut R) -> Configuration {
    let q: f64 = rng.random();
    let state = pick(model.init(), q);
    Configuration::zero(model, state)
}

fn pick(dist: &[(StateId, f64)], q: f64) -> StateId {
    let mut acc = 0.0;
    for &(s, p) in dist {
        acc += p;
        if q < acc {
            return s;
        }
    }
    dist.iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .map(|&(s, _)| s)
        .unwrap_or(dist[0].0)
}

#[inline]
fn quantize_within(x: f64, lo: f64, hi: f64) -> f64 {
    let mut k = (x * TICKS_PER_UNIT).round();
    let lo_k = (lo * TICKS_PER_UNIT).floor() + 1.0;
    let hi_k = (hi * TICKS_PER_UNIT).ceil() - 1.0;
    if k < lo_k {
        k = lo_k;
    }
    if hi_k >= lo_k && k > hi_k {
        k = hi_k;
    }
    k / TICKS_PER_UNIT
}

/// Which events win the timing race from `cfg`, and after how long.
#[inline]
fn race<R: Rng + ?Sized>(
    model: &GsmpModel,
    cfg: &Configuration,
    rng: &mut R,
) -> Result<(EventSet, f64), SimError> {
    let sched = model.scheduled(cfg.state);
    let mut deadline = f64::INFINITY;
    let mut first_fixed = EventSet::empty();
    let mut best = f64::INFINITY;
    let mut winner: Option<EventId> = None;
    for e in sched.iter() {
        let spec = model.event(e);
        let elapsed = cfg.valuation[e.0].unwrap_or(0.0);
        if spec.is_fixed() {
            let rem = spec.law.upper_f64() - elapsed;
            if rem < deadline {
                deadline = rem;
                first_fixed = EventSet::singleton(e);
            } else if rem == deadline {
                first_fixed.insert(e);
            }
        } else {
            let q: f64 = rng.random();
            if elapsed >= spec.law.upper_f64() {
                return Err(crate::error::DelayError::Overdue {
                    elapsed,
                    upper: spec.law.upper_f64(),
                }
                .into());
            }
            let (lo, hi) = delay::support_unchecked(&spec.law, elapsed);
            let draw = quantize_within(delay::quantile_unchecked(&spec.law, elapsed, q), lo, hi);
            let better = match winner {
                None => true,
                Some(w) => draw < best || (draw == best && spec.name < model.event(w).name),
            };
            if better {
                best = draw;
                winner = Some(e);
            }
        }
    }
    match winner {
        // a variable draw equal to the fixed deadline loses to the fixed set
        Some(e) if best < deadline => Ok((EventSet::singleton(e), best)),
        _ if deadline.is_finite() => Ok((first_fixed, deadline)),
        _ => Err(SimError::Deadlock(model.state_name(cfg.state).to_string())),
    }
}

/// One kernel step applied in place; returns the occurring set and dwell.
pub fn step_in_place<R: Rng + ?Sized>(
    model: &GsmpModel,
    cfg: &mut Configuration,
    rng: &mut R,
) -> Result<(EventSet, f64), SimError> {
    let from = cfg.state;
    let (occurring, dwell) = race(model, cfg, rng)?;
    let targets = model
        .succ(from, occurring)
        .ok_or_else(|| SimError::UnspecifiedSuccessor {
            state: model.state_name(from).to_string(),
            events: occurring
                .iter()
                .map(|e| model.event_name(e))
                .collect::<Vec<_>>()
                .join(", "),
        })?;
    let q: f64 = rng.random();
    let to = pick(targets, q);
    let fates = model.fates(from, occurring, to);
    for e in model.event_ids() {
        let slot = &mut cfg.valuation[e.0];
        *slot = if fates.new.contains(e) {
            Some(0.0)
        } else if fates.inherited.contains(e) {
            slot.map(|v| v + dwell)
        } else {
            None
        };
    }
    cfg.state = to;
    cfg.last_step = dwell;
    Ok((occurring, dwell))
}

/// Samples one step of the kernel `P(cfg, ·)`.
pub fn step<R: Rng + ?Sized>(
    model: &GsmpModel,
    cfg: &Configuration,
    rng: &mut R,
) -> Result<StepOutcome, SimError> {
    let mut next = cfg.clone();
    let (occurring, dwell) = step_in_place(model, &mut next, rng)?;
    Ok(StepOutcome {
        occurring,
        dwell,
        next,
    })
}

/// `fr(ν(f) − ν(e))` taken in `[0, 1)`.
pub fn event_distance(
    model: &GsmpModel,
    cfg: &Configuration,
    e: EventId,
    f: EventId,
) -> Result<f64, SimError> {
    let ve = cfg
        .value(e)
        .ok_or_else(|| SimError::Unscheduled(model.event_name(e).to_string()))?;
    let vf = cfg
        .value(f)
        .ok_or_else(|| SimError::Unscheduled(model.event_name(f).to_string()))?;
    Ok(fractional_distance(ve, vf))
}

pub(crate) fn fractional_distance(ve: f64, vf: f64) -> f64 {
    let d = (vf - ve).rem_euclid(1.0);
    if d >= 1.0 {
        0.0
    } else {
        d
    }
}

/// Set of designated states whose frequency is measured.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TargetSet {
    members: Vec<bool>,
}

impl TargetSet {
    pub fn new(model: &GsmpModel, states: &[StateId]) -> Self {
        let mut members = vec![false; model.num_states()];
        for s in states {
            members[s.0] = true;
        }
        TargetSet { members }
    }

    pub fn single(model: &GsmpModel, s: StateId) -> Self {
        Self::new(model, &[s])
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.members[s.0]
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| StateId(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Steps(u64),
    Time(f64),
}

/// When to record partial ratios.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum CheckpointSchedule {
    /// Powers of two, plus the final step.
    #[default]
    Geometric,
    Every(u64),
    At(Vec<u64>),
}

impl CheckpointSchedule {
    fn is_checkpoint(&self, step: u64) -> bool {
        match self {
            CheckpointSchedule::Geometric => step.is_power_of_two(),
            CheckpointSchedule::Every(k) => *k > 0 && step % k == 0,
            CheckpointSchedule::At(steps) => steps.binary_search(&step).is_ok(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub step: u64,
    pub partial_d: f64,
    pub partial_c: f64,
}

/// Partial sums of a run. Step `i` leaves state `s_i` after dwell
/// `ν_{i+1}(△)`; the visit and the dwell are both credited to `s_i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: u64,
    pub transitions_into_target: u64,
    pub time_total: f64,
    pub time_in_target: f64,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunStats {
    pub fn partial_d(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.transitions_into_target as f64 / self.steps as f64
        }
    }

    pub fn partial_c(&self) -> f64 {
        if self.time_total > 0.0 {
            (self.time_in_target / self.time_total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    fn record(&mut self, left: StateId, dwell: f64, target: &TargetSet) {
        self.steps += 1;
        self.time_total += dwell;
        if target.contains(left) {
            self.transitions_into_target += 1;
            self.time_in_target += dwell;
        }
    }

    fn checkpoint(&mut self) {
        if self.checkpoints.last().map(|c| c.step) != Some(self.steps) {
            self.checkpoints.push(Checkpoint {
                step: self.steps,
                partial_d: self.partial_d(),
                partial_c: self.partial_c(),
            });
        }
    }

    pub fn partial_d_series(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.partial_d).collect()
    }

    pub fn partial_c_series(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.partial_c).collect()
    }
}

/// Runs the chain from `start` until the budget is spent. `observe` sees
/// every configuration entered (not the start), with the occurring set.
#[allow(clippy::too_many_arguments)]
pub fn simulate_from<R, F>(
    model: &GsmpModel,
    start: Configuration,
    budget: Budget,
    target: &TargetSet,
    schedule: &CheckpointSchedule,
    rng: &mut R,
    mut observe: F,
) -> Result<(RunStats, Configuration), SimError>
where
    R: Rng + ?Sized,
    F: FnMut(u64, EventSet, &Configuration),
{
    let mut cfg = start;
    let mut stats = RunStats::default();
    loop {
        let done = match budget {
            Budget::Steps(n) => stats.steps >= n,
            Budget::Time(t) => stats.time_total >= t,
        };
        if done {
            break;
        }
        let left = cfg.state;
        let (occurring, dwell) = step_in_place(model, &mut cfg, rng)?;
        stats.record(left, dwell, target);
        observe(stats.steps, occurring, &cfg);
        if schedule.is_checkpoint(stats.steps) {
            stats.checkpoint();
        }
    }
    stats.checkpoint();
    Ok((stats, cfg))
}

/// Simulates one run from the initial distribution.
pub fn simulate_run<R: Rng + ?Sized>(
    model: &GsmpModel,
    budget: Budget,
    target: &TargetSet,
    schedule: &CheckpointSchedule,
    rng: &mut R,
) -> Result<(RunStats, Configuration), SimError> {
    let start = initial_configuration(model, rng);
    simulate_from(model, start, budget, target, schedule, rng, |_, _, _| {})
}

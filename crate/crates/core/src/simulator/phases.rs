//! Phase bookkeeping for the producer-consumer counterexamples.
//!
//! A phase runs from one visit of an entry state to the next. Its length is
//! counted in attempts (passes through the attempt cycle) and it carries
//! the distance between two designated events, taken at the first
//! configuration of the phase where both are scheduled.

use serde::Serialize;

use super::{fractional_distance, Configuration};
use crate::model::{EventId, GsmpModel, StateId};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSpec {
    pub entry: Vec<StateId>,
    /// Steps per attempt.
    pub attempt_len: u64,
    /// Distance is `fr(ν(pair.1) − ν(pair.0))`.
    pub pair: (EventId, EventId),
}

impl PhaseSpec {
    /// Phases start at every state whose name ends in `C-waiting`; the
    /// distance is the one between `p` and `c`; an attempt is three steps.
    pub fn producer_consumer(model: &GsmpModel) -> Option<Self> {
        let entry: Vec<StateId> = model
            .state_ids()
            .filter(|&s| model.state_name(s).ends_with("C-waiting"))
            .collect();
        if entry.is_empty() {
            return None;
        }
        Some(PhaseSpec {
            entry,
            attempt_len: 3,
            pair: (model.event_id("p")?, model.event_id("c")?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Phase {
    pub start_step: u64,
    pub steps: u64,
    pub attempts: u64,
    pub start_distance: Option<f64>,
    /// Whether the distance at the next phase start is at most half of
    /// this one; unknown for the last phase.
    pub strong: Option<bool>,
    /// False for a phase cut off by the end of the trace.
    pub complete: bool,
}

/// Incremental segmentation of a trace into phases.
#[derive(Clone, Debug)]
pub struct PhaseTracker {
    spec: PhaseSpec,
    phases: Vec<Phase>,
    open: Option<Phase>,
    last_step: u64,
}

impl PhaseTracker {
    pub fn new(spec: PhaseSpec) -> Self {
        PhaseTracker {
            spec,
            phases: Vec::new(),
            open: None,
            last_step: 0,
        }
    }

    /// Feeds the configuration entered at `step` (step 0 is the start).
    pub fn observe(&mut self, step: u64, cfg: &Configuration) {
        self.last_step = step;
        if self.spec.entry.contains(&cfg.state) {
            self.close(step, true);
            self.open = Some(Phase {
                start_step: step,
                steps: 0,
                attempts: 0,
                start_distance: None,
                strong: None,
                complete: false,
            });
        }
        if let Some(phase) = &mut self.open {
            if phase.start_distance.is_none() {
                let (e, f) = self.spec.pair;
                if let (Some(ve), Some(vf)) = (cfg.value(e), cfg.value(f)) {
                    phase.start_distance = Some(fractional_distance(ve, vf));
                }
            }
        }
    }

    fn close(&mut self, step: u64, complete: bool) {
        if let Some(mut phase) = self.open.take() {
            phase.steps = step - phase.start_step;
            phase.attempts = phase.steps / self.spec.attempt_len.max(1);
            phase.complete = complete;
            self.phases.push(phase);
        }
    }

    /// Phases closed so far; the open one is excluded.
    pub fn closed(&self) -> &[Phase] {
        &self.phases
    }

    /// Length in attempts of the currently open phase.
    pub fn open_attempts(&self) -> Option<u64> {
        self.open
            .as_ref()
            .map(|p| (self.last_step - p.start_step) / self.spec.attempt_len.max(1))
    }

    /// Closes the trailing phase and flags strong phases.
    pub fn finish(mut self) -> Vec<Phase> {
        let end = self.last_step;
        self.close(end, false);
        let mut phases = self.phases;
        for k in 0..phases.len().saturating_sub(1) {
            phases[k].strong = match (phases[k].start_distance, phases[k + 1].start_distance) {
                (Some(old), Some(new)) => Some(new <= old / 2.0),
                _ => None,
            };
        }
        phases
    }
}

/// Segments a recorded trace (configurations in order, starting at step 0).
pub fn phase_tracker(trace: &[Configuration], spec: PhaseSpec) -> Vec<Phase> {
    let mut tracker = PhaseTracker::new(spec);
    for (i, cfg) in trace.iter().enumerate() {
        tracker.observe(i as u64, cfg);
    }
    tracker.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;

    fn cfg(state: usize, values: &[Option<f64>]) -> Configuration {
        Configuration {
            state: StateId(state),
            valuation: values.to_vec(),
            last_step: 0.0,
        }
    }

    fn spec() -> PhaseSpec {
        PhaseSpec {
            entry: vec![StateId(0)],
            attempt_len: 3,
            pair: (EventId(0), EventId(1)),
        }
    }

    #[test]
    fn repeated_cycle_is_one_phase() {
        let mut trace = vec![cfg(0, &[None, None])];
        for _ in 0..4 {
            trace.push(cfg(1, &[Some(0.0), Some(0.5)]));
            trace.push(cfg(2, &[Some(0.0), Some(0.5)]));
            trace.push(cfg(3, &[Some(0.0), Some(0.5)]));
        }
        let phases = phase_tracker(&trace, spec());
        assert_eq!(phases.len(), 1);
        assert_eq!(phases[0].attempts, 4);
        assert_eq!(phases[0].start_distance, Some(0.5));
    }

    #[test]
    fn strong_phases() {
        let trace: Vec<Configuration> = [0.4, 0.3, 0.1]
            .iter()
            .flat_map(|&d| {
                [
                    cfg(0, &[None, None]),
                    cfg(1, &[Some(0.0), Some(d)]),
                    cfg(2, &[Some(0.0), Some(d)]),
                ]
            })
            .collect();
        let phases = phase_tracker(&trace, spec());
        assert_eq!(phases.len(), 3);
        assert_eq!(phases[0].strong, Some(false));
        assert_eq!(phases[1].strong, Some(true));
        assert_eq!(phases[2].strong, None);
        assert!(phases[0].complete && !phases[2].complete);
    }

    #[test]
    fn entry_never_visited() {
        let trace = vec![cfg(1, &[None, None]); 10];
        assert!(phase_tracker(&trace, spec()).is_empty());
    }

    #[test]
    fn producer_consumer_spec_from_catalog() {
        let m = library::get_model("fig1-producer-consumer").unwrap().model;
        let spec = PhaseSpec::producer_consumer(&m).unwrap();
        assert_eq!(spec.entry.len(), 2);
        assert!(PhaseSpec::producer_consumer(&library::get_model("renewal-2").unwrap().model).is_none());
    }
}

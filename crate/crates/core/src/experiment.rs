//! Reproduction experiments on the catalog counterexamples.
//!
//! `oscillation` measures how far the partial timed frequency still moves
//! late in a run, and how often one phase outweighs all earlier ones.
//! `sink_plateau` tracks the probability of having reached the absorbing
//! sink over doubling horizons. `sink_visits` counts returns to the sink
//! in the cycled variant.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::EstimateError;
use crate::estimate::{estimate_reach_probabilities, ReachBudget, ReachEstimate};
use crate::library::NamedModel;
use crate::regions::RegionGraph;
use crate::rng::task_rng;
use crate::simulator::{
    initial_configuration, simulate_from, Budget, CheckpointSchedule, PhaseSpec, PhaseTracker,
    TargetSet,
};

/// Steps per attempt of the producer-consumer cycle.
pub const ATTEMPT_LEN: u64 = 3;

/// Ratio of a phase to all earlier phases above which it dominates.
pub const DOMINATION_ALPHA: f64 = 1.0 / 18.0;

/// Number of trailing checkpoints whose spread is measured.
pub const LATE_CHECKPOINTS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationRun {
    pub run: usize,
    /// `max − min` of `partial_c` over the late checkpoints.
    pub spread: f64,
    pub final_partial_c: f64,
    pub phases: usize,
    /// Phases (after the first) at least `α` times as long as all earlier
    /// phases together.
    pub dominating_phases: usize,
    pub longest_phase_attempts: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationReport {
    pub model: String,
    pub runs: usize,
    pub attempts: u64,
    pub steps: u64,
    pub alpha: f64,
    pub late_checkpoints: Vec<u64>,
    /// Fraction of runs with at least one dominating phase after the first.
    pub dominating_fraction: f64,
    pub max_spread: f64,
    pub per_run: Vec<OscillationRun>,
}

impl OscillationReport {
    pub fn fraction_spread_above(&self, threshold: f64) -> f64 {
        self.per_run.iter().filter(|r| r.spread > threshold).count() as f64 / self.runs as f64
    }

    pub fn fraction_spread_below(&self, threshold: f64) -> f64 {
        self.per_run.iter().filter(|r| r.spread < threshold).count() as f64 / self.runs as f64
    }
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Runs `runs` seeded simulations of `attempts · 3` steps each, recording
/// `partial_c` of the catalog target at geometric checkpoints.
pub fn oscillation(
    named: &NamedModel,
    runs: usize,
    attempts: u64,
    seed: u64,
) -> Result<OscillationReport, EstimateError> {
    let model = &named.model;
    let target = TargetSet::new(
        model,
        &named
            .target
            .iter()
            .filter_map(|s| model.state_id(s))
            .collect::<Vec<_>>(),
    );
    let steps = attempts * ATTEMPT_LEN;
    let phase_spec = PhaseSpec::producer_consumer(model);
    let per_run: Vec<(OscillationRun, Vec<u64>)> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = task_rng(seed, run as u64);
            let start = initial_configuration(model, &mut rng);
            let mut tracker = phase_spec.clone().map(PhaseTracker::new);
            if let Some(t) = &mut tracker {
                t.observe(0, &start);
            }
            let (stats, _) = simulate_from(
                model,
                start,
                Budget::Steps(steps),
                &target,
                &CheckpointSchedule::Geometric,
                &mut rng,
                |step, _, cfg| {
                    if let Some(t) = &mut tracker {
                        t.observe(step, cfg);
                    }
                },
            )?;
            let late = &stats.checkpoints[stats.checkpoints.len().saturating_sub(LATE_CHECKPOINTS)..];
            let late_c: Vec<f64> = late.iter().map(|c| c.partial_c).collect();
            let phases = tracker.map(PhaseTracker::finish).unwrap_or_default();
            let mut prior = 0u64;
            let mut dominating = 0;
            for (k, p) in phases.iter().enumerate() {
                if k > 0 && p.attempts as f64 >= DOMINATION_ALPHA * prior as f64 {
                    dominating += 1;
                }
                prior += p.attempts;
            }
            Ok((
                OscillationRun {
                    run,
                    spread: spread(&late_c),
                    final_partial_c: stats.partial_c(),
                    phases: phases.len(),
                    dominating_phases: dominating,
                    longest_phase_attempts: phases.iter().map(|p| p.attempts).max().unwrap_or(0),
                },
                late.iter().map(|c| c.step).collect(),
            ))
        })
        .collect::<Result<_, EstimateError>>()?;
    let late_checkpoints = per_run.first().map(|r| r.1.clone()).unwrap_or_default();
    let per_run: Vec<OscillationRun> = per_run.into_iter().map(|r| r.0).collect();
    let dominating_fraction =
        per_run.iter().filter(|r| r.dominating_phases > 0).count() as f64 / runs.max(1) as f64;
    Ok(OscillationReport {
        model: named.key.to_string(),
        runs,
        attempts,
        steps,
        alpha: DOMINATION_ALPHA,
        late_checkpoints,
        dominating_fraction,
        max_spread: per_run.iter().map(|r| r.spread).fold(0.0, f64::max),
        per_run,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinkPlateauReport {
    pub model: String,
    pub runs: usize,
    pub attempts: u64,
    pub reach: ReachEstimate,
    /// Index of the BSCC whose states include the sink.
    pub sink_bscc: Option<usize>,
    pub value: f64,
    pub ci_upper: f64,
    /// Whether the point estimate is at most `0.991`.
    pub consistent_with_bound: bool,
}

/// Reach probability of the sink BSCC over doubling horizons up to
/// `attempts · 3` steps.
pub fn sink_plateau(
    named: &NamedModel,
    graph: &RegionGraph,
    runs: usize,
    attempts: u64,
    seed: u64,
) -> Result<SinkPlateauReport, EstimateError> {
    let model = &named.model;
    let budget = ReachBudget {
        runs,
        min_horizon: 16 * ATTEMPT_LEN,
        max_horizon: attempts * ATTEMPT_LEN,
        tolerance: 1e-3,
    };
    let reach = estimate_reach_probabilities(model, graph, &budget, seed)?;
    let sink = model.state_id("Sink");
    let sink_bscc = graph
        .labels
        .bsccs()
        .position(|comp| comp.iter().any(|&v| Some(graph.regions[v].state) == sink));
    let (value, ci_upper) = match sink_bscc {
        Some(b) => (reach.per_bscc[b].value, reach.per_bscc[b].ci_upper),
        None => (0.0, 0.0),
    };
    Ok(SinkPlateauReport {
        model: named.key.to_string(),
        runs,
        attempts,
        sink_bscc,
        value,
        ci_upper,
        consistent_with_bound: value <= 0.991,
        reach,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinkVisitReport {
    pub model: String,
    pub runs: usize,
    pub steps: u64,
    /// Visits per run within the first half of the horizon.
    pub half_horizon_visits: Vec<u64>,
    /// Visits per run within the full horizon.
    pub visits: Vec<u64>,
    pub median_half: u64,
    pub median: u64,
    pub max: u64,
}

fn median(values: &[u64]) -> u64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.get(v.len() / 2).copied().unwrap_or(0)
}

/// Counts entries into states named `Sink` per run.
pub fn sink_visits(
    named: &NamedModel,
    runs: usize,
    attempts: u64,
    seed: u64,
) -> Result<SinkVisitReport, EstimateError> {
    let model = &named.model;
    let sink = model.state_id("Sink");
    let steps = attempts * ATTEMPT_LEN;
    let counts: Vec<(u64, u64)> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = task_rng(seed, run as u64);
            let start = initial_configuration(model, &mut rng);
            let mut half = 0;
            let mut full = 0;
            simulate_from(
                model,
                start,
                Budget::Steps(steps),
                &TargetSet::new(model, &[]),
                &CheckpointSchedule::At(Vec::new()),
                &mut rng,
                |step, _, cfg| {
                    if Some(cfg.state) == sink {
                        full += 1;
                        if step <= steps / 2 {
                            half += 1;
                        }
                    }
                },
            )?;
            Ok((half, full))
        })
        .collect::<Result<_, EstimateError>>()?;
    let half_horizon_visits: Vec<u64> = counts.iter().map(|c| c.0).collect();
    let visits: Vec<u64> = counts.iter().map(|c| c.1).collect();
    Ok(SinkVisitReport {
        model: named.key.to_string(),
        runs,
        steps,
        median_half: median(&half_horizon_visits),
        median: median(&visits),
        max: visits.iter().copied().max().unwrap_or(0),
        half_horizon_visits,
        visits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::get_model;
    use crate::regions::build_region_graph;

    #[test]
    fn spreads() {
        assert_eq!(spread(&[0.2, 0.5, 0.3]), 0.5 - 0.2);
        assert_eq!(spread(&[]), 0.0);
        assert_eq!(median(&[5, 1, 3]), 3);
    }

    #[test]
    fn renewal_control_is_steady() {
        let r = oscillation(&get_model("renewal-2").unwrap(), 8, 20_000, 1).unwrap();
        assert_eq!(r.late_checkpoints.len(), LATE_CHECKPOINTS);
        assert_eq!(*r.late_checkpoints.last().unwrap(), 60_000);
        assert!(r.max_spread < 0.01, "{}", r.max_spread);
        assert!(r.per_run.iter().all(|x| x.phases == 0));
    }

    #[test]
    fn producer_consumer_has_phases() {
        let r = oscillation(&get_model("fig1").unwrap(), 4, 5_000, 1).unwrap();
        assert!(r.per_run.iter().all(|x| x.phases >= 1));
    }

    #[test]
    fn small_sink_plateau() {
        let named = get_model("fig2-sink").unwrap();
        let g = build_region_graph(&named.model).unwrap();
        let r = sink_plateau(&named, &g, 300, 256, 4).unwrap();
        assert_eq!(r.sink_bscc, Some(0));
        assert!(r.value > 0.4);
        assert_eq!(r.reach.total(), 1.0);
    }

    #[test]
    fn cycled_sink_visits_are_counted() {
        let r = sink_visits(&get_model("fig2-cycled").unwrap(), 20, 1_000, 2).unwrap();
        assert_eq!(r.visits.len(), 20);
        assert!(r.visits.iter().zip(&r.half_horizon_visits).all(|(f, h)| f >= h));
        assert!(r.visits.iter().any(|&v| v > 0));
    }
}

//! Monte Carlo estimation of BSCC reach probabilities.
//!
//! Each run is simulated until its region lies in a BSCC of the region
//! graph or the horizon is spent. Absorption is recorded with its step, so
//! the estimate at every intermediate doubling horizon comes for free.

use rayon::prelude::*;
use serde::Serialize;

use super::fit::{fit_geometric_rate, RateFit};
use super::FrequencyEstimate;
use crate::error::EstimateError;
use crate::model::GsmpModel;
use crate::regions::{region_of, RegionGraph};
use crate::rng::task_rng;
use crate::simulator::{initial_configuration, step_in_place, Configuration};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReachBudget {
    pub runs: usize,
    /// First horizon of the doubling schedule, in steps.
    pub min_horizon: u64,
    /// Last horizon, in steps.
    pub max_horizon: u64,
    /// Plateau threshold on the change between consecutive horizons.
    pub tolerance: f64,
}

impl Default for ReachBudget {
    fn default() -> Self {
        ReachBudget {
            runs: 10_000,
            min_horizon: 16,
            max_horizon: 1 << 16,
            tolerance: 1e-3,
        }
    }
}

impl ReachBudget {
    pub fn horizons(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut h = self.min_horizon.max(1);
        while h < self.max_horizon {
            out.push(h);
            h *= 2;
        }
        out.push(self.max_horizon);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizonPoint {
    pub horizon: u64,
    /// Fraction of runs absorbed in each BSCC by this horizon.
    pub per_bscc: Vec<f64>,
    pub not_absorbed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReachEstimate {
    /// One estimate per BSCC, in the graph's BSCC order.
    pub per_bscc: Vec<FrequencyEstimate>,
    /// Mass not yet absorbed at the last horizon.
    pub not_absorbed: FrequencyEstimate,
    pub history: Vec<HorizonPoint>,
    /// Earliest horizon after which no BSCC estimate moves by the
    /// tolerance or more.
    pub plateau_horizon: Option<u64>,
    /// Geometric-rate fit of the not-absorbed history.
    pub rate_fit: RateFit,
    /// Configurations whose region was not a vertex of the graph.
    pub off_graph: u64,
    /// First absorbing configuration observed in each BSCC, by run order.
    pub entries: Vec<Option<Configuration>>,
    pub runs: usize,
}

impl ReachEstimate {
    /// Sum of the BSCC values and the not-absorbed mass, in report order.
    pub fn total(&self) -> f64 {
        self.per_bscc.iter().map(|e| e.value).sum::<f64>() + self.not_absorbed.value
    }
}

struct RunOutcome {
    absorbed: Option<(u64, usize, Configuration)>,
    off_graph: u64,
}

fn one_run(
    model: &GsmpModel,
    graph: &RegionGraph,
    bscc_states: &[bool],
    horizon: u64,
    seed: u64,
    run: usize,
) -> Result<RunOutcome, EstimateError> {
    let mut rng = task_rng(seed, run as u64);
    let mut cfg = initial_configuration(model, &mut rng);
    let mut off_graph = 0;
    let mut steps = 0;
    loop {
        if bscc_states[cfg.state.0] {
            match graph.find(&region_of(model, &cfg)) {
                Some(v) => {
                    if let Some(b) = graph.labels.bscc_of(v) {
                        return Ok(RunOutcome {
                            absorbed: Some((steps, b, cfg)),
                            off_graph,
                        });
                    }
                }
                None => off_graph += 1,
            }
        }
        if steps == horizon {
            return Ok(RunOutcome {
                absorbed: None,
                off_graph,
            });
        }
        step_in_place(model, &mut cfg, &mut rng)?;
        steps += 1;
    }
}

/// Simulates `budget.runs` runs and reports, per BSCC, the probability of
/// having entered it within `budget.max_horizon` steps.
pub fn estimate_reach_probabilities(
    model: &GsmpModel,
    graph: &RegionGraph,
    budget: &ReachBudget,
    seed: u64,
) -> Result<ReachEstimate, EstimateError> {
    let mut bscc_states = vec![false; model.num_states()];
    for comp in graph.labels.bsccs() {
        for &v in comp {
            bscc_states[graph.regions[v].state.0] = true;
        }
    }
    let outcomes: Vec<RunOutcome> = (0..budget.runs)
        .into_par_iter()
        .map(|r| one_run(model, graph, &bscc_states, budget.max_horizon, seed, r))
        .collect::<Result<_, _>>()?;

    let k = graph.labels.num_bsccs();
    let runs = budget.runs as u64;
    let mut entries: Vec<Option<Configuration>> = vec![None; k];
    let mut counts = vec![0u64; k];
    let mut off_graph = 0;
    for o in &outcomes {
        off_graph += o.off_graph;
        if let Some((_, b, cfg)) = &o.absorbed {
            counts[*b] += 1;
            entries[*b].get_or_insert_with(|| cfg.clone());
        }
    }

    let history: Vec<HorizonPoint> = budget
        .horizons()
        .into_iter()
        .map(|h| {
            let mut c = vec![0u64; k];
            for o in &outcomes {
                if let Some((s, b, _)) = &o.absorbed {
                    if *s <= h {
                        c[*b] += 1;
                    }
                }
            }
            let per_bscc: Vec<f64> = c.iter().map(|&x| x as f64 / runs as f64).collect();
            let not_absorbed = 1.0 - per_bscc.iter().sum::<f64>();
            HorizonPoint {
                horizon: h,
                per_bscc,
                not_absorbed,
            }
        })
        .collect();

    let moved = |a: &HorizonPoint, b: &HorizonPoint| {
        a.per_bscc
            .iter()
            .zip(&b.per_bscc)
            .any(|(x, y)| (x - y).abs() >= budget.tolerance)
    };
    let last_move = history.windows(2).rposition(|w| moved(&w[0], &w[1]));
    let plateau_horizon = match last_move {
        None => history.first().map(|p| p.horizon),
        Some(i) if i + 2 < history.len() => Some(history[i + 1].horizon),
        Some(_) => None,
    };
    let rate_fit = fit_geometric_rate(&history.iter().map(|p| p.not_absorbed).collect::<Vec<_>>());

    let per_bscc: Vec<FrequencyEstimate> =
        counts.iter().map(|&c| FrequencyEstimate::binomial(c, runs)).collect();
    let absorbed: u64 = counts.iter().sum();
    let mut not_absorbed = FrequencyEstimate::binomial(runs - absorbed, runs);
    not_absorbed.value = 1.0 - per_bscc.iter().map(|e| e.value).sum::<f64>();

    Ok(ReachEstimate {
        per_bscc,
        not_absorbed,
        history,
        plateau_horizon,
        rate_fit,
        off_graph,
        entries,
        runs: budget.runs,
    })
}

//! Long-run discrete and timed frequencies inside a BSCC.

use rayon::prelude::*;
use serde::Serialize;

use super::stats::batch_means;
use super::{FrequencyEstimate, Method};
use crate::error::EstimateError;
use crate::model::GsmpModel;
use crate::rng::task_rng;
use crate::simulator::{step_in_place, Configuration, TargetSet};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyBudget {
    /// Steps per run, burn-in included.
    pub steps: u64,
    pub runs: usize,
    /// Fraction of each run discarded before measuring.
    pub burn_in: f64,
    /// Batches per run for the batch-means interval.
    pub batches: usize,
    pub level: f64,
}

impl Default for FrequencyBudget {
    fn default() -> Self {
        FrequencyBudget {
            steps: 1 << 20,
            runs: 4,
            burn_in: 0.1,
            batches: 32,
            level: 0.95,
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Batch {
    steps: u64,
    visits: u64,
    time: f64,
    time_in: f64,
}

fn run_batches(
    model: &GsmpModel,
    entry: &Configuration,
    target: &TargetSet,
    budget: &FrequencyBudget,
    seed: u64,
    run: usize,
) -> Result<Vec<Batch>, EstimateError> {
    let mut rng = task_rng(seed, run as u64);
    let mut cfg = entry.clone();
    let burn = (budget.steps as f64 * budget.burn_in).floor() as u64;
    for _ in 0..burn {
        step_in_place(model, &mut cfg, &mut rng)?;
    }
    let measured = budget.steps - burn;
    let k = budget.batches.max(1) as u64;
    let mut out = vec![Batch::default(); k as usize];
    for i in 0..measured {
        // Batches of near-equal length; the first `measured % k` get one more.
        let b = (i * k / measured) as usize;
        let left = cfg.state;
        let (_, dwell) = step_in_place(model, &mut cfg, &mut rng)?;
        let batch = &mut out[b];
        batch.steps += 1;
        batch.time += dwell;
        if target.contains(left) {
            batch.visits += 1;
            batch.time_in += dwell;
        }
    }
    Ok(out)
}

/// Estimates `d` and `c` of `target` from a configuration inside a BSCC.
///
/// Runs start at `entry` with independent streams; the first
/// `burn_in` fraction of each run is discarded and the rest is cut into
/// batches. Point values are the pooled ratios; interval half-widths come
/// from the spread of the per-batch ratios.
pub fn estimate_bscc_frequencies(
    model: &GsmpModel,
    entry: &Configuration,
    target: &TargetSet,
    budget: &FrequencyBudget,
    seed: u64,
) -> Result<(FrequencyEstimate, FrequencyEstimate), EstimateError> {
    let runs: Vec<Vec<Batch>> = (0..budget.runs)
        .into_par_iter()
        .map(|r| run_batches(model, entry, target, budget, seed, r))
        .collect::<Result<_, _>>()?;
    let batches: Vec<Batch> = runs.into_iter().flatten().filter(|b| b.steps > 0).collect();
    let steps: u64 = batches.iter().map(|b| b.steps).sum();
    let visits: u64 = batches.iter().map(|b| b.visits).sum();
    let time: f64 = batches.iter().map(|b| b.time).sum();
    let time_in: f64 = batches.iter().map(|b| b.time_in).sum();

    let d_batches: Vec<f64> = batches.iter().map(|b| b.visits as f64 / b.steps as f64).collect();
    let c_batches: Vec<f64> = batches
        .iter()
        .map(|b| if b.time > 0.0 { b.time_in / b.time } else { 0.0 })
        .collect();
    let (_, d_half) = batch_means(&d_batches, budget.level);
    let (_, c_half) = batch_means(&c_batches, budget.level);
    let d = if steps == 0 { 0.0 } else { visits as f64 / steps as f64 };
    let c = if time > 0.0 { time_in / time } else { 0.0 };
    Ok((
        FrequencyEstimate::symmetric(d, d_half, steps, Method::MonteCarlo),
        FrequencyEstimate::symmetric(c, c_half, steps, Method::MonteCarlo),
    ))
}

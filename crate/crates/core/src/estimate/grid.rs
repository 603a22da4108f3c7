//! Invariant measure of the configuration chain on a grid of cells.
//!
//! Valuations up to the truncation `n` are cut into cells of width `1/n`.
//! Integer values get cells of their own, since newly scheduled events sit
//! exactly at 0 and fixed-delay events occur at exact integers, so the
//! invariant measure has atoms there. The cell-to-cell matrix is estimated
//! by kernel draws from a representative of each cell, and the measure by
//! power iteration of the lazy chain `(I + P) / 2`, which has the same
//! invariant measures as `P` and no periodic oscillation.

use indexmap::IndexMap;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use super::waiting::expected_waiting_time;
use super::{FrequencyEstimate, Method};
use crate::analysis::single_ticking_check;
use crate::error::EstimateError;
use crate::model::{DelayKind, GsmpModel, StateId};
use crate::regions::{canonical_representative, RegionGraph};
use crate::rng::task_rng;
use crate::simulator::{step, Configuration, TargetSet, TICKS_PER_UNIT};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    /// Valuations above `truncation` are dropped; cells have width
    /// `1 / truncation`.
    pub truncation: u32,
    pub power_iterations: usize,
    /// L1 change between iterates at which power iteration stops.
    pub tolerance: f64,
    pub draws_per_cell: u32,
    /// Average 4 quasi-random representatives per cell instead of using
    /// the center.
    pub refinement: bool,
    pub max_cells: usize,
    /// Run even if the model is not single-ticking.
    pub force: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            truncation: 20,
            power_iterations: 100_000,
            tolerance: 1e-10,
            draws_per_cell: 4096,
            refinement: false,
            max_cells: 200_000,
            force: false,
        }
    }
}

/// Dropped one-step mass the default truncation aims below.
const DEFAULT_DROP: f64 = 1e-4;

impl GridSpec {
    pub fn cell(&self) -> Ratio<u32> {
        Ratio::new(1, self.truncation)
    }

    /// Default spec with `n` at least 20, at least the bound `B`, and large
    /// enough that each exponential delay exceeds `n` with probability
    /// below `1e-4`.
    pub fn for_model(model: &GsmpModel) -> Self {
        let mut n = 20u32.max(model.bound() as u32);
        for e in model.events() {
            if e.law.kind == DelayKind::ShiftedExponential {
                let tail = e.law.lower_f64() + (1.0 / DEFAULT_DROP).ln() / e.law.rate_f64();
                n = n.max(tail.ceil() as u32);
            }
        }
        GridSpec {
            truncation: n,
            ..GridSpec::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coord {
    /// Exactly the integer `k`.
    Int(u32),
    /// Strictly inside `(j/n, (j+1)/n)`, or at its left end if that is
    /// not an integer.
    Bin(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GridCell {
    pub state: StateId,
    /// One coordinate per event id, `None` when unscheduled.
    pub coords: Vec<Option<Coord>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridMeasure {
    pub cells: Vec<GridCell>,
    pub pi: Vec<f64>,
    pub d: FrequencyEstimate,
    pub c: FrequencyEstimate,
    pub iterations: usize,
    pub residual: f64,
    /// Invariant mass of the draws that left the truncated space.
    pub dropped_mass: f64,
    /// Largest fraction of dropped draws from any single cell.
    pub max_dropped_fraction: f64,
    /// Largest deviation of a row sum of the cell matrix from 1.
    pub max_row_sum_error: f64,
    /// Period of the BSCC in the region graph.
    pub period: u64,
    pub guarantee: bool,
    pub warnings: Vec<String>,
    pub draws: u64,
}

fn cell_of(cfg: &Configuration, n: u32) -> Option<GridCell> {
    let nf = n as f64;
    let mut coords = Vec::with_capacity(cfg.valuation.len());
    for v in &cfg.valuation {
        coords.push(match *v {
            None => None,
            Some(x) if x > nf => return None,
            Some(x) if x == x.floor() => Some(Coord::Int(x as u32)),
            Some(x) => Some(Coord::Bin(((x * nf).floor() as u32).min(n * n - 1))),
        });
    }
    Some(GridCell {
        state: cfg.state,
        coords,
    })
}

fn quantize(x: f64) -> f64 {
    (x * TICKS_PER_UNIT).round() / TICKS_PER_UNIT
}

/// Kronecker-sequence offset in `(0, 1)` for point `k`, coordinate `i`.
fn quasi_offset(k: usize, i: usize) -> f64 {
    const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    let alpha = PRIMES[i % PRIMES.len()].sqrt().fract();
    (0.5 + k as f64 * alpha).fract()
}

fn representatives(cell: &GridCell, n: u32, refinement: bool) -> Vec<Configuration> {
    let nf = n as f64;
    let build = |offset: &dyn Fn(usize) -> f64| Configuration {
        state: cell.state,
        valuation: cell
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.map(|c| match c {
                    Coord::Int(k) => k as f64,
                    Coord::Bin(j) => {
                        let x = quantize((j as f64 + offset(i)) / nf);
                        // Keep representatives off the bin's end points.
                        x.clamp(
                            (j as f64 / nf * TICKS_PER_UNIT).floor() / TICKS_PER_UNIT + 1.0 / TICKS_PER_UNIT,
                            ((j + 1) as f64 / nf * TICKS_PER_UNIT).ceil() / TICKS_PER_UNIT - 1.0 / TICKS_PER_UNIT,
                        )
                    }
                })
            })
            .collect(),
        last_step: 0.0,
    };
    if refinement {
        (0..4).map(|k| build(&|i| quasi_offset(k, i))).collect()
    } else {
        vec![build(&|_| 0.5)]
    }
}

struct Row {
    next: IndexMap<GridCell, u32>,
    dropped: u32,
    waiting: f64,
}

fn estimate_row(
    model: &GsmpModel,
    cell: &GridCell,
    spec: &GridSpec,
    seed: u64,
    index: usize,
) -> Result<Row, EstimateError> {
    let reps = representatives(cell, spec.truncation, spec.refinement);
    let mut rng = task_rng(seed, index as u64);
    let per_rep = (spec.draws_per_cell as usize / reps.len()).max(1);
    let mut next = IndexMap::new();
    let mut dropped = 0;
    let mut waiting = 0.0;
    for rep in &reps {
        waiting += expected_waiting_time(model, rep);
        for _ in 0..per_rep {
            let out = step(model, rep, &mut rng)?;
            match cell_of(&out.next, spec.truncation) {
                Some(c) => *next.entry(c).or_insert(0) += 1,
                None => dropped += 1,
            }
        }
    }
    Ok(Row {
        next,
        dropped,
        waiting: waiting / reps.len() as f64,
    })
}

/// Approximates the invariant measure of the BSCC with index `bscc` and
/// derives `d` and `c` of `target` from it.
///
/// Cells are discovered breadth-first from the canonical representative of
/// the BSCC's first region. Draws from a cell with index `i` use the
/// stream `task_rng(seed, i)`; discovery order is fixed, so the result does
/// not depend on the number of threads. Rows whose draws all leave the
/// truncated space restart at the first cell.
pub fn grid_invariant_measure(
    model: &GsmpModel,
    graph: &RegionGraph,
    bscc: usize,
    target: &TargetSet,
    spec: &GridSpec,
    seed: u64,
) -> Result<GridMeasure, EstimateError> {
    let verdict = single_ticking_check(model);
    if !verdict.single_ticking && !spec.force {
        return Err(EstimateError::NotSingleTicking);
    }
    if spec.truncation == 0 || (spec.truncation as u64) < model.bound() {
        return Err(EstimateError::InvalidSpec(format!(
            "truncation {} must be positive and at least the bound {}",
            spec.truncation,
            model.bound()
        )));
    }
    let component = graph
        .labels
        .bsccs()
        .nth(bscc)
        .ok_or(EstimateError::UnknownBscc(bscc))?;
    let period = graph.labels.periods[bscc];
    let mut warnings = Vec::new();
    if !verdict.single_ticking {
        warnings.push(
            "model is not single-ticking: the invariant measure may not exist and these values \
             are diagnostic only"
                .to_string(),
        );
    }
    if period > 1 {
        warnings.push(format!(
            "BSCC period is {period}; the lazy chain is aperiodic but the period is not \
             decomposed"
        ));
    }

    let start_cfg = canonical_representative(model, &graph.regions[component[0]]).to_configuration();
    let start = cell_of(&start_cfg, spec.truncation).ok_or_else(|| {
        EstimateError::InvalidSpec("BSCC representative lies beyond the truncation".into())
    })?;

    let mut index: IndexMap<GridCell, ()> = IndexMap::new();
    index.insert(start, ());
    let mut rows: Vec<Row> = Vec::new();
    let mut frontier = 0..1;
    while !frontier.is_empty() {
        let cells: Vec<GridCell> = frontier.clone().map(|i| index.get_index(i).unwrap().0.clone()).collect();
        let first = frontier.start;
        let new_rows: Vec<Row> = cells
            .par_iter()
            .enumerate()
            .map(|(k, cell)| estimate_row(model, cell, spec, seed, first + k))
            .collect::<Result<_, _>>()?;
        for row in &new_rows {
            for c in row.next.keys() {
                if !index.contains_key(c) {
                    index.insert(c.clone(), ());
                }
            }
        }
        if index.len() > spec.max_cells {
            return Err(EstimateError::TooManyCells(spec.max_cells));
        }
        rows.extend(new_rows);
        frontier = frontier.end..index.len();
    }

    // Row-stochastic matrix in incoming form: incoming[j] = [(i, P(i, j))].
    let size = rows.len();
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
    let mut max_row_sum_error: f64 = 0.0;
    let mut max_dropped_fraction: f64 = 0.0;
    let mut dropped_per_row = vec![0.0; size];
    for (i, row) in rows.iter().enumerate() {
        let kept: u32 = row.next.values().sum();
        let total = kept + row.dropped;
        dropped_per_row[i] = row.dropped as f64 / total as f64;
        max_dropped_fraction = max_dropped_fraction.max(dropped_per_row[i]);
        if kept == 0 {
            incoming[0].push((i, 1.0));
            continue;
        }
        let mut sum = 0.0;
        for (c, &k) in &row.next {
            let p = k as f64 / kept as f64;
            sum += p;
            incoming[index.get_index_of(c).unwrap()].push((i, p));
        }
        max_row_sum_error = max_row_sum_error.max((sum - 1.0).abs());
    }

    let mut pi = vec![0.0; size];
    pi[0] = 1.0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < spec.power_iterations {
        let next: Vec<f64> = incoming
            .par_iter()
            .enumerate()
            .map(|(j, inc)| 0.5 * (pi[j] + inc.iter().map(|&(i, p)| pi[i] * p).sum::<f64>()))
            .collect();
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        iterations += 1;
        if residual < spec.tolerance {
            break;
        }
    }
    if residual >= spec.tolerance {
        return Err(EstimateError::NotConverged {
            iterations,
            residual,
        });
    }
    let mass: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= mass);

    let cells: Vec<GridCell> = index.into_keys().collect();
    let mut d = 0.0;
    let mut tau = 0.0;
    let mut w = 0.0;
    let mut dropped_mass = 0.0;
    for (i, cell) in cells.iter().enumerate() {
        w += pi[i] * rows[i].waiting;
        dropped_mass += pi[i] * dropped_per_row[i];
        if target.contains(cell.state) {
            d += pi[i];
            tau += pi[i] * rows[i].waiting;
        }
    }
    let c = if w > 0.0 { tau / w } else { 0.0 };
    let draws = rows.len() as u64 * spec.draws_per_cell as u64;
    Ok(GridMeasure {
        d: FrequencyEstimate::symmetric(d, 0.0, draws, Method::Grid),
        c: FrequencyEstimate::symmetric(c, 0.0, draws, Method::Grid),
        cells,
        pi,
        iterations,
        residual,
        dropped_mass,
        max_dropped_fraction,
        max_row_sum_error,
        period,
        guarantee: verdict.single_ticking,
        warnings,
        draws,
    })
}

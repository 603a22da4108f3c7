//! Quantitative approximation of long-run behaviour.
//!
//! Expected waiting times are computed by quadrature. Reach probabilities
//! and per-BSCC frequencies are estimated by Monte Carlo, and invariant
//! measures by discretizing the kernel on a grid of cells.
//!
//! All randomness is drawn from per-task streams derived from one master
//! seed, so results do not depend on the number of worker threads.

mod fit;
mod frequency;
mod grid;
mod reach;
mod stats;
mod waiting;

use serde::Serialize;

pub use fit::{fit_geometric_rate, RateFit};
pub use frequency::{estimate_bscc_frequencies, FrequencyBudget};
pub use grid::{grid_invariant_measure, GridCell, GridMeasure, GridSpec};
pub use reach::{estimate_reach_probabilities, HorizonPoint, ReachBudget, ReachEstimate};
pub use stats::{batch_means, student_t_quantile, wilson_interval, Z_95};
pub use waiting::{adaptive_simpson, expected_waiting_time, winner_probabilities};

/// Caveat attached to every estimation report.
pub const RATE_CAVEAT: &str = "no a-priori convergence bound is computed; convergence is judged \
                               a posteriori by plateau detection and geometric-rate fitting";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MonteCarlo,
    Grid,
}

/// A point estimate of a probability or frequency with a 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    pub value: f64,
    pub ci_half_width: f64,
    pub samples: u64,
    pub method: Method,
    /// Interval bounds, clipped to `[0, 1]`. For Wilson intervals these
    /// are not symmetric around `value`.
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl FrequencyEstimate {
    /// Symmetric interval `value ± half_width`, clipped to `[0, 1]`.
    pub fn symmetric(value: f64, half_width: f64, samples: u64, method: Method) -> Self {
        let value = value.clamp(0.0, 1.0);
        FrequencyEstimate {
            value,
            ci_half_width: half_width,
            samples,
            method,
            ci_lower: (value - half_width).max(0.0),
            ci_upper: (value + half_width).min(1.0),
        }
    }

    /// Wilson score interval for `successes` out of `trials`.
    pub fn binomial(successes: u64, trials: u64) -> Self {
        let value = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
        let (lo, hi) = wilson_interval(successes, trials, Z_95);
        FrequencyEstimate {
            value,
            ci_half_width: 0.5 * (hi - lo),
            samples: trials,
            method: Method::MonteCarlo,
            ci_lower: lo,
            ci_upper: hi,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_lower <= x && x <= self.ci_upper
    }
}

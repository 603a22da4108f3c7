//! Geometric-rate fitting of an estimate history over doubling horizons.
//!
//! This is a diagnostic: if successive changes `Δᵢ = |eᵢ₊₁ − eᵢ|` decay
//! like `rateⁱ`, the history is converging geometrically.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateFit {
    /// Every change is zero; the history converged immediately.
    Converged,
    Fit {
        /// Per-doubling contraction factor, in `(0, 1)`.
        rate: f64,
        /// Coefficient of determination of the log-linear fit.
        r_squared: f64,
        points: usize,
    },
    NoFit { reason: String },
}

impl RateFit {
    /// The fitted rate, `0` for an immediately converged history.
    pub fn rate(&self) -> Option<f64> {
        match self {
            RateFit::Converged => Some(0.0),
            RateFit::Fit { rate, .. } => Some(*rate),
            RateFit::NoFit { .. } => None,
        }
    }

    fn no_fit(reason: impl Into<String>) -> Self {
        RateFit::NoFit {
            reason: reason.into(),
        }
    }
}

/// Relative slack when testing that changes do not increase.
const MONOTONE_SLACK: f64 = 1e-9;

pub fn fit_geometric_rate(history: &[f64]) -> RateFit {
    if history.len() < 4 {
        return RateFit::no_fit(format!("need at least 4 history points, got {}", history.len()));
    }
    let deltas: Vec<f64> = history.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if deltas.iter().all(|&d| d == 0.0) {
        return RateFit::Converged;
    }
    if let Some(i) = deltas
        .windows(2)
        .position(|w| w[1] > w[0] * (1.0 + MONOTONE_SLACK))
    {
        return RateFit::no_fit(format!(
            "changes are not monotone: {:.3e} then {:.3e} at point {}",
            deltas[i],
            deltas[i + 1],
            i + 1
        ));
    }
    // Trailing zeros mean the history has settled; fit the decaying prefix.
    let prefix: Vec<f64> = deltas.iter().copied().take_while(|&d| d > 0.0).collect();
    if prefix.len() < 2 {
        return RateFit::Converged;
    }
    let n = prefix.len() as f64;
    let xs: Vec<f64> = (0..prefix.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = prefix.iter().map(|d| d.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let rate = slope.exp();
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    if rate >= 1.0 {
        return RateFit::no_fit(format!("fitted rate {rate:.4} does not contract"));
    }
    RateFit::Fit {
        rate,
        r_squared,
        points: prefix.len(),
    }
}

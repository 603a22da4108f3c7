//! Confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Two-sided quantile of Student's t with `df` degrees of freedom.
pub fn student_t_quantile(level: f64, df: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    t.inverse_cdf(0.5 + level / 2.0)
}

/// Mean of batch values and the half-width of its confidence interval.
pub fn batch_means(batches: &[f64], level: f64) -> (f64, f64) {
    let k = batches.len();
    if k == 0 {
        return (0.0, f64::INFINITY);
    }
    let mean = batches.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, f64::INFINITY);
    }
    let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let half = student_t_quantile(level, (k - 1) as f64) * (var / k as f64).sqrt();
    (mean, half)
}

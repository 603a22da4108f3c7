//! Delay laws conditioned on elapsed time.
//!
//! For a variable-delay event with density `f` that has already been
//! scheduled for `elapsed` time units, the remaining time has the shifted
//! density `f(t + elapsed) / P(X > elapsed)` on `t >= 0`.

use rand::Rng;

use crate::error::DelayError;
use crate::model::{DelayKind, DelayLaw};

/// Expected delay of a law.
pub fn mean_delay(law: &DelayLaw) -> f64 {
    match law.kind {
        DelayKind::Fixed => law.lower_f64(),
        DelayKind::Uniform => 0.5 * (law.lower_f64() + law.upper_f64()),
        DelayKind::ShiftedExponential => law.lower_f64() + 1.0 / law.rate_f64(),
    }
}

fn check(law: &DelayLaw, elapsed: f64) -> Result<(), DelayError> {
    if law.is_fixed() {
        return Err(DelayError::FixedLaw);
    }
    if elapsed < 0.0 {
        return Err(DelayError::NegativeElapsed(elapsed));
    }
    let upper = law.upper_f64();
    if elapsed >= upper {
        return Err(DelayError::Overdue { elapsed, upper });
    }
    Ok(())
}

/// Support of the remaining time: `(lo, hi)`, `hi` possibly infinite.
pub fn residual_support(law: &DelayLaw, elapsed: f64) -> Result<(f64, f64), DelayError> {
    check(law, elapsed)?;
    Ok(support_unchecked(law, elapsed))
}

#[inline]
pub(crate) fn support_unchecked(law: &DelayLaw, elapsed: f64) -> (f64, f64) {
    let lo = (law.lower_f64() - elapsed).max(0.0);
    (lo, law.upper_f64() - elapsed)
}

/// Renormalized shifted density of the remaining time at `t`.
pub fn residual_density(law: &DelayLaw, elapsed: f64, t: f64) -> Result<f64, DelayError> {
    check(law, elapsed)?;
    Ok(density_unchecked(law, elapsed, t))
}

#[inline]
pub(crate) fn density_unchecked(law: &DelayLaw, elapsed: f64, t: f64) -> f64 {
    let (lo, hi) = support_unchecked(law, elapsed);
    if t < lo || t > hi || t < 0.0 {
        return 0.0;
    }
    match law.kind {
        DelayKind::Uniform => 1.0 / (hi - lo),
        DelayKind::ShiftedExponential => {
            let rate = law.rate_f64();
            rate * (-rate * (t - lo)).exp()
        }
        DelayKind::Fixed => 0.0,
    }
}

/// Probability that the remaining time exceeds `t`.
pub fn residual_survival(law: &DelayLaw, elapsed: f64, t: f64) -> Result<f64, DelayError> {
    check(law, elapsed)?;
    Ok(survival_unchecked(law, elapsed, t))
}

#[inline]
pub(crate) fn survival_unchecked(law: &DelayLaw, elapsed: f64, t: f64) -> f64 {
    let (lo, hi) = support_unchecked(law, elapsed);
    if t <= lo {
        return 1.0;
    }
    if t >= hi {
        return 0.0;
    }
    match law.kind {
        DelayKind::Uniform => (hi - t) / (hi - lo),
        DelayKind::ShiftedExponential => (-law.rate_f64() * (t - lo)).exp(),
        DelayKind::Fixed => 0.0,
    }
}

/// Inverse CDF of the remaining time at probability `q` in `[0, 1)`.
pub fn residual_quantile(law: &DelayLaw, elapsed: f64, q: f64) -> Result<f64, DelayError> {
    check(law, elapsed)?;
    Ok(quantile_unchecked(law, elapsed, q))
}

#[inline]
pub(crate) fn quantile_unchecked(law: &DelayLaw, elapsed: f64, q: f64) -> f64 {
    let (lo, hi) = support_unchecked(law, elapsed);
    match law.kind {
        DelayKind::Uniform => lo + q * (hi - lo),
        DelayKind::ShiftedExponential => lo - (-q).ln_1p() / law.rate_f64(),
        DelayKind::Fixed => f64::NAN,
    }
}

/// Draws a remaining time by inverse-CDF sampling.
pub fn residual_sample<R: Rng + ?Sized>(
    law: &DelayLaw,
    elapsed: f64,
    rng: &mut R,
) -> Result<f64, DelayError> {
    check(law, elapsed)?;
    let q: f64 = rng.random();
    Ok(quantile_unchecked(law, elapsed, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::task_rng;
    use proptest::prelude::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn means() {
        assert_eq!(mean_delay(&DelayLaw::uniform(0, 1)), 0.5);
        assert_eq!(mean_delay(&DelayLaw::shifted_exponential(2, 1.0)), 3.0);
        assert_eq!(mean_delay(&DelayLaw::fixed(90)), 90.0);
    }

    #[test]
    fn uniform_residual_density() {
        let law = DelayLaw::uniform(0, 1);
        for t in [0.0, 0.1, 0.5, 0.79] {
            assert!((residual_density(&law, 0.2, t).unwrap() - 1.25).abs() < 1e-12);
        }
        assert_eq!(residual_density(&law, 0.2, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn exponential_is_memoryless() {
        let lambda = 1.7;
        let law = DelayLaw::shifted_exponential(0, lambda);
        for elapsed in [0.0, 0.3, 5.0] {
            for t in [0.0, 0.4, 2.0] {
                let got = residual_density(&law, elapsed, t).unwrap();
                assert!((got - lambda * (-lambda * t).exp()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn survival_values() {
        let law = DelayLaw::uniform(0, 1);
        let s = residual_survival(&law, 0.2, 0.3).unwrap();
        assert!((s - 0.625).abs() < 1e-12);
        // independent route: integrate the density over [0.3, 0.8]
        let integral = simpson(|t| density_unchecked(&law, 0.2, t), 0.3, 0.8, 1000);
        assert!((integral - 0.625).abs() < 1e-9);
        assert_eq!(residual_survival(&law, 0.2, 0.0).unwrap(), 1.0);
        assert_eq!(residual_survival(&law, 0.2, 0.8).unwrap(), 0.0);
        assert_eq!(residual_survival(&law, 0.2, 3.0).unwrap(), 0.0);
        let exp = DelayLaw::shifted_exponential(2, 1.0);
        assert_eq!(residual_survival(&exp, 0.5, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn overdue_and_fixed_errors() {
        let law = DelayLaw::uniform(0, 1);
        assert!(matches!(
            residual_density(&law, 1.0, 0.0),
            Err(DelayError::Overdue { .. })
        ));
        assert!(matches!(
            residual_survival(&DelayLaw::fixed(1), 0.0, 0.0),
            Err(DelayError::FixedLaw)
        ));
    }

    #[test]
    fn quantiles() {
        let law = DelayLaw::uniform(0, 1);
        assert!((residual_quantile(&law, 0.2, 0.5).unwrap() - 0.4).abs() < 1e-15);
        let exp = DelayLaw::shifted_exponential(0, 1.0);
        for q in [0.0, 0.25, 0.9] {
            let got = residual_quantile(&exp, 7.0, q).unwrap();
            assert!((got + (1.0 - q).ln()).abs() < 1e-12);
        }
        let shifted = DelayLaw::uniform(2, 3);
        assert!((residual_quantile(&shifted, 0.7, 0.5).unwrap() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn sample_mean_matches_residual_mean() {
        let law = DelayLaw::uniform(0, 1);
        let mut rng = task_rng(11, 0);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| residual_sample(&law, 0.2, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.4).abs() < 0.002, "mean {mean}");
    }

    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn kolmogorov_smirnov_against_residual_cdf() {
        // 1% critical value of the one-sample KS statistic: 1.628 / sqrt(n)
        let n = 100_000;
        let critical = 1.628 / (n as f64).sqrt();
        let cases = [
            (DelayLaw::uniform(0, 1), 0.2),
            (DelayLaw::uniform(1, 3), 0.5),
            (DelayLaw::uniform(2, 3), 2.4),
            (DelayLaw::shifted_exponential(2, 0.5), 0.7),
            (DelayLaw::shifted_exponential(0, 2.0), 4.0),
        ];
        for (k, (law, elapsed)) in cases.into_iter().enumerate() {
            let mut rng = task_rng(5, k as u64);
            let xs: Vec<f64> = (0..n)
                .map(|_| residual_sample(&law, elapsed, &mut rng).unwrap())
                .collect();
            let d = ks_statistic(xs, |t| 1.0 - survival_unchecked(&law, elapsed, t));
            assert!(d < critical, "{law:?} at {elapsed}: D = {d}");
        }
    }

    fn variable_law() -> impl Strategy<Value = (DelayLaw, f64)> {
        prop_oneof![
            (0i64..4, 1i64..4, 0.0f64..1.0).prop_map(|(l, w, frac)| {
                let law = DelayLaw::uniform(l, l + w);
                (law, frac * (l + w) as f64 * 0.999)
            }),
            (0i64..4, 0.2f64..3.0, 0.0f64..6.0)
                .prop_map(|(l, r, e)| (DelayLaw::shifted_exponential(l, r), e)),
        ]
    }

    proptest! {
        #[test]
        fn density_integrates_to_one((law, elapsed) in variable_law()) {
            let (lo, hi) = residual_support(&law, elapsed).unwrap();
            let hi = if hi.is_finite() { hi } else { lo + 60.0 / law.rate_f64() };
            let mut total = 0.0;
            // integrate piecewise; the density is smooth on [lo, hi]
            let pieces = 64;
            let w = (hi - lo) / pieces as f64;
            for i in 0..pieces {
                let a = lo + i as f64 * w;
                let b = if i + 1 == pieces { hi } else { lo + (i + 1) as f64 * w };
                total += simpson(|t| density_unchecked(&law, elapsed, t), a, b, 200);
            }
            prop_assert!((total - 1.0).abs() < 1e-9, "total {}", total);
        }

        #[test]
        fn survival_is_one_minus_cdf((law, elapsed) in variable_law(), frac in 0.0f64..1.0) {
            let (lo, hi) = residual_support(&law, elapsed).unwrap();
            let hi = if hi.is_finite() { hi } else { lo + 10.0 };
            let t = frac * hi;
            let mut cdf = 0.0;
            if t > lo {
                cdf = simpson(|x| density_unchecked(&law, elapsed, x), lo, t, 2000);
            }
            let s = residual_survival(&law, elapsed, t).unwrap();
            prop_assert!((s - (1.0 - cdf)).abs() < 1e-9);
            let s_later = residual_survival(&law, elapsed, t + 0.1).unwrap();
            prop_assert!(s_later <= s);
        }
    }
}

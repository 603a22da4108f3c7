//! Expected waiting time `W` and one-step winner probabilities, by
//! quadrature of the timing race.
//!
//! With `T` the earliest fixed deadline and `S(t)` the product of the
//! residual survival functions of the scheduled variable events,
//! `W = ∫₀ᵀ t·f(t) dt + T·S(T)` where `f = −S'`.

use crate::delay::{density_unchecked, support_unchecked, survival_unchecked};
use crate::model::{EventId, EventSet, GsmpModel};
use crate::simulator::Configuration;

const TOLERANCE: f64 = 1e-12;
const MAX_DEPTH: u32 = 40;

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of a function smooth on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, fa, b, fb, m, fm, whole, tol, MAX_DEPTH)
}

/// The timing race from one configuration.
struct Race<'a> {
    model: &'a GsmpModel,
    cfg: &'a Configuration,
    variable: Vec<EventId>,
    deadline: f64,
    first_fixed: EventSet,
}

impl<'a> Race<'a> {
    fn new(model: &'a GsmpModel, cfg: &'a Configuration) -> Self {
        let sched = model.scheduled(cfg.state);
        let mut deadline = f64::INFINITY;
        let mut first_fixed = EventSet::empty();
        let mut variable = Vec::new();
        for e in sched.iter() {
            let law = &model.event(e).law;
            let v = cfg.value(e).unwrap_or(0.0);
            if law.is_fixed() {
                let rem = law.lower_f64() - v;
                if rem < deadline {
                    deadline = rem;
                    first_fixed = EventSet::singleton(e);
                } else if rem == deadline {
                    first_fixed.insert(e);
                }
            } else {
                variable.push(e);
            }
        }
        Race {
            model,
            cfg,
            variable,
            deadline,
            first_fixed,
        }
    }

    fn elapsed(&self, e: EventId) -> f64 {
        self.cfg.value(e).unwrap_or(0.0)
    }

    fn survival(&self, t: f64) -> f64 {
        self.variable
            .iter()
            .map(|&c| survival_unchecked(&self.model.event(c).law, self.elapsed(c), t))
            .product()
    }

    /// `f_e(t) · ∏_{c ≠ e} S_c(t)`.
    fn win_density(&self, e: EventId, t: f64) -> f64 {
        let mut p = density_unchecked(&self.model.event(e).law, self.elapsed(e), t);
        if p == 0.0 {
            return 0.0;
        }
        for &c in &self.variable {
            if c != e {
                p *= survival_unchecked(&self.model.event(c).law, self.elapsed(c), t);
            }
        }
        p
    }

    /// Breakpoints where some density or survival changes form, capped
    /// by the deadline and by the earliest exhausted support; the second
    /// value is that upper integration limit.
    fn pieces(&self) -> (Vec<f64>, f64) {
        let mut upper = self.deadline;
        let mut points = vec![0.0];
        for &c in &self.variable {
            let (lo, hi) = support_unchecked(&self.model.event(c).law, self.elapsed(c));
            points.push(lo);
            upper = upper.min(hi);
        }
        let mut points: Vec<f64> = points.into_iter().filter(|&p| p < upper).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        if upper.is_finite() {
            points.push(upper);
        }
        (points, upper)
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let (points, _) = self.pieces();
        points
            .windows(2)
            .map(|w| adaptive_simpson(&f, w[0], w[1], TOLERANCE))
            .sum()
    }

    /// Last breakpoint and total exponential rate when the race is
    /// unbounded; beyond it every variable event is memoryless.
    fn tail(&self) -> Option<(f64, f64)> {
        let (points, upper) = self.pieces();
        if upper.is_finite() {
            return None;
        }
        let rate: f64 = self
            .variable
            .iter()
            .map(|&c| self.model.event(c).law.rate_f64())
            .sum();
        Some((*points.last().unwrap(), rate))
    }
}

/// `W` at `cfg`; infinite if no event can ever occur.
pub fn expected_waiting_time(model: &GsmpModel, cfg: &Configuration) -> f64 {
    let race = Race::new(model, cfg);
    if race.variable.is_empty() {
        return race.deadline;
    }
    let t_f = |t: f64| t * race.variable.iter().map(|&e| race.win_density(e, t)).sum::<f64>();
    let mut w = race.integrate(t_f);
    match race.tail() {
        Some((b, rate)) => w += race.survival(b) * (b + 1.0 / rate),
        None => {
            if race.deadline.is_finite() {
                w += race.deadline * race.survival(race.deadline);
            }
        }
    }
    w
}

/// Probability of each possible occurring set in one step from `cfg`.
pub fn winner_probabilities(model: &GsmpModel, cfg: &Configuration) -> Vec<(EventSet, f64)> {
    let race = Race::new(model, cfg);
    let tail = race.tail();
    let mut out: Vec<(EventSet, f64)> = race
        .variable
        .iter()
        .map(|&e| {
            let mut p = race.integrate(|t| race.win_density(e, t));
            if let Some((b, rate)) = tail {
                p += race.survival(b) * model.event(e).law.rate_f64() / rate;
            }
            (EventSet::singleton(e), p)
        })
        .collect();
    if race.deadline.is_finite() {
        out.push((race.first_fixed, race.survival(race.deadline)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::model::{DelayLaw, StateId};
    use proptest::prelude::*;

    fn one_state(laws: &[(&str, DelayLaw)]) -> GsmpModel {
        let names: Vec<&str> = laws.iter().map(|(n, _)| *n).collect();
        let mut b = GsmpModel::builder();
        for (n, l) in laws {
            b = b.event(n, *l);
        }
        b = b.state("S", &names);
        for n in &names {
            b = b.succ("S", &[n], &[("S", 1.0)]);
        }
        b.init(&[("S", 1.0)]).build().unwrap()
    }

    /// Independent route: `W = ∫₀ᵀ S(t) dt` by the trapezoid rule.
    fn survival_integral(model: &GsmpModel, cfg: &Configuration, horizon: f64) -> f64 {
        let race = Race::new(model, cfg);
        let end = race.deadline.min(horizon);
        let n = 200_000;
        let h = end / n as f64;
        (0..n)
            .map(|i| {
                let a = i as f64 * h;
                0.5 * h * (race.survival(a) + race.survival(a + h))
            })
            .sum()
    }

    #[test]
    fn uniform_mean() {
        let m = one_state(&[("u", DelayLaw::uniform(0, 1))]);
        let w = expected_waiting_time(&m, &Configuration::zero(&m, StateId(0)));
        assert!((w - 0.5).abs() < 1e-12);
    }

    #[test]
    fn uniform_with_deadline() {
        let m = one_state(&[("u", DelayLaw::uniform(0, 1)), ("d", DelayLaw::fixed(1))]);
        let cfg = Configuration::with_values(&m, StateId(0), &[(EventId(1), 0.5)]);
        let w = expected_waiting_time(&m, &cfg);
        // ∫₀^½ t dt + ½ · ½
        assert!((w - 0.375).abs() < 1e-12);
        assert!((survival_integral(&m, &cfg, f64::INFINITY) - 0.375).abs() < 1e-6);
    }

    #[test]
    fn fixed_only() {
        let m = one_state(&[("d", DelayLaw::fixed(3))]);
        let cfg = Configuration::with_values(&m, StateId(0), &[(EventId(0), 1.25)]);
        assert_eq!(expected_waiting_time(&m, &cfg), 1.75);
        assert_eq!(winner_probabilities(&m, &cfg), vec![(EventSet::singleton(EventId(0)), 1.0)]);
    }

    #[test]
    fn exponential_tail() {
        let m = one_state(&[
            ("x", DelayLaw::shifted_exponential(2, 0.5)),
            ("y", DelayLaw::shifted_exponential(0, 1.5)),
            ("u", DelayLaw::uniform(1, 4)),
        ]);
        let cfg = Configuration::with_values(&m, StateId(0), &[(EventId(0), 0.5), (EventId(2), 0.75)]);
        let w = expected_waiting_time(&m, &cfg);
        assert!((w - survival_integral(&m, &cfg, 3.25)).abs() < 1e-6);
        let only_exp = one_state(&[
            ("x", DelayLaw::shifted_exponential(2, 0.5)),
            ("y", DelayLaw::shifted_exponential(0, 1.5)),
        ]);
        let cfg = Configuration::with_values(&only_exp, StateId(0), &[(EventId(0), 0.5)]);
        let w = expected_waiting_time(&only_exp, &cfg);
        assert!((w - survival_integral(&only_exp, &cfg, 60.0)).abs() < 1e-6);
        let p: f64 = winner_probabilities(&only_exp, &cfg).iter().map(|x| x.1).sum();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn winner_probabilities_sum_to_one_on_catalog() {
        for key in library::catalog_keys() {
            let m = library::get_model(key).unwrap().model;
            let mut rng = crate::rng::task_rng(4, 0);
            let mut cfg = crate::simulator::initial_configuration(&m, &mut rng);
            for _ in 0..50 {
                let total: f64 = winner_probabilities(&m, &cfg).iter().map(|x| x.1).sum();
                assert!((total - 1.0).abs() < 1e-9, "{key}: {total}");
                let w = expected_waiting_time(&m, &cfg);
                let race = Race::new(&m, &cfg);
                assert!(w <= race.deadline + 1e-12);
                cfg = crate::simulator::step(&m, &cfg, &mut rng).unwrap().next;
            }
        }
    }

    proptest! {
        #[test]
        fn agrees_with_survival_integral(a in 0.0f64..0.99, b in 0.0f64..2.9, d in 0.0f64..0.99) {
            let m = one_state(&[
                ("e", DelayLaw::uniform(0, 1)),
                ("f", DelayLaw::uniform(2, 3)),
                ("g", DelayLaw::fixed(1)),
            ]);
            let cfg = Configuration::with_values(&m, StateId(0), &[(EventId(0), a), (EventId(1), b), (EventId(2), d)]);
            let w = expected_waiting_time(&m, &cfg);
            prop_assert!((w - survival_integral(&m, &cfg, f64::INFINITY)).abs() < 1e-6);
            prop_assert!(w <= 1.0 - d + 1e-12);
        }

        // W is continuous within a region: nudging valuations moves W by
        // at most a constant times the nudge.
        #[test]
        fn continuous_within_region(a in 0.01f64..0.49, b in 0.51f64..0.98, eps in 0.0f64..0.005) {
            let m = library::get_model("regions-demo").unwrap().model;
            let base = Configuration::with_values(&m, StateId(0), &[(EventId(0), a), (EventId(1), b)]);
            let moved = Configuration::with_values(&m, StateId(0), &[(EventId(0), a + eps), (EventId(1), b + eps)]);
            let dw = (expected_waiting_time(&m, &base) - expected_waiting_time(&m, &moved)).abs();
            prop_assert!(dw <= 4.0 * eps + 1e-9);
        }
    }
}

//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line before asserting.
//!
//! Run with `cargo test -p gsmp-cli --test acceptance -- --nocapture` to
//! see the lines.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use gsmp_core::analysis::{single_ticking_check, Witness};
use gsmp_core::estimate::{
    estimate_bscc_frequencies, expected_waiting_time, grid_invariant_measure, winner_probabilities,
    FrequencyBudget, GridSpec,
};
use gsmp_core::experiment::{oscillation, sink_plateau, sink_visits};
use gsmp_core::library::{self, get_model};
use gsmp_core::model::{DelayLaw, EventId, EventSet, GsmpModel, StateId};
use gsmp_core::regions::{build_region_graph, region_of, sample_in_region};
use gsmp_core::rng::task_rng;
use gsmp_core::simulator::{
    initial_configuration, simulate_run, step, Budget, CheckpointSchedule, Configuration, TargetSet,
};

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn model(key: &str) -> GsmpModel {
    get_model(key).unwrap().model
}

fn cfg(m: &GsmpModel, state: &str, values: &[(&str, f64)]) -> Configuration {
    let s = m.state_id(state).unwrap();
    let values: Vec<(EventId, f64)> = values.iter().map(|(e, v)| (m.event_id(e).unwrap(), *v)).collect();
    let c = Configuration::with_values(m, s, &values);
    assert!(c.is_consistent(m));
    c
}

fn catalog_target(key: &str) -> TargetSet {
    let entry = get_model(key).unwrap();
    let ids: Vec<StateId> = entry.target.iter().map(|s| entry.model.state_id(s).unwrap()).collect();
    TargetSet::new(&entry.model, &ids)
}

#[test]
fn criterion_01_kernel_fidelity() {
    let start = Instant::now();
    const SAMPLES: usize = 100_000;
    let cases: Vec<(GsmpModel, Configuration)> = {
        let demo = model("regions-demo");
        let fig1 = model("fig1");
        let fig2 = model("fig2-sink");
        let ntp = model("ntp");
        vec![
            (demo.clone(), cfg(&demo, "S", &[("e", 0.2), ("f", 1.9)])),
            (fig1.clone(), cfg(&fig1, "1-Transporting", &[("p", 0.3), ("t", 0.3), ("c", 0.55)])),
            (fig2.clone(), cfg(&fig2, "C-waiting", &[("p", 0.4), ("t", 0.4), ("t'", 0.0)])),
            (ntp.clone(), cfg(&ntp, "Q-sent", &[("response", 0.5), ("roundtrip_d", 0.2), ("stable_d", 60.0)])),
            (ntp.clone(), cfg(&ntp, "Init", &[("query", 0.25), ("stable_d", 99.5)])),
        ]
    };
    let mut worst = f64::INFINITY;
    let mut details = Vec::new();
    for (i, (m, c)) in cases.iter().enumerate() {
        let expected = winner_probabilities(m, c);
        let mut counts: BTreeMap<EventSet, u64> = BTreeMap::new();
        let mut rng = task_rng(2024, i as u64);
        for _ in 0..SAMPLES {
            *counts.entry(step(m, c, &mut rng).unwrap().occurring).or_insert(0) += 1;
        }
        let observed_total: u64 = counts.values().sum();
        let mut stat = 0.0;
        let mut categories = 0;
        for (set, p) in &expected {
            let e = p * SAMPLES as f64;
            let o = counts.get(set).copied().unwrap_or(0) as f64;
            if e > 0.0 {
                stat += (o - e).powi(2) / e;
                categories += 1;
            }
        }
        let unexpected: u64 = counts
            .iter()
            .filter(|(s, _)| !expected.iter().any(|(e, p)| e == *s && *p > 0.0))
            .map(|(_, n)| n)
            .sum();
        assert_eq!(observed_total, SAMPLES as u64);
        let p_value = if categories > 1 {
            1.0 - ChiSquared::new((categories - 1) as f64).unwrap().cdf(stat)
        } else {
            1.0
        };
        let p_value = if unexpected > 0 { 0.0 } else { p_value };
        worst = worst.min(p_value);
        details.push(format!("{p_value:.3}"));
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        worst > 0.001 && elapsed < Duration::from_secs(60),
        &format!("chi-square p-values [{}], {:.1}s", details.join(", "), elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_02_waiting_time() {
    const SAMPLES: usize = 100_000;
    let mut configs: Vec<(GsmpModel, Configuration)> = Vec::new();
    let keys = ["regions-demo", "fig1", "fig2-sink", "ntp", "chain-ticking"];
    let mut rng = task_rng(77, 0);
    for (i, key) in keys.iter().cycle().take(10).enumerate() {
        let m = model(key);
        let mut c = initial_configuration(&m, &mut rng);
        for _ in 0..(3 + 7 * i) {
            c = step(&m, &c, &mut rng).unwrap().next;
        }
        configs.push((m, c));
    }
    let mut worst_z: f64 = 0.0;
    for (i, (m, c)) in configs.iter().enumerate() {
        let w = expected_waiting_time(m, c);
        let mut rng = task_rng(78, i as u64);
        let dwells: Vec<f64> = (0..SAMPLES).map(|_| step(m, c, &mut rng).unwrap().dwell).collect();
        let mean = dwells.iter().sum::<f64>() / SAMPLES as f64;
        let var = dwells.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (SAMPLES - 1) as f64;
        let se = (var / SAMPLES as f64).sqrt();
        let z = if se > 0.0 {
            (mean - w).abs() / se
        } else if (mean - w).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
    }
    let m = GsmpModel::builder()
        .event("u", DelayLaw::uniform(0, 1))
        .event("d", DelayLaw::fixed(1))
        .state("S", &["u", "d"])
        .succ("S", &["u"], &[("S", 1.0)])
        .succ("S", &["d"], &[("S", 1.0)])
        .init(&[("S", 1.0)])
        .build()
        .unwrap();
    let analytic = expected_waiting_time(&m, &cfg(&m, "S", &[("u", 0.0), ("d", 0.5)]));
    verdict(
        2,
        worst_z <= 3.0 && (analytic - 0.375).abs() < 1e-6,
        &format!("max |W - mean dwell| = {worst_z:.2} SE over 10 configurations; analytic case W = {analytic:.9}"),
    );
}

#[test]
fn criterion_03_renewal_oracle() {
    let m = model("renewal-2");
    let target = TargetSet::single(&m, m.state_id("A").unwrap());
    let mut rng = task_rng(3, 0);
    let (stats, _) =
        simulate_run(&m, Budget::Steps(1_000_000), &target, &CheckpointSchedule::Every(1000), &mut rng).unwrap();
    let c = stats.partial_c();
    let even_exact = stats
        .checkpoints
        .iter()
        .filter(|cp| cp.step % 2 == 0)
        .all(|cp| cp.partial_d == 0.5);
    verdict(
        3,
        (c - 0.2).abs() <= 0.01 && even_exact && stats.steps == 1_000_000,
        &format!("c(A) = {c:.5} over 10^6 steps; d(A) = 0.5 exactly at all {} even checkpoints", stats.checkpoints.len()),
    );
}

const GOLDEN: [(&str, usize, usize); 7] = [
    ("fig1-producer-consumer", 10, 12),
    ("fig2-sink", 8, 11),
    ("fig2-cycled", 7, 10),
    ("ntp", 26, 47),
    ("renewal-2", 2, 2),
    ("regions-demo", 5, 9),
    ("chain-ticking", 4, 4),
];

#[test]
fn criterion_04_region_graph_soundness() {
    const MAX_DRAWS: usize = 20_000;
    let mut failures = Vec::new();
    let mut edges_checked = 0;
    for (key, vertices, edges) in GOLDEN {
        let m = model(key);
        let g = build_region_graph(&m).unwrap();
        let again = build_region_graph(&m).unwrap();
        if (g.num_vertices(), g.num_edges()) != (vertices, edges) || g.regions != again.regions || g.edges != again.edges {
            failures.push(format!("{key}: golden counts ({}, {})", g.num_vertices(), g.num_edges()));
        }
        let mut rng = task_rng(4, 0);
        for (v, region) in g.regions.iter().enumerate() {
            let expected: BTreeSet<usize> = g.successors(v).iter().copied().collect();
            for k in 0..3 {
                let start = sample_in_region(&m, region, &mut rng);
                assert_eq!(region_of(&m, &start), *region);
                let mut seen = BTreeSet::new();
                let mut draws = 0;
                while seen.len() < expected.len() && draws < MAX_DRAWS {
                    let next = step(&m, &start, &mut rng).unwrap().next;
                    match g.find(&region_of(&m, &next)) {
                        Some(w) if expected.contains(&w) => {
                            seen.insert(w);
                        }
                        _ => failures.push(format!("{key}: off-graph successor of region {v}")),
                    }
                    draws += 1;
                }
                if seen != expected {
                    failures.push(format!("{key}: region {v} witness {k} reached {seen:?} of {expected:?}"));
                }
            }
            edges_checked += expected.len();
        }
        // A long run never leaves the graph.
        let mut c = initial_configuration(&m, &mut rng);
        let mut at = g.find(&region_of(&m, &c));
        for _ in 0..10_000 / GOLDEN.len() {
            c = step(&m, &c, &mut rng).unwrap().next;
            let next = g.find(&region_of(&m, &c));
            match (at, next) {
                (Some(a), Some(b)) if g.successors(a).contains(&b) => {}
                _ => failures.push(format!("{key}: run left the graph")),
            }
            at = next;
        }
    }
    failures.dedup();
    verdict(
        4,
        failures.is_empty(),
        &format!("{edges_checked} edges witnessed from 3 configurations each, golden counts stable {failures:?}"),
    );
}

#[test]
fn criterion_05_classifier() {
    let mut ok = true;
    let mut notes = Vec::new();
    for key in ["fig1", "fig2"] {
        let v = single_ticking_check(&model(key));
        let good = !v.single_ticking && v.witness == Witness::SelfLoops(vec!["p".into(), "c".into()]);
        ok &= good;
        notes.push(format!("{key}={}", v.single_ticking));
    }
    let exponential = GsmpModel::builder()
        .event("x", DelayLaw::shifted_exponential(1, 2.0))
        .event("u", DelayLaw::uniform(0, 2))
        .state("S", &["x", "u"])
        .state("T", &["u"])
        .succ("S", &["x"], &[("T", 1.0)])
        .succ("S", &["u"], &[("S", 0.5), ("T", 0.5)])
        .succ("T", &["u"], &[("S", 1.0)])
        .init(&[("S", 1.0)])
        .build()
        .unwrap();
    let fixed_free = [
        ("renewal-2", model("renewal-2")),
        ("chain-ticking", model("chain-ticking")),
        ("regions-demo", model("regions-demo")),
        ("exponential", exponential),
    ];
    for (name, m) in fixed_free {
        let v = single_ticking_check(&m);
        ok &= v.single_ticking;
        notes.push(format!("{name}={}", v.single_ticking));
    }
    verdict(5, ok, &format!("single-ticking {}; fig1/fig2 witness self-loops [p, c]", notes.join(", ")));
}

#[test]
fn criterion_06_oscillation() {
    let start = Instant::now();
    let fig1 = oscillation(&get_model("fig1").unwrap(), 200, 100_000, 6).unwrap();
    let control = oscillation(&get_model("renewal-2").unwrap(), 200, 100_000, 6).unwrap();
    let above = fig1.fraction_spread_above(0.05);
    let below = control.fraction_spread_below(0.01);
    let elapsed = start.elapsed();
    verdict(
        6,
        above >= 0.01 && below >= 0.99 && elapsed < Duration::from_secs(600),
        &format!(
            "fig1 late spread > 0.05 in {:.1}% of runs; renewal-2 spread < 0.01 in {:.1}%; {:.0}s",
            100.0 * above,
            100.0 * below,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_07_sink_plateau() {
    let start = Instant::now();
    let named = get_model("fig2-sink").unwrap();
    let g = build_region_graph(&named.model).unwrap();
    let r = sink_plateau(&named, &g, 10_000, 1 << 16, 7).unwrap();
    let elapsed = start.elapsed();
    verdict(
        7,
        r.ci_upper < 1.0 && r.reach.plateau_horizon.is_some() && elapsed < Duration::from_secs(600),
        &format!(
            "sink reach {:.4}, upper 95% bound {:.4}, plateau from {:?} steps; point estimate <= 0.991: {}; {:.0}s",
            r.value,
            r.ci_upper,
            r.reach.plateau_horizon,
            r.consistent_with_bound,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_08_cycled_sink() {
    let named = get_model("fig2-cycled").unwrap();
    let g = build_region_graph(&named.model).unwrap();
    let r = sink_visits(&named, 1000, 1 << 16, 8).unwrap();
    verdict(
        8,
        g.is_strongly_connected() && r.median <= 20,
        &format!(
            "one SCC: {}; median Sink visits {} at 2^16 attempts ({} at half horizon), max {}",
            g.is_strongly_connected(),
            r.median,
            r.median_half,
            r.max
        ),
    );
}

#[test]
fn criterion_09_grid_vs_monte_carlo() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for key in ["renewal-2", "chain-ticking"] {
        let m = model(key);
        let g = build_region_graph(&m).unwrap();
        let target = catalog_target(key);
        let spec = GridSpec {
            truncation: 20,
            ..GridSpec::default()
        };
        let grid = grid_invariant_measure(&m, &g, 0, &target, &spec, 9).unwrap();
        let entry = initial_configuration(&m, &mut task_rng(9, 0));
        let budget = FrequencyBudget {
            steps: 400_000,
            ..FrequencyBudget::default()
        };
        let (d, c) = estimate_bscc_frequencies(&m, &entry, &target, &budget, 9).unwrap();
        let dd = (grid.d.value - d.value).abs();
        let dc = (grid.c.value - c.value).abs();
        worst = worst.max(dd).max(dc);
        notes.push(format!(
            "{key}: d grid {:.4} mc {:.4}, c grid {:.4} mc {:.4}",
            grid.d.value, d.value, grid.c.value, c.value
        ));
    }
    let elapsed = start.elapsed();
    verdict(
        9,
        worst <= 0.02 && elapsed < Duration::from_secs(300),
        &format!("{}; {:.0}s", notes.join("; "), elapsed.as_secs_f64()),
    );
}

fn run_gsmp(args: &[&str], workers: usize, out: &PathBuf) {
    let status = Command::new(env!("CARGO_BIN_EXE_gsmp"))
        .args(args)
        .arg("--workers")
        .arg(workers.to_string())
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "gsmp {args:?} failed");
}

#[test]
fn criterion_10_determinism() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("determinism");
    std::fs::create_dir_all(&dir).unwrap();
    let trace = |w: usize| dir.join(format!("trace-{w}.csv")).to_string_lossy().into_owned();
    let (t1, t4) = (trace(1), trace(4));
    let commands: Vec<(&str, Vec<Vec<&str>>)> = vec![
        ("simulate", vec![
            vec!["simulate", "ntp", "--seed", "5", "--steps", "20000", "--trace", &t1],
            vec!["simulate", "ntp", "--seed", "5", "--steps", "20000", "--trace", &t4],
        ]),
        ("estimate-mc", vec![vec![
            "estimate", "fig2-sink", "--seed", "5", "--reach-runs", "500", "--horizon", "4096", "--steps", "20000",
        ]]),
        ("estimate-grid", vec![vec!["estimate", "chain-ticking", "--seed", "5", "--method", "grid", "--draws", "512"]]),
        ("oscillation", vec![vec!["experiment", "oscillation", "--seed", "5", "--runs", "16", "--horizon", "2000"]]),
        ("sink-plateau", vec![vec!["experiment", "sink-plateau", "--seed", "5", "--runs", "400", "--horizon", "2048"]]),
        ("sink-visits", vec![vec!["experiment", "sink-visits", "--seed", "5", "--runs", "64", "--horizon", "2048"]]),
    ];
    let mut mismatches = Vec::new();
    for (name, variants) in &commands {
        let args1 = &variants[0];
        let args4 = variants.get(1).unwrap_or(&variants[0]);
        let out1 = dir.join(format!("{name}-1.json"));
        let out4 = dir.join(format!("{name}-4.json"));
        run_gsmp(args1, 1, &out1);
        run_gsmp(args4, 4, &out4);
        if std::fs::read(&out1).unwrap() != std::fs::read(&out4).unwrap() {
            mismatches.push(name.to_string());
        }
    }
    if std::fs::read(&t1).unwrap() != std::fs::read(&t4).unwrap() {
        mismatches.push("simulate trace".into());
    }
    verdict(
        10,
        mismatches.is_empty(),
        &format!("{} stochastic commands byte-identical across 1 and 4 workers {mismatches:?}", commands.len()),
    );
}

#[test]
fn catalog_golden_counts_cover_every_entry() {
    let keys: BTreeSet<&str> = GOLDEN.iter().map(|g| g.0).collect();
    assert_eq!(keys, library::catalog_keys().iter().copied().collect());
}

//! Command implementations.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde_json::{json, Map, Value};

use gsmp_core::analysis::{classify, summarize_bsccs};
use gsmp_core::error::{EstimateError, FormatError, RegionError};
use gsmp_core::estimate::{
    estimate_bscc_frequencies, estimate_reach_probabilities, grid_invariant_measure,
    FrequencyBudget, FrequencyEstimate, GridSpec, ReachBudget, ReachEstimate, RATE_CAVEAT,
};
use gsmp_core::experiment::{oscillation, sink_plateau, sink_visits};
use gsmp_core::format::parse_model_unchecked;
use gsmp_core::library::{self, NamedModel};
use gsmp_core::model::{validate_model, GsmpModel, StateId, UpperBound};
use gsmp_core::regions::{build_region_graph, canonical_representative, region_listing, to_dot, RegionGraph};
use gsmp_core::rng::{derive_seed, task_rng};
use gsmp_core::simulator::{
    initial_configuration, simulate_from, write_checkpoints_csv, Budget, CheckpointSchedule,
    Configuration, TargetSet, TraceWriter,
};

use crate::output::{self, Outcome};
use crate::{EstimateArgs, EstimateMethod, ExperimentArgs, ExperimentName, RegionsArgs, SimulateArgs};

/// A model with its catalog entry, if it came from the catalog.
struct Loaded {
    name: String,
    model: GsmpModel,
    entry: Option<NamedModel>,
}

fn read_source(source: &str) -> anyhow::Result<Result<(String, GsmpModel), NamedModel>> {
    let path = Path::new(source);
    if path.exists() || source.ends_with(".toml") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {source}"))?;
        let model = parse_model_unchecked(&text).with_context(|| format!("parsing {source}"))?;
        return Ok(Ok((source.to_string(), model)));
    }
    library::get_model(source).map(Err).map_err(|e| {
        anyhow!("{e}; known keys: {}", library::catalog_keys().join(", "))
    })
}

fn load(source: &str) -> anyhow::Result<Loaded> {
    match read_source(source)? {
        Ok((name, model)) => {
            let model = model
                .validated()
                .map_err(|report| FormatError::Invalid(report))
                .with_context(|| format!("validating {source}"))?;
            Ok(Loaded {
                name,
                model,
                entry: None,
            })
        }
        Err(entry) => Ok(Loaded {
            name: entry.key.to_string(),
            model: entry.model.clone(),
            entry: Some(entry),
        }),
    }
}

fn targets(loaded: &Loaded, requested: &[String]) -> anyhow::Result<(TargetSet, Vec<String>)> {
    let names: Vec<String> = if requested.is_empty() {
        match &loaded.entry {
            Some(e) => e.target.iter().map(|s| s.to_string()).collect(),
            None => bail!("--target is required for models outside the catalog"),
        }
    } else {
        requested.to_vec()
    };
    let ids = names
        .iter()
        .map(|n| {
            loaded
                .model
                .state_id(n)
                .ok_or_else(|| anyhow!("unknown target state {n:?}"))
        })
        .collect::<anyhow::Result<Vec<StateId>>>()?;
    Ok((TargetSet::new(&loaded.model, &ids), names))
}

fn named_valuation(model: &GsmpModel, cfg: &Configuration) -> Value {
    let mut m = Map::new();
    for e in model.event_ids() {
        if let Some(v) = cfg.value(e) {
            m.insert(model.event_name(e).to_string(), json!(v));
        }
    }
    json!({ "state": model.state_name(cfg.state), "valuation": m })
}

fn fmt_estimate(e: &FrequencyEstimate) -> String {
    format!("{:.6} ± {:.6} [{:.6}, {:.6}]", e.value, e.ci_half_width, e.ci_lower, e.ci_upper)
}

pub fn catalog() -> anyhow::Result<Outcome> {
    let mut human = String::new();
    let mut entries = Vec::new();
    for key in library::catalog_keys() {
        let e = library::get_model(key)?;
        writeln!(human, "{key:24} {}", e.provenance)?;
        entries.push(json!({
            "key": key,
            "provenance": e.provenance,
            "target": e.target,
            "expected_properties": e.expected_properties,
        }));
    }
    Ok(Outcome::new(human, json!({ "catalog": entries })))
}

pub fn validate(args: &crate::ModelArg) -> anyhow::Result<Outcome> {
    let (name, model) = match read_source(&args.model)? {
        Ok(pair) => pair,
        Err(entry) => (entry.key.to_string(), entry.model),
    };
    let report = validate_model(&model);
    let violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    let mut missing: Vec<String> = Vec::new();
    let mut regions_checked = false;
    let mut human = String::new();
    if report.is_valid() {
        let model = model.validated().map_err(FormatError::Invalid)?;
        match build_region_graph(&model) {
            Ok(_) => regions_checked = true,
            Err(RegionError::MissingSuccessors(gaps)) => {
                regions_checked = true;
                missing = gaps;
            }
            Err(e) => writeln!(human, "successor rows not checked: {e}")?,
        }
    }
    let valid = violations.is_empty() && missing.is_empty();
    if valid {
        writeln!(human, "{name}: valid")?;
    } else {
        writeln!(human, "{name}: invalid")?;
        for v in &violations {
            writeln!(human, "  {v}")?;
        }
        for m in &missing {
            writeln!(human, "  missing succ row: {m}")?;
        }
    }
    let mut out = Outcome::new(
        human,
        json!({
            "model": name,
            "valid": valid,
            "violations": violations,
            "missing_successors": missing,
            "successors_checked": regions_checked,
        }),
    );
    out.failed = !valid;
    Ok(out)
}

pub fn info(source: &str) -> anyhow::Result<Outcome> {
    let l = load(source)?;
    let m = &l.model;
    let mut human = String::new();
    writeln!(human, "{}: {} states, {} events, bound B = {}", l.name, m.num_states(), m.num_events(), m.bound())?;
    let mut events = Vec::new();
    for e in m.events() {
        let upper = match e.law.upper {
            UpperBound::Finite(u) => u.to_string(),
            UpperBound::Infinite => "inf".into(),
        };
        let rate = e.law.rate.map(|r| format!(", rate {r}")).unwrap_or_default();
        writeln!(human, "  event {:12} {} [{}, {}]{rate}", e.name, e.law.kind, e.law.lower, upper)?;
        events.push(json!({
            "name": e.name,
            "kind": e.law.kind,
            "lower": e.law.lower.to_string(),
            "upper": upper,
            "rate": e.law.rate,
        }));
    }
    let mut states = Vec::new();
    for s in m.state_ids() {
        let sched: Vec<&str> = m.scheduled(s).iter().map(|e| m.event_name(e)).collect();
        writeln!(human, "  state {:16} {{{}}}", m.state_name(s), sched.join(", "))?;
        states.push(json!({ "name": m.state_name(s), "scheduled": sched }));
    }
    let mut doc = json!({
        "model": l.name,
        "bound": m.bound(),
        "events": events,
        "states": states,
        "succ_rows": m.succ_rows().len(),
    });
    if let Some(e) = &l.entry {
        writeln!(human, "provenance: {}", e.provenance)?;
        for p in &e.expected_properties {
            writeln!(human, "  expected {}: {} ({})", p.property, p.value, p.provenance)?;
        }
        doc["provenance"] = json!(e.provenance);
        doc["expected_properties"] = json!(e.expected_properties);
        doc["target"] = json!(e.target);
    }
    Ok(Outcome::new(human, doc))
}

pub fn regions(args: &RegionsArgs) -> anyhow::Result<Outcome> {
    let l = load(&args.model.model)?;
    let graph = build_region_graph(&l.model)?;
    let bsccs = summarize_bsccs(&l.model, &graph);
    let mut human = String::new();
    writeln!(
        human,
        "{}: {} regions, {} edges, {} BSCC(s){}",
        l.name,
        graph.num_vertices(),
        graph.num_edges(),
        bsccs.len(),
        if graph.is_strongly_connected() { ", strongly connected" } else { "" }
    )?;
    for b in &bsccs {
        writeln!(human, "  BSCC {}: {} regions, period {}, states {}", b.id, b.size, b.period, b.states.join(", "))?;
    }
    if let Some(path) = &args.dot {
        std::fs::write(path, to_dot(&l.model, &graph)).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut doc = json!({
        "model": l.name,
        "regions": graph.num_vertices(),
        "edges": graph.num_edges(),
        "strongly_connected": graph.is_strongly_connected(),
        "initial": graph.initial,
        "bsccs": bsccs,
    });
    if args.list {
        for r in region_listing(&l.model, &graph) {
            writeln!(human, "  [{}] {}", r.id, graph.regions[r.id].describe(&l.model))?;
        }
        doc["listing"] = json!(region_listing(&l.model, &graph));
        doc["edge_list"] = json!(graph
            .edges
            .iter()
            .map(|e| json!({ "from": e.from, "to": e.to }))
            .collect::<Vec<_>>());
    }
    Ok(Outcome::new(human, doc))
}

pub fn check(source: &str) -> anyhow::Result<Outcome> {
    let l = load(source)?;
    let (report, _) = classify(&l.model)?;
    let mut human = String::new();
    writeln!(human, "{}: single-ticking = {}", l.name, report.verdict.single_ticking)?;
    if let Some(t) = &report.verdict.ticking_event {
        writeln!(human, "  ticking event: {t}")?;
    }
    writeln!(human, "  witness: {}", serde_json::to_string(&report.verdict.witness)?)?;
    writeln!(human, "  {} regions, {} edges, {} BSCC(s)", report.regions, report.edges, report.bsccs.len())?;
    writeln!(human, "  {}", report.statement)?;
    let mut out = Outcome::new(human, json!({ "model": l.name, "report": report }));
    if !report.guarantee {
        out.warnings.push(report.statement.clone());
        out.guarantee_warning = true;
    }
    Ok(out)
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<Outcome> {
    let l = load(&args.model.model)?;
    let (target, target_names) = targets(&l, &args.target.target)?;
    let budget = match args.time {
        Some(t) => Budget::Time(t),
        None => Budget::Steps(args.steps),
    };
    let schedule = match args.every {
        Some(k) => CheckpointSchedule::Every(k),
        None => CheckpointSchedule::Geometric,
    };
    let mut rng = task_rng(args.seed, 0);
    let start = initial_configuration(&l.model, &mut rng);
    let mut trace = match &args.trace {
        Some(path) => {
            let mut w = TraceWriter::new(output::create(path)?, &l.model)?;
            w.record(0, Default::default(), &start)?;
            Some(w)
        }
        None => None,
    };
    let mut trace_error = None;
    let (stats, last) = simulate_from(&l.model, start, budget, &target, &schedule, &mut rng, |step, occ, cfg| {
        if let Some(w) = &mut trace {
            if let Err(e) = w.record(step, occ, cfg) {
                trace_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = trace_error {
        return Err(e.into());
    }
    if let Some(w) = &mut trace {
        w.flush()?;
    }
    if let Some(path) = &args.checkpoints {
        write_checkpoints_csv(output::create(path)?, &stats.checkpoints)?;
    }
    let mut human = String::new();
    writeln!(human, "{}: {} steps, time {:.6}", l.name, stats.steps, stats.time_total)?;
    writeln!(human, "  target {{{}}}", target_names.join(", "))?;
    writeln!(human, "  partial d = {:.6}", stats.partial_d())?;
    writeln!(human, "  partial c = {:.6}", stats.partial_c())?;
    let doc = json!({
        "model": l.name,
        "seed": args.seed,
        "target": target_names,
        "steps": stats.steps,
        "time_total": stats.time_total,
        "time_in_target": stats.time_in_target,
        "transitions_into_target": stats.transitions_into_target,
        "partial_d": stats.partial_d(),
        "partial_c": stats.partial_c(),
        "checkpoints": stats.checkpoints,
        "final": named_valuation(&l.model, &last),
    });
    Ok(Outcome::new(human, doc))
}

fn reach_history_csv(path: &Path, reach: &ReachEstimate) -> anyhow::Result<()> {
    let k = reach.per_bscc.len();
    let mut header = vec!["horizon".to_string()];
    header.extend((0..k).map(|b| format!("bscc_{b}")));
    header.push("not_absorbed".into());
    let rows: Vec<Vec<String>> = reach
        .history
        .iter()
        .map(|h| {
            let mut row = vec![h.horizon.to_string()];
            row.extend(h.per_bscc.iter().map(|v| v.to_string()));
            row.push(h.not_absorbed.to_string());
            row
        })
        .collect();
    output::write_csv(path, &header, &rows)
}

fn reach_document(reach: &ReachEstimate) -> Value {
    json!({
        "runs": reach.runs,
        "per_bscc": reach.per_bscc,
        "not_absorbed": reach.not_absorbed,
        "total": reach.total(),
        "plateau_horizon": reach.plateau_horizon,
        "rate_fit": reach.rate_fit,
        "off_graph": reach.off_graph,
        "history": reach.history,
    })
}

fn bscc_entry(model: &GsmpModel, graph: &RegionGraph, reach: &ReachEstimate, b: usize) -> (Configuration, &'static str) {
    match &reach.entries[b] {
        Some(cfg) => (cfg.clone(), "first absorbing configuration of the reach runs"),
        None => {
            let first = graph.labels.bsccs().nth(b).expect("BSCC index in range")[0];
            (
                canonical_representative(model, &graph.regions[first]).to_configuration(),
                "canonical representative (BSCC not reached by the reach runs)",
            )
        }
    }
}

pub fn estimate(args: &EstimateArgs) -> anyhow::Result<Outcome> {
    let l = load(&args.model.model)?;
    let (target, target_names) = targets(&l, &args.target.target)?;
    let (report, graph) = classify(&l.model)?;
    let mut human = String::new();
    let mut warnings = Vec::new();
    writeln!(human, "{}: {} regions, {} BSCC(s), target {{{}}}", l.name, report.regions, report.bsccs.len(), target_names.join(", "))?;
    writeln!(human, "  {}", report.statement)?;
    if !report.guarantee {
        warnings.push(report.statement.clone());
    }
    let mut doc = json!({
        "model": l.name,
        "seed": args.seed,
        "target": target_names,
        "guarantee": report.guarantee,
        "statement": report.statement,
        "caveat": RATE_CAVEAT,
    });
    match args.method {
        EstimateMethod::Mc => {
            doc["method"] = json!("monte-carlo");
            let reach_budget = ReachBudget {
                runs: args.reach_runs,
                min_horizon: 16.min(args.horizon),
                max_horizon: args.horizon,
                tolerance: args.plateau_tolerance,
            };
            let reach = estimate_reach_probabilities(&l.model, &graph, &reach_budget, derive_seed(args.seed, 0))?;
            if let Some(path) = &args.history {
                reach_history_csv(path, &reach)?;
            }
            writeln!(human, "  reach ({} runs, horizon {}):", reach.runs, args.horizon)?;
            for (b, e) in reach.per_bscc.iter().enumerate() {
                writeln!(human, "    BSCC {b}: {}", fmt_estimate(e))?;
            }
            writeln!(human, "    not yet absorbed: {:.6}", reach.not_absorbed.value)?;
            match reach.plateau_horizon {
                Some(h) => writeln!(human, "    plateau from horizon {h}")?,
                None => writeln!(human, "    no plateau within the horizon")?,
            }
            if reach.off_graph > 0 {
                warnings.push(format!("{} configurations fell outside the region graph", reach.off_graph));
            }
            let budget = FrequencyBudget {
                steps: args.steps,
                runs: args.runs,
                burn_in: args.burn_in,
                batches: args.batches,
                level: args.level,
            };
            let mut per_bscc = Vec::new();
            for (b, summary) in report.bsccs.iter().enumerate() {
                let (entry, source) = bscc_entry(&l.model, &graph, &reach, b);
                let (d, c) = estimate_bscc_frequencies(&l.model, &entry, &target, &budget, derive_seed(args.seed, 1 + b as u64))?;
                writeln!(human, "  BSCC {b} (period {}, states {}):", summary.period, summary.states.join(", "))?;
                writeln!(human, "    d = {}", fmt_estimate(&d))?;
                writeln!(human, "    c = {}", fmt_estimate(&c))?;
                per_bscc.push(json!({
                    "id": b,
                    "period": summary.period,
                    "states": summary.states,
                    "entry": named_valuation(&l.model, &entry),
                    "entry_source": source,
                    "d": d,
                    "c": c,
                }));
            }
            doc["reach"] = reach_document(&reach);
            doc["frequency_budget"] = json!(budget);
            doc["bsccs"] = json!(per_bscc);
        }
        EstimateMethod::Grid => {
            doc["method"] = json!("grid");
            let mut spec = GridSpec::for_model(&l.model);
            if let Some(n) = args.n {
                spec.truncation = n;
            }
            spec.draws_per_cell = args.draws;
            spec.refinement = args.refine;
            spec.tolerance = args.tolerance;
            spec.power_iterations = args.iterations;
            spec.force = args.force;
            let mut per_bscc = Vec::new();
            for b in 0..report.bsccs.len() {
                let g = match grid_invariant_measure(&l.model, &graph, b, &target, &spec, derive_seed(args.seed, 100 + b as u64)) {
                    Err(EstimateError::NotSingleTicking) => {
                        bail!("{}; pass --force to compute diagnostic values anyway", EstimateError::NotSingleTicking)
                    }
                    other => other?,
                };
                writeln!(human, "  BSCC {b}: {} cells, {} iterations, residual {:.2e}", g.cells.len(), g.iterations, g.residual)?;
                writeln!(human, "    d = {:.6}", g.d.value)?;
                writeln!(human, "    c = {:.6}", g.c.value)?;
                writeln!(human, "    dropped mass {:.2e}, period {}", g.dropped_mass, g.period)?;
                warnings.extend(g.warnings.iter().cloned());
                per_bscc.push(json!({
                    "id": b,
                    "d": g.d,
                    "c": g.c,
                    "cells": g.cells.len(),
                    "iterations": g.iterations,
                    "residual": g.residual,
                    "dropped_mass": g.dropped_mass,
                    "max_dropped_fraction": g.max_dropped_fraction,
                    "max_row_sum_error": g.max_row_sum_error,
                    "period": g.period,
                    "draws": g.draws,
                    "warnings": g.warnings,
                }));
            }
            doc["grid"] = json!(spec);
            doc["bsccs"] = json!(per_bscc);
        }
    }
    doc["warnings"] = json!(warnings);
    let mut out = Outcome::new(human, doc);
    out.guarantee_warning = !report.guarantee;
    out.warnings = warnings;
    Ok(out)
}

fn experiment_model(args: &ExperimentArgs, default: &str) -> anyhow::Result<NamedModel> {
    let key = args.model.as_deref().unwrap_or(default);
    library::get_model(key).map_err(|e| anyhow!("{e}; experiments run on catalog models"))
}

pub fn experiment(args: &ExperimentArgs) -> anyhow::Result<Outcome> {
    let mut human = String::new();
    let doc = match args.name {
        ExperimentName::Oscillation => {
            let named = experiment_model(args, "fig1-producer-consumer")?;
            let control = library::get_model("renewal-2")?;
            let runs = args.runs.unwrap_or(200);
            let attempts = args.horizon.unwrap_or(100_000);
            let main = oscillation(&named, runs, attempts, derive_seed(args.seed, 0))?;
            let ctrl = oscillation(&control, runs, attempts, derive_seed(args.seed, 1))?;
            writeln!(human, "oscillation: {runs} runs, {attempts} attempts, checkpoints {:?}", main.late_checkpoints)?;
            for r in [&main, &ctrl] {
                writeln!(
                    human,
                    "  {}: spread > 0.05 in {:.1}% of runs, < 0.01 in {:.1}%, max spread {:.4}, dominating-phase runs {:.1}%",
                    r.model,
                    100.0 * r.fraction_spread_above(0.05),
                    100.0 * r.fraction_spread_below(0.01),
                    r.max_spread,
                    100.0 * r.dominating_fraction
                )?;
            }
            if let Some(path) = &args.csv {
                let header = ["model", "run", "spread", "final_partial_c", "phases", "dominating_phases", "longest_phase_attempts"]
                    .map(String::from);
                let rows: Vec<Vec<String>> = [&main, &ctrl]
                    .iter()
                    .flat_map(|r| {
                        r.per_run.iter().map(move |x| {
                            vec![
                                r.model.clone(),
                                x.run.to_string(),
                                x.spread.to_string(),
                                x.final_partial_c.to_string(),
                                x.phases.to_string(),
                                x.dominating_phases.to_string(),
                                x.longest_phase_attempts.to_string(),
                            ]
                        })
                    })
                    .collect();
                output::write_csv(path, &header, &rows)?;
            }
            json!({
                "experiment": "oscillation",
                "seed": args.seed,
                "model": summary_of(&main),
                "control": summary_of(&ctrl),
                "runs": { "model": main.per_run, "control": ctrl.per_run },
            })
        }
        ExperimentName::SinkPlateau => {
            let named = experiment_model(args, "fig2-sink")?;
            let graph = build_region_graph(&named.model)?;
            let runs = args.runs.unwrap_or(10_000);
            let attempts = args.horizon.unwrap_or(1 << 16);
            let r = sink_plateau(&named, &graph, runs, attempts, derive_seed(args.seed, 0))?;
            if let Some(path) = &args.csv {
                reach_history_csv(path, &r.reach)?;
            }
            writeln!(human, "sink-plateau on {}: {runs} runs, {attempts} attempts", r.model)?;
            writeln!(human, "  sink reach = {:.6}, upper 95% bound {:.6}", r.value, r.ci_upper)?;
            match r.reach.plateau_horizon {
                Some(h) => writeln!(human, "  plateau from horizon {h} steps")?,
                None => writeln!(human, "  no plateau within the horizon")?,
            }
            writeln!(
                human,
                "  never-reach mass {:.6}: {}",
                1.0 - r.value,
                if r.consistent_with_bound { "consistent with a never-reach mass above 0.009" } else { "not consistent with a never-reach mass above 0.009" }
            )?;
            json!({
                "experiment": "sink-plateau",
                "seed": args.seed,
                "model": r.model,
                "runs": r.runs,
                "attempts": r.attempts,
                "sink_bscc": r.sink_bscc,
                "value": r.value,
                "ci_upper": r.ci_upper,
                "consistent_with_bound": r.consistent_with_bound,
                "reach": reach_document(&r.reach),
            })
        }
        ExperimentName::SinkVisits => {
            let named = experiment_model(args, "fig2-cycled")?;
            let graph = build_region_graph(&named.model)?;
            let runs = args.runs.unwrap_or(1000);
            let attempts = args.horizon.unwrap_or(1 << 16);
            let r = sink_visits(&named, runs, attempts, derive_seed(args.seed, 0))?;
            if let Some(path) = &args.csv {
                let header = ["run", "half_horizon_visits", "visits"].map(String::from);
                let rows: Vec<Vec<String>> = r
                    .visits
                    .iter()
                    .zip(&r.half_horizon_visits)
                    .enumerate()
                    .map(|(i, (v, h))| vec![i.to_string(), h.to_string(), v.to_string()])
                    .collect();
                output::write_csv(path, &header, &rows)?;
            }
            writeln!(human, "sink-visits on {}: {runs} runs, {} steps", r.model, r.steps)?;
            writeln!(human, "  region graph strongly connected: {}", graph.is_strongly_connected())?;
            writeln!(human, "  median visits {} (half horizon {}), max {}", r.median, r.median_half, r.max)?;
            json!({
                "experiment": "sink-visits",
                "seed": args.seed,
                "strongly_connected": graph.is_strongly_connected(),
                "report": r,
            })
        }
    };
    Ok(Outcome::new(human, doc))
}

fn summary_of(r: &gsmp_core::experiment::OscillationReport) -> Value {
    json!({
        "name": r.model,
        "runs": r.runs,
        "attempts": r.attempts,
        "steps": r.steps,
        "alpha": r.alpha,
        "late_checkpoints": r.late_checkpoints,
        "fraction_spread_above_0_05": r.fraction_spread_above(0.05),
        "fraction_spread_below_0_01": r.fraction_spread_below(0.01),
        "max_spread": r.max_spread,
        "dominating_fraction": r.dominating_fraction,
    })
}

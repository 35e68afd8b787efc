//! Seeded Monte-Carlo campaigns over the engine.

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::drift;
use super::problem::{build_problem, initial_state, noise_model, saddle_context, BuiltProblem, CriticalKind};
use super::record::{quantile, CampaignResult, SeedRecord, Value, VERSION};
use super::verify;
use crate::engine::{Recording, RunConfig, Trajectory};
use crate::{Error, Result};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "DSGD_WORKERS";

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Map `f` over the seeds on a bounded pool; output sorted by seed.
pub fn per_seed<F>(seeds: &[u64], f: F) -> Result<Vec<SeedRecord>>
where
    F: Fn(u64) -> Result<SeedRecord> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut out: Vec<SeedRecord> = pool.install(|| seeds.par_iter().map(|&s| f(s)).collect::<Result<_>>())?;
    out.sort_by_key(|r| r.seed);
    Ok(out)
}

/// Resolve and check everything a run needs without running it.
pub fn prepare(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    cfg.check()?;
    let built = build_problem(&cfg.problem)?;
    for s in cfg.seeds().into_iter().take(1) {
        initial_state(cfg, &built, s)?;
    }
    if matches!(cfg.kind, ExperimentKind::DriftStats | ExperimentKind::ManifoldVerify) {
        saddle_context(cfg, &built)?;
    }
    Ok(built)
}

fn run_seed(cfg: &ExperimentConfig, built: &BuiltProblem, seed: u64, recording: Recording) -> Result<Option<Trajectory>> {
    let x0 = initial_state(cfg, built, seed)?;
    let mut rc = RunConfig::new(cfg.steps, cfg.schedule, noise_model(cfg, seed));
    rc.recording = recording;
    rc.store_states = true;
    match built.problem.run(&x0, &rc) {
        Ok(t) => Ok(Some(t)),
        Err(Error::Diverged { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Run the configured campaign.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignResult> {
    let built = prepare(cfg)?;
    let seeds = cfg.seeds();
    let (cols, records) = match cfg.kind {
        ExperimentKind::Consensus => {
            let stride = (cfg.steps / 10_000).max(1);
            let recs = per_seed(&seeds, |seed| {
                let values = match run_seed(cfg, &built, seed, Recording::Every(stride))? {
                    None => vec![Value::Num(f64::NAN), Value::Int(-1), Value::Num(f64::INFINITY), Value::Int(1)],
                    Some(t) => {
                        let first = t
                            .records
                            .iter()
                            .find(|r| r.consensus_error < cfg.tolerances.consensus)
                            .map_or(-1, |r| r.step as i64);
                        vec![
                            Value::Num(t.last().consensus_error),
                            Value::Int(first),
                            Value::Num(t.sup_norm),
                            Value::Int(0),
                        ]
                    }
                };
                Ok(SeedRecord { seed, values })
            })?;
            (columns(&["terminal_consensus_error", "first_passage", "sup_norm", "diverged"]), recs)
        }
        ExperimentKind::CriticalPoint => {
            let recs = per_seed(&seeds, |seed| {
                let values = match run_seed(cfg, &built, seed, Recording::Geometric)? {
                    None => vec![
                        Value::Num(f64::NAN),
                        Value::Num(f64::NAN),
                        Value::Num(f64::NAN),
                        Value::Num(f64::INFINITY),
                        Value::Int(1),
                    ],
                    Some(t) => {
                        let last = t.last();
                        let x = last.state.as_ref().expect("states stored");
                        let dist = built.nearest_critical(x).map_or(f64::NAN, |(_, d)| d);
                        vec![
                            Value::Num(last.grad_norm),
                            Value::Num(dist),
                            Value::Num(last.consensus_error),
                            Value::Num(t.sup_norm),
                            Value::Int(0),
                        ]
                    }
                };
                Ok(SeedRecord { seed, values })
            })?;
            (
                columns(&["terminal_grad_norm", "distance", "consensus_error", "sup_norm", "diverged"]),
                recs,
            )
        }
        ExperimentKind::SaddleAvoidance => {
            let recs = per_seed(&seeds, |seed| {
                let values = match run_seed(cfg, &built, seed, Recording::Geometric)? {
                    None => vec![
                        Value::Text("diverged".into()),
                        Value::Num(f64::NAN),
                        Value::Num(f64::NAN),
                        Value::Num(f64::INFINITY),
                    ],
                    Some(t) => {
                        let last = t.last();
                        let x = last.state.as_ref().expect("states stored");
                        let mean = built.problem.mean(x);
                        let class = match built.nearest_critical(x) {
                            Some((c, d)) if d <= cfg.tolerances.ball => match c.kind {
                                CriticalKind::Saddle => "saddle",
                                CriticalKind::Minimum => "minimum",
                                CriticalKind::Maximum => "maximum",
                            },
                            _ => "other",
                        };
                        let to_saddle = built
                            .criticals
                            .iter()
                            .filter(|c| c.kind == CriticalKind::Saddle)
                            .map(|c| (&mean - &c.point).norm())
                            .fold(f64::NAN, f64::min);
                        vec![
                            Value::Text(class.into()),
                            Value::Num(to_saddle),
                            Value::Num(last.consensus_error),
                            Value::Num(t.sup_norm),
                        ]
                    }
                };
                Ok(SeedRecord { seed, values })
            })?;
            (columns(&["class", "distance_to_saddle", "consensus_error", "sup_norm"]), recs)
        }
        ExperimentKind::DriftStats => drift::run(cfg, &built, &seeds)?,
        ExperimentKind::ManifoldVerify => verify::run(cfg, &built, &seeds)?,
    };
    let mut result = CampaignResult {
        kind: cfg.kind,
        config_hash: cfg.hash(),
        version: VERSION.to_string(),
        columns: cols,
        records,
        aggregates: Vec::new(),
    };
    result.aggregates = aggregates(cfg, &result)?;
    Ok(result)
}

fn max_ignoring_nan(v: &[f64]) -> f64 {
    v.iter().cloned().filter(|x| !x.is_nan()).fold(f64::NEG_INFINITY, f64::max)
}

fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total.max(1) as f64
}

/// Aggregates recomputed from the records and the config alone.
pub fn aggregates(cfg: &ExperimentConfig, r: &CampaignResult) -> Result<Vec<(String, f64)>> {
    let n = r.records.len();
    let ceiling = cfg.tolerances.ceiling;
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut push = |k: &str, v: f64| out.push((k.to_string(), v));
    let sup = r.nums("sup_norm");
    if !sup.is_empty() {
        push("max_sup_norm", max_ignoring_nan(&sup));
        push("exceed_ceiling_count", sup.iter().filter(|&&s| !(s <= ceiling)).count() as f64);
    }
    match r.kind {
        ExperimentKind::Consensus => {
            let e = r.nums("terminal_consensus_error");
            let below = e.iter().filter(|&&x| x < cfg.tolerances.consensus).count();
            push("max_terminal_consensus_error", max_ignoring_nan(&e));
            push("median_terminal_consensus_error", quantile(&e, 0.5));
            push("below_tolerance_fraction", fraction(below, n));
            push("diverged_count", r.nums("diverged").iter().sum());
        }
        ExperimentKind::CriticalPoint => {
            let d = r.nums("distance");
            let within = d.iter().filter(|&&x| x < cfg.tolerances.distance).count();
            push("max_distance", max_ignoring_nan(&d));
            push("median_distance", quantile(&d, 0.5));
            push("within_tolerance_count", within as f64);
            push("within_tolerance_fraction", fraction(within, n));
            push("max_terminal_grad_norm", max_ignoring_nan(&r.nums("terminal_grad_norm")));
            push("diverged_count", r.nums("diverged").iter().sum());
        }
        ExperimentKind::SaddleAvoidance => {
            let classes: Vec<String> = r
                .column("class")
                .map(|c| c.iter().map(|v| v.text().to_string()).collect())
                .unwrap_or_default();
            for class in ["saddle", "minimum", "maximum", "other", "diverged"] {
                let k = classes.iter().filter(|c| *c == class).count();
                push(&format!("{class}_count"), k as f64);
                push(&format!("{class}_fraction"), fraction(k, n));
            }
        }
        ExperimentKind::DriftStats => out.extend(drift::aggregates(cfg, r)?),
        ExperimentKind::ManifoldVerify => out.extend(verify::aggregates(r)),
    }
    Ok(out)
}

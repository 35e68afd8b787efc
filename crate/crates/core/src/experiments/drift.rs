//! Drift diagnostics of `S_k = η(x(k), ζ_k)` near a saddle.
//!
//! Per seed: one main run from the configured start, and for every restart
//! step `k` a fresh run from the saddle over `[k, 2k]` recording `max S`.
//! The medians of those maxima over seeds fit a power law `c k^p`; the main
//! run is then checked for excursions above `c k^p` and returns below half
//! of it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::campaigns::per_seed;
use super::config::ExperimentConfig;
use super::problem::{initial_state, noise_model, saddle_context, BuiltProblem};
use super::record::{quantile, CampaignResult, SeedRecord, Value};
use crate::engine::{general_step, NoiseSource};
use crate::manifold::{ManifoldModel, ManifoldOptions};
use crate::{Error, Result, Vector};

/// Seed of the bootstrap resampler.
pub const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

struct SeedRun {
    drift_sum: f64,
    drift_count: u64,
    /// Step at which the main run left the validity ball, 0 if never.
    censored: u64,
    series: Vec<f64>,
    maxima: Vec<f64>,
}

fn excursion_column(k: u64) -> String {
    format!("excursion_k{k}")
}

/// Walk `x` through steps `from..to`, calling `visit(k, S_k)` until the
/// state leaves the validity ball. Returns the censoring step or 0.
fn walk(
    model: &ManifoldModel,
    built: &BuiltProblem,
    cfg: &ExperimentConfig,
    mut x: Vector,
    from: u64,
    to: u64,
    noise_seed: u64,
    mut visit: impl FnMut(u64, f64),
) -> Result<u64> {
    let p = &built.problem;
    let d = p.penalty().block_dim();
    let mut noise = NoiseSource::new(&noise_model(cfg, noise_seed), p.dim() / d, d, Some(p.projector().clone()));
    let s = &cfg.schedule;
    let mut zeta: f64 = (1..=from).map(|j| s.alpha(j)).sum();
    for k in from..to {
        let sk = match model.eta(&x, zeta) {
            Ok(v) => v,
            Err(Error::OutOfBall { .. }) => return Ok(k),
            Err(e) => return Err(e),
        };
        visit(k, sk);
        x = match general_step(&x, k, p.loss().as_ref(), p.penalty(), s, &mut noise) {
            Ok(v) => v,
            Err(Error::Diverged { .. }) => return Ok(k + 1),
            Err(e) => return Err(e),
        };
        zeta += s.alpha(k + 1);
    }
    Ok(0)
}

fn seed_run(model: &ManifoldModel, built: &BuiltProblem, cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let [lo, hi] = cfg.drift.band;
    let mut series = Vec::with_capacity(cfg.steps as usize);
    let x0 = initial_state(cfg, built, seed)?;
    let censored = walk(model, built, cfg, x0, 1, cfg.steps + 1, seed, |_, s| series.push(s))?;
    let (mut drift_sum, mut drift_count) = (0.0, 0);
    for (i, w) in series.windows(2).enumerate() {
        let k = i as u64 + 1;
        if k >= cfg.drift.burn_in && w[0] >= lo && w[0] <= hi {
            drift_sum += (w[1] - w[0]) / cfg.schedule.alpha(k);
            drift_count += 1;
        }
    }
    let mut maxima = Vec::with_capacity(cfg.drift.restarts.len());
    for (i, &k) in cfg.drift.restarts.iter().enumerate() {
        let mut best: f64 = 0.0;
        let start = model.context().x_star().clone();
        let noise_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64 + 1);
        walk(model, built, cfg, start, k, 2 * k, noise_seed, |_, s| best = best.max(s))?;
        maxima.push(best);
    }
    Ok(SeedRun {
        drift_sum,
        drift_count,
        censored,
        series,
        maxima,
    })
}

/// Least-squares `(slope, intercept)` of `log y` on `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &b)| b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn excursion_fit(restarts: &[u64], per_seed_maxima: &[Vec<f64>]) -> (f64, f64) {
    let ks: Vec<f64> = restarts.iter().map(|&k| k as f64).collect();
    let medians: Vec<f64> = (0..restarts.len())
        .map(|i| quantile(&per_seed_maxima.iter().map(|m| m[i]).collect::<Vec<_>>(), 0.5))
        .collect();
    let (slope, intercept) = loglog_fit(&ks, &medians);
    (slope, intercept.exp())
}

pub fn model_options(cfg: &ExperimentConfig) -> ManifoldOptions {
    let s = &cfg.schedule;
    let last = cfg.steps.max(2 * cfg.drift.restarts.iter().cloned().max().unwrap_or(0)) + 1;
    let zeta_max: f64 = (1..=last).map(|j| s.alpha(j)).sum();
    ManifoldOptions {
        t_start: cfg.manifold.t_start,
        t_max: cfg.manifold.t_max.max(zeta_max + 1.0),
        radius: cfg.manifold.radius,
        ..Default::default()
    }
}

pub fn run(cfg: &ExperimentConfig, built: &BuiltProblem, seeds: &[u64]) -> Result<(Vec<String>, Vec<SeedRecord>)> {
    let ctx = saddle_context(cfg, built)?;
    let model = ManifoldModel::build(ctx, model_options(cfg))?;
    let s_first = model.t_start();
    if s_first > cfg.schedule.alpha(1) + 1e-12 {
        return Err(Error::Config(format!(
            "manifold model starts at t = {s_first}, after the first clock time; set manifold.t_start"
        )));
    }
    // phase 1: the runs, kept in memory until the threshold is known
    let runs = std::sync::Mutex::new(Vec::new());
    per_seed(seeds, |seed| {
        let r = seed_run(&model, built, cfg, seed)?;
        runs.lock().unwrap().push((seed, r));
        Ok(SeedRecord { seed, values: vec![] })
    })?;
    let mut runs = runs.into_inner().unwrap();
    runs.sort_by_key(|(s, _)| *s);
    let maxima: Vec<Vec<f64>> = runs.iter().map(|(_, r)| r.maxima.clone()).collect();
    let (slope, coef) = excursion_fit(&cfg.drift.restarts, &maxima);
    let k_min = cfg.drift.restarts.iter().cloned().min().unwrap_or(1);
    let threshold = |k: u64| coef * (k as f64).powf(slope);
    // phase 2: classify each main run against the fitted threshold
    let mut records = Vec::with_capacity(runs.len());
    for (seed, r) in &runs {
        let first = r
            .series
            .iter()
            .enumerate()
            .map(|(i, &s)| (i as u64 + 1, s))
            .find(|&(k, s)| k >= k_min && s > threshold(k));
        let returned = first.is_some_and(|(k0, _)| {
            r.series
                .iter()
                .enumerate()
                .map(|(i, &s)| (i as u64 + 1, s))
                .any(|(k, s)| k > k0 && s < 0.5 * threshold(k))
        });
        let mut values = vec![
            Value::Num(r.drift_sum),
            Value::Int(r.drift_count as i64),
            Value::Int(r.censored as i64),
            Value::Int(first.is_some() as i64),
            Value::Int(returned as i64),
        ];
        values.extend(r.maxima.iter().map(|&m| Value::Num(m)));
        records.push(SeedRecord { seed: *seed, values });
    }
    let mut cols: Vec<String> = ["drift_sum", "drift_count", "censored_step", "exceeded", "returned"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(cfg.drift.restarts.iter().map(|&k| excursion_column(k)));
    Ok((cols, records))
}

/// Percentile bootstrap over seeds of the pooled ratio `Σ sum / Σ count`.
pub fn bootstrap_ratio_ci(sums: &[f64], counts: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let n = sums.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (mut s, mut c) = (0.0, 0.0);
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            s += sums[i];
            c += counts[i];
        }
        if c > 0.0 {
            stats.push(s / c);
        }
    }
    (quantile(&stats, 0.025), quantile(&stats, 0.975))
}

pub fn aggregates(cfg: &ExperimentConfig, r: &CampaignResult) -> Result<Vec<(String, f64)>> {
    let sums = r.nums("drift_sum");
    let counts = r.nums("drift_count");
    let total: f64 = counts.iter().sum();
    let mean = if total > 0.0 { sums.iter().sum::<f64>() / total } else { f64::NAN };
    let (lo, hi) = bootstrap_ratio_ci(&sums, &counts, cfg.drift.bootstrap, BOOTSTRAP_SEED);
    let mut maxima = vec![Vec::new(); r.records.len()];
    for &k in &cfg.drift.restarts {
        let col = r.nums(&excursion_column(k));
        if col.len() != maxima.len() {
            return Err(Error::Parse(format!("records lack column {}", excursion_column(k))));
        }
        for (m, v) in maxima.iter_mut().zip(col) {
            m.push(v);
        }
    }
    let (slope, coef) = excursion_fit(&cfg.drift.restarts, &maxima);
    let exceeded: f64 = r.nums("exceeded").iter().sum();
    let returned: f64 = r.nums("returned").iter().sum();
    let censored = r.nums("censored_step").iter().filter(|&&c| c > 0.0).count();
    Ok(vec![
        ("mean_drift".into(), mean),
        ("drift_ci_low".into(), lo),
        ("drift_ci_high".into(), hi),
        ("drift_samples".into(), total),
        ("excursion_exponent".into(), slope),
        ("excursion_expected_exponent".into(), 0.5 - cfg.schedule.tau_alpha),
        ("excursion_coefficient".into(), coef),
        ("exceeded_count".into(), exceeded),
        ("return_fraction".into(), if exceeded > 0.0 { returned / exceeded } else { f64::NAN }),
        ("censored_count".into(), censored as f64),
    ])
}

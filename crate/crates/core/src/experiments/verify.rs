//! The consolidated manifold battery: Picard residual, repulsion sweep and
//! rectified-field spectrum.

use super::campaigns::per_seed;
use super::config::ExperimentConfig;
use super::problem::{saddle_context, BuiltProblem};
use super::record::{CampaignResult, SeedRecord, Value};
use crate::manifold::{rectified_field_spectrum, repulsion_check, sample_ball, ManifoldModel, ManifoldOptions};
use crate::{Result, Vector};

pub fn model_options(cfg: &ExperimentConfig) -> ManifoldOptions {
    ManifoldOptions {
        t_start: cfg.manifold.t_start,
        t_max: cfg.manifold.t_max,
        radius: cfg.manifold.radius,
        ..Default::default()
    }
}

pub fn run(cfg: &ExperimentConfig, built: &BuiltProblem, seeds: &[u64]) -> Result<(Vec<String>, Vec<SeedRecord>)> {
    let ctx = saddle_context(cfg, built)?;
    let model = ManifoldModel::build(ctx, model_options(cfg))?;
    let m = &cfg.manifold;
    let t0 = model.t_start();
    let (residual, ratio) = if model.n_u() > 0 && model.n_s() > 0 && !model.is_flat() {
        let mut a = Vector::zeros(model.n_s());
        a[0] = model.radius() / 6.0;
        let sol = model.picard(t0, &a)?;
        (sol.residual, sol.ratios.iter().cloned().fold(0.0, f64::max))
    } else {
        (0.0, 0.0)
    };
    let tail = [model.t_max() - 2.0, model.t_max() - 1.0];
    let spec = rectified_field_spectrum(&model, &tail, 1e-3)?;
    let spectrum_ok = spec.rows.iter().all(|r| r.n_positive == model.n_u());
    let gap = spec.gap.unwrap_or(f64::NAN);
    let times: Vec<f64> = (0..m.times).map(|i| t0 + i as f64).collect();
    let records = per_seed(seeds, |seed| {
        let xs = sample_ball(&model, t0, m.sample_radius, m.samples, seed)?;
        let rep = repulsion_check(&model, &xs, &m.epsilons, &times)?;
        let pass = residual < 1e-6 && rep.c2_hat > 0.0 && rep.violations.is_empty() && spectrum_ok && (model.n_u() == 0 || gap > 0.0);
        Ok(SeedRecord {
            seed,
            values: vec![
                Value::Num(residual),
                Value::Num(ratio),
                Value::Num(rep.c2_hat),
                Value::Num(rep.c3_hat),
                Value::Int(rep.violations.len() as i64),
                Value::Num(gap),
                Value::Int(spectrum_ok as i64),
                Value::Int(pass as i64),
            ],
        })
    })?;
    let cols = [
        "picard_residual",
        "max_contraction",
        "c2_hat",
        "c3_hat",
        "violations",
        "w_gap",
        "spectrum_ok",
        "pass",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    Ok((cols, records))
}

pub fn aggregates(r: &CampaignResult) -> Vec<(String, f64)> {
    let pass: f64 = r.nums("pass").iter().sum();
    let fold = |name: &str, init: f64, f: fn(f64, f64) -> f64| r.nums(name).into_iter().fold(init, f);
    vec![
        ("pass_count".into(), pass),
        ("all_pass".into(), (pass as usize == r.records.len()) as i64 as f64),
        ("min_c2_hat".into(), fold("c2_hat", f64::INFINITY, f64::min)),
        ("max_c3_hat".into(), fold("c3_hat", 0.0, f64::max)),
        ("max_picard_residual".into(), fold("picard_residual", 0.0, f64::max)),
        ("total_violations".into(), r.nums("violations").iter().sum()),
        ("min_w_gap".into(), fold("w_gap", f64::INFINITY, f64::min)),
    ]
}

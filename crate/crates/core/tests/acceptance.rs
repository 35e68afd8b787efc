//! Acceptance run: every criterion prints one PASS/FAIL line with the
//! measured numbers and its wall time. Runs without the test harness so the
//! lines always reach the terminal.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dsgd::engine::{NoiseModel, Problem, Recording, RunConfig};
use dsgd::experiments::{build_problem, run_campaign, saddle_context, CampaignResult, ExperimentConfig, NoiseKey, SeedSpec};
use dsgd::flow::{discrete_vs_continuous_gap, integrate_dgf, solution_on_clock};
use dsgd::graph::{consensus_penalty, laplacian, Graph, PenaltyMatrix};
use dsgd::loss::{make_l1_regularized, Loss, LossOracle, Polynomial, SumLoss};
use dsgd::manifold::{
    off_constraint_slopes, rectified_field_spectrum, repulsion_check, restricted_limit, sample_ball, spectral_limits,
    tangency_slope, ManifoldModel, ManifoldOptions, SaddleContext,
};
use dsgd::schedule::{GammaCurve, Schedule};
use dsgd::Vector;

type Verdict = Result<(bool, String), String>;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn campaign(cfg: &ExperimentConfig) -> Result<CampaignResult, String> {
    run_campaign(cfg).map_err(|e| e.to_string())
}

fn agg(r: &CampaignResult, key: &str) -> f64 {
    r.aggregate(key).unwrap_or(f64::NAN)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// 1 ------------------------------------------------------------------------

fn random_graph(rng: &mut ChaCha8Rng) -> Graph {
    let n = rng.gen_range(2..=8);
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.gen_range(0..i), i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && rng.gen_bool(0.2) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

fn random_loss(rng: &mut ChaCha8Rng, d: usize) -> LossOracle {
    let a = Vector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0));
    match rng.gen_range(0..4) {
        0 => Arc::new(Polynomial::shifted_square(&a)),
        1 => {
            let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Arc::new(Polynomial::diagonal_quadratic(&c))
        }
        2 => Arc::new(Polynomial::shifted_square(&a) + Polynomial::norm_fourth(d).scaled(0.05)),
        _ => Arc::new(make_l1_regularized(Arc::new(Polynomial::shifted_square(&a)), rng.gen_range(0.05..0.5)).unwrap()),
    }
}

fn agentwise_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa9e7);
    let mut worst: f64 = 0.0;
    for tuple in 0..100u64 {
        let graph = random_graph(&mut rng);
        let d = rng.gen_range(1..=3);
        let n = graph.vertex_count();
        let losses = SumLoss::new((0..n).map(|_| random_loss(&mut rng, d)).collect()).map_err(err)?;
        let tau_alpha = rng.gen_range(0.7..=1.0);
        let schedule = Schedule::new(rng.gen_range(0.05..0.2), tau_alpha, rng.gen_range(0.2..1.0), rng.gen_range(0.55..tau_alpha - 0.05));
        let x0 = Vector::from_fn(n * d, |_, _| rng.gen_range(-1.0..1.0));
        let q = consensus_penalty(&laplacian(&graph), d).map_err(err)?;
        let general = Problem::general(Arc::new(losses.clone()), q).map_err(err)?;
        let network = Problem::distributed(losses, graph).map_err(err)?;
        let mut cfg = RunConfig::new(300, schedule, NoiseModel::gaussian(0.1, tuple));
        cfg.recording = Recording::Every(1);
        cfg.store_states = true;
        let a = general.run(&x0, &cfg).map_err(err)?;
        cfg.agentwise = true;
        let b = network.run(&x0, &cfg).map_err(err)?;
        if a.records.len() != b.records.len() {
            return Ok((false, format!("tuple {tuple}: record counts differ")));
        }
        for (ra, rb) in a.records.iter().zip(&b.records) {
            let (xa, xb) = (ra.state.as_ref().unwrap(), rb.state.as_ref().unwrap());
            worst = worst.max((xa - xb).amax());
        }
    }
    Ok((worst <= 1e-12, format!("100 tuples x 300 steps, max |general - agentwise| = {worst:.2e}")))
}

// 2 ------------------------------------------------------------------------

fn consensus() -> Verdict {
    let r = campaign(&config("consensus.toml"))?;
    let worst = agg(&r, "max_terminal_consensus_error");
    Ok((
        worst < 1e-3 && r.records.len() == 20,
        format!("{} seeds, max terminal consensus error {worst:.2e}", r.records.len()),
    ))
}

// 3 ------------------------------------------------------------------------

fn critical_points() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["quadratic.toml", "l1.toml"] {
        let r = campaign(&config(name))?;
        let within = agg(&r, "within_tolerance_count");
        ok &= within >= 19.0 && r.records.len() == 20;
        parts.push(format!("{name}: {within}/20 within 1e-2 (max {:.2e})", agg(&r, "max_distance")));
    }
    Ok((ok, parts.join("; ")))
}

// 4 ------------------------------------------------------------------------

fn saddle_avoidance() -> Verdict {
    let cfg = config("avoidance.toml");
    let r = campaign(&cfg)?;
    let at_saddle = agg(&r, "saddle_count");
    let noisy_ok = at_saddle == 0.0 && r.records.len() == 200;

    let mut on = cfg.clone();
    on.noise.kind = NoiseKey::None;
    on.seeds = SeedSpec::List(vec![1]);
    let r_on = campaign(&on)?;
    let on_ok = agg(&r_on, "saddle_count") == 1.0;

    let mut off = on.clone();
    off.init.point = vec![0.5, 0.01];
    let r_off = campaign(&off)?;
    let off_ok = agg(&r_off, "saddle_count") == 0.0 && agg(&r_off, "minimum_count") == 1.0;

    Ok((
        noisy_ok && on_ok && off_ok,
        format!(
            "noisy: {at_saddle}/{} at saddle, {} at a minimum; on-manifold control at saddle: {on_ok}; off-manifold control escaped: {off_ok}",
            r.records.len(),
            agg(&r, "minimum_count")
        ),
    ))
}

// 5 ------------------------------------------------------------------------

fn verify_model(cfg: &ExperimentConfig) -> Result<ManifoldModel, String> {
    let built = build_problem(&cfg.problem).map_err(err)?;
    let ctx = saddle_context(cfg, &built).map_err(err)?;
    ManifoldModel::build(ctx, dsgd::experiments::verify::model_options(cfg)).map_err(err)
}

fn with_loss(base: &ExperimentConfig, f: impl FnOnce(&mut ExperimentConfig)) -> ExperimentConfig {
    let mut c = base.clone();
    f(&mut c);
    c
}

fn repulsion() -> Verdict {
    let cubic = config("verify.toml");
    let quadratic = with_loss(&cubic, |c| {
        c.problem.loss = dsgd::experiments::LossKey::QuadraticSaddle;
        c.problem.curvature = vec![1.0, -1.0];
        c.problem.coupling = 0.0;
    });
    let eps = [1e-3, 3e-3, 1e-2];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, cfg) in [("quadratic", &quadratic), ("cubic", &cubic)] {
        let model = verify_model(cfg)?;
        let t0 = model.t_start();
        let times: Vec<f64> = (0..10).map(|i| t0 + i as f64).collect();
        let xs = sample_ball(&model, t0, 0.05, 500, 11).map_err(err)?;
        let rep = repulsion_check(&model, &xs, &eps, &times).map_err(err)?;
        let mut good = rep.c2_hat > 0.0 && rep.c2_hat.is_finite() && rep.violations.is_empty();
        if name == "quadratic" {
            good &= (rep.c2_hat - 1.0).abs() <= 0.05 && rep.c3_hat < 1e-6;
        }
        ok &= good;
        parts.push(format!(
            "{name} (M = {}): c2 {:.4}, c3 {:.2e}, {} violations",
            model.context().dim(),
            rep.c2_hat,
            rep.c3_hat,
            rep.violations.len()
        ));
    }
    Ok((ok, parts.join("; ")))
}

// 6 ------------------------------------------------------------------------

fn picard() -> Verdict {
    let cubic = config("verify.toml");
    let quadratic = with_loss(&cubic, |c| {
        c.problem.loss = dsgd::experiments::LossKey::QuadraticSaddle;
        c.problem.curvature = vec![1.0, -1.0];
        c.problem.coupling = 0.0;
    });
    let qm = verify_model(&quadratic)?;
    let zero = Vector::zeros(qm.n_s());
    let qs = qm.picard(qm.t_start(), &zero).map_err(err)?;
    let quad_ok = qs.iterations == 1 && qs.u.iter().all(|u| u.iter().all(|&v| v == 0.0));

    let cm = verify_model(&cubic)?;
    let t0 = cm.t_start();
    let mut a = Vector::zeros(cm.n_s());
    a[0] = cm.radius() / 6.0;
    let sol = cm.picard(t0, &a).map_err(err)?;
    let ratio = sol.ratios.iter().cloned().fold(0.0, f64::max);
    let scales = [0.005, 0.01, 0.02, 0.04];
    let mut slopes = Vec::new();
    for k in 0..cm.n_s() {
        let mut dir = Vector::zeros(cm.n_s());
        dir[k] = 1.0;
        if cm.psi(t0, &(&dir * 0.04)).map_err(err)?.norm() > 1e-10 {
            slopes.push(tangency_slope(&cm, t0, &dir, &scales).map_err(err)?);
        }
    }
    let slope_ok = !slopes.is_empty() && slopes.iter().all(|s| (s - 2.0).abs() <= 0.2);
    Ok((
        quad_ok && ratio < 0.5 && sol.residual < 1e-6 && slope_ok,
        format!(
            "quadratic: {} iteration(s), u = 0: {quad_ok}; cubic: max contraction {ratio:.2e}, residual {:.2e}, tangency slopes {:?}",
            qs.iterations,
            sol.residual,
            slopes.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>()
        ),
    ))
}

// 7 ------------------------------------------------------------------------

/// Two agents on an edge, `y ∈ R²`, with `½(y₁² − y₂²) ± (b y₁ + b y₁y₂)`:
/// the agents disagree, so the penalty actually bends the spectrum.
fn heterogeneous_saddle(b: f64, gamma: GammaCurve) -> SaddleContext {
    let agent = |s: f64| -> LossOracle {
        Arc::new(
            Polynomial::diagonal_quadratic(&[1.0, -1.0])
                + Polynomial::term(2, s * b, &[(0, 1)])
                + Polynomial::term(2, s * b, &[(0, 1), (1, 1)]),
        )
    };
    let losses = SumLoss::new(vec![agent(1.0), agent(-1.0)]).unwrap();
    let q = consensus_penalty(&laplacian(&Graph::path(2).unwrap()), 2).unwrap();
    SaddleContext::new(Arc::new(losses), q, gamma, Vector::zeros(4)).unwrap()
}

fn spectral() -> Verdict {
    let ctx = heterogeneous_saddle(0.2, GammaCurve::new(100.0, 0.6));
    let qhat = ctx.penalty().qhat_eigenvalues();
    let model = ManifoldModel::build(
        ctx,
        ManifoldOptions {
            t_start: Some(1.0),
            t_max: 100.0,
            ..Default::default()
        },
    )
    .map_err(err)?;
    let rows: Vec<_> = spectral_limits(&model, 10).into_iter().filter(|r| r.gamma >= 1e3).collect();
    let limit = restricted_limit(&model);
    let mut in_dev: f64 = 0.0;
    for r in &rows {
        let mut v = r.in_constraint.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        if v.len() != limit.len() {
            return Ok((false, format!("t = {}: {} in-constraint eigenvalues, expected {}", r.t, v.len(), limit.len())));
        }
        for (a, b) in v.iter().zip(&limit) {
            in_dev = in_dev.max((a - b).abs());
        }
    }
    let slopes = off_constraint_slopes(&rows);
    let mut want: Vec<f64> = qhat.iter().map(|l| -l).collect();
    want.sort_by(|a, b| b.total_cmp(a));
    let slope_dev = slopes
        .iter()
        .zip(&want)
        .map(|(s, w)| ((s - w) / w).abs())
        .fold(0.0, f64::max);
    let tail: Vec<f64> = (0..5).map(|i| 50.0 + 8.0 * i as f64).collect();
    let w = rectified_field_spectrum(&model, &tail, 1e-3).map_err(err)?;
    let counts_ok = w.rows.iter().all(|r| r.n_positive == model.n_u());
    let gap = w.gap.unwrap_or(f64::NAN);
    Ok((
        !rows.is_empty() && in_dev < 1e-3 && slopes.len() == want.len() && slope_dev < 0.05 && counts_ok && gap > 0.0,
        format!(
            "{} rows with gamma >= 1e3: in-constraint deviation {in_dev:.2e}, off-constraint slope error {:.2}%, W gap {gap:.4} over t in [50, 82]",
            rows.len(),
            100.0 * slope_dev
        ),
    ))
}

// 8 ------------------------------------------------------------------------

fn drift() -> Verdict {
    let cfg = config("drift.toml");
    let r = campaign(&cfg)?;
    let (lo, hi) = (agg(&r, "drift_ci_low"), agg(&r, "drift_ci_high"));
    let p = agg(&r, "excursion_exponent");
    let want = 0.5 - cfg.schedule.tau_alpha;
    let ks: Vec<f64> = cfg.drift.restarts.iter().map(|&k| k as f64).collect();
    let medians: Vec<f64> = cfg
        .drift
        .restarts
        .iter()
        .map(|k| dsgd::experiments::quantile(&r.nums(&format!("excursion_k{k}")), 0.5))
        .collect();
    let monotone = medians.windows(2).all(|w| w[1] < w[0]);
    Ok((
        r.records.len() == 500 && lo > 0.0 && monotone && (p - want).abs() <= 0.15,
        format!(
            "{} seeds: mean drift {:.3e}, 95% CI [{lo:.3e}, {hi:.3e}]; excursion medians decreasing over k = {:?}: {monotone}; exponent {p:.3} vs {want}",
            r.records.len(),
            agg(&r, "mean_drift"),
            ks
        ),
    ))
}

// 9 ------------------------------------------------------------------------

fn boundedness() -> Verdict {
    let bounded = campaign(&config("bounded.toml"))?;
    let mut quad = config("quadratic.toml");
    quad.seeds = SeedSpec::Range { first: 1, count: 50 };
    quad.steps = 100_000;
    let quad = campaign(&quad)?;
    let control = campaign(&config("anticoercive.toml"))?;
    let sup = agg(&bounded, "max_sup_norm").max(agg(&quad, "max_sup_norm"));
    let exceeded = agg(&control, "exceed_ceiling_count");
    let n = control.records.len() as f64;
    Ok((
        bounded.records.len() == 50 && quad.records.len() == 50 && sup <= 1e3 && exceeded > n / 2.0,
        format!("coercive: max sup norm {sup:.2} over 2 x 50 seeds; anti-coercive control: {exceeded}/{n} seeds exceed 1e3"),
    ))
}

// 10 -----------------------------------------------------------------------

fn integrator_and_gap() -> Verdict {
    // RK4 order on the penalized quartic, error against a 16x finer run
    let loss: LossOracle = Arc::new(
        SumLoss::new(vec![
            Arc::new(Polynomial::quartic_saddle()) as LossOracle,
            Arc::new(Polynomial::shifted_square(&Vector::from_vec(vec![0.5, -0.5]))),
        ])
        .unwrap(),
    );
    let q = consensus_penalty(&laplacian(&Graph::path(2).unwrap()), 2).map_err(err)?;
    let gamma = |t: f64| t.powf(0.6);
    let x0 = Vector::from_vec(vec![0.3, 0.8, -0.4, 0.2]);
    let end = |h: f64| -> Result<Vector, String> {
        Ok(integrate_dgf(loss.as_ref(), &q, gamma, &x0, 1.0, 3.0, h).map_err(err)?.last().clone())
    };
    let h = 0.1;
    let reference = end(h / 16.0)?;
    let e1 = (end(h)? - &reference).norm();
    let e2 = (end(h / 2.0)? - &reference).norm();
    let order_ratio = e1 / e2;
    let order_ok = (4.0..=64.0).contains(&order_ratio);

    // discrete vs continuous on a smooth quadratic, no noise, same ζ horizon
    let target = Vector::from_vec(vec![1.0, -2.0]);
    let quad: Arc<dyn Loss> = Arc::new(Polynomial::shifted_square(&target));
    let qz = PenaltyMatrix::zeros(2);
    let problem = Problem::general(quad.clone(), qz.clone()).map_err(err)?;
    let horizon = 4.0;
    let gap_at = |a: f64| -> Result<f64, String> {
        let s = Schedule::new(a, 0.6, 1.0, 0.55);
        // smallest K with ζ_K ≥ horizon
        let (mut k, mut zeta) = (0u64, 0.0);
        while zeta < horizon {
            k += 1;
            zeta += s.alpha(k);
        }
        let mut cfg = RunConfig::new(k - 1, s, NoiseModel::none());
        cfg.store_states = true;
        let traj = problem.run(&Vector::zeros(2), &cfg).map_err(err)?;
        let sol = solution_on_clock(&traj, quad.as_ref(), &qz, &s, 1e-3).map_err(err)?;
        Ok(*discrete_vs_continuous_gap(&traj, &sol).map_err(err)?.last().unwrap())
    };
    let (g1, g2) = (gap_at(0.2)?, gap_at(0.1)?);
    let gap_ratio = g1 / g2;
    let gap_ok = (1.5..=2.5).contains(&gap_ratio);
    Ok((
        order_ok && gap_ok,
        format!("RK4 error ratio h/(h/2) = {order_ratio:.2} (order {:.2}); terminal gap ratio a/(a/2) = {gap_ratio:.3} ({g1:.3e} vs {g2:.3e})", order_ratio.log2()),
    ))
}

fn main() {
    let criteria: Vec<(&str, u64, fn() -> Verdict)> = vec![
        ("agentwise/general equivalence", 60, agentwise_equivalence),
        ("consensus", 60, consensus),
        ("critical points", 300, critical_points),
        ("saddle avoidance", 600, saddle_avoidance),
        ("repulsion inequality", 120, repulsion),
        ("Picard machinery", 60, picard),
        ("spectral structure", 60, spectral),
        ("drift statistics", 600, drift),
        ("boundedness", 60, boundedness),
        ("integrator and gap scaling", 60, integrator_and_gap),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.into_iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|p| *p == id || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(budget);
        let (pass, detail) = match outcome {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let time_note = if in_time { String::new() } else { format!(" over the {budget} s budget") };
        println!(
            "{} {:>2} {name}: {detail} [{:.1} s{time_note}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

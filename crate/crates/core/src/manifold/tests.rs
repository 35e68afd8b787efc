use std::sync::Arc;

use super::*;
use crate::graph::{consensus_penalty, laplacian, Graph, PenaltyMatrix};
use crate::loss::{LossOracle, Polynomial, SumLoss};
use crate::schedule::GammaCurve;
use crate::{Matrix, Vector};

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn diag(x: &[f64]) -> Matrix {
    Matrix::from_diagonal(&v(x))
}

fn ctx(poly: Polynomial, q: &[f64], gamma: GammaCurve) -> SaddleContext {
    let loss: LossOracle = Arc::new(poly);
    let q = PenaltyMatrix::new(diag(q)).unwrap();
    let m = q.dim();
    SaddleContext::new(loss, q, gamma, Vector::zeros(m)).unwrap()
}

fn quadratic_saddle() -> SaddleContext {
    ctx(Polynomial::diagonal_quadratic(&[1.0, -1.0]), &[0.0, 0.0], GammaCurve::constant(1.0))
}

fn cubic() -> SaddleContext {
    ctx(Polynomial::cubic_saddle(0.1), &[0.0, 0.0], GammaCurve::constant(1.0))
}

fn quick() -> ManifoldOptions {
    ManifoldOptions {
        t_max: 12.0,
        ..Default::default()
    }
}

#[test]
fn shifted_path_matches_closed_form() {
    let q2 = 2.0;
    let poly = Polynomial::diagonal_quadratic(&[1.0, -1.0]) + Polynomial::term(2, 1.0, &[(1, 1)]);
    let c = ctx(poly, &[0.0, q2], GammaCurve::new(1.0, 1.0));
    assert_eq!(c.n_u(), 0);
    let g0 = c.gamma0().unwrap();
    let grid: Vec<f64> = (0..200).map(|i| g0 * 1.05f64.powi(i)).collect();
    let path = solve_perturbed_saddle(&c, &grid).unwrap();
    for (g, p) in grid.iter().zip(&path.points) {
        assert!(p[0].abs() < 1e-12);
        assert!((p[1] + 1.0 / (g * q2 - 1.0)).abs() < 1e-10);
        assert!(c.penalized_gradient(p, *g).norm() <= PATH_TOL);
    }
    let norms: Vec<f64> = path.points.iter().map(|p| p.norm()).collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]));
    let exact = 1.0 / (g0 * q2 - 1.0);
    assert!((path.arc_length_estimate - exact).abs() < 0.01 * exact);
}

#[test]
fn quadratic_origin_is_stationary_on_the_path() {
    let c = ctx(Polynomial::diagonal_quadratic(&[1.0, -1.0]), &[0.0, 2.0], GammaCurve::new(1.0, 1.0));
    let path = solve_perturbed_saddle(&c, &[1.0, 2.0, 4.0]).unwrap();
    assert!(path.points.iter().all(|p| p.norm() == 0.0));
}

#[test]
fn linearization_of_diagonal_saddle() {
    let c = quadratic_saddle();
    let s = linearize(&c, 3.0, &Vector::zeros(2)).unwrap();
    assert_eq!(s.n_u, 1);
    assert_eq!(s.unstable(), vec![1.0]);
    assert_eq!(s.stable(), vec![-1.0]);
    assert!(s.diagonalization_error() < 1e-12);

    let c = ctx(Polynomial::diagonal_quadratic(&[1.0, -1.0]), &[0.0, 2.0], GammaCurve::new(1.0, 1.0));
    for t in [0.25, 1.0, 3.0] {
        let s = linearize(&c, t, &Vector::zeros(2)).unwrap();
        let mut want = vec![-1.0, 1.0 - 2.0 * t];
        want.sort_by(|a, b| b.total_cmp(a));
        assert!((s.lambda[0] - want[0]).abs() < 1e-12 && (s.lambda[1] - want[1]).abs() < 1e-12);
        assert_eq!(s.n_u, usize::from(t < 0.5));
    }
    assert!(matches!(linearize(&c, 0.5, &Vector::zeros(2)), Err(crate::Error::Partition { .. })));
}

#[test]
fn tracking_undoes_reordering_and_sign_flips() {
    let c = quadratic_saddle();
    let s = linearize(&c, 1.0, &Vector::zeros(2)).unwrap();
    let mut scrambled = s.clone();
    scrambled.u = Matrix::from_row_slice(2, 2, &[-s.u[(1, 0)], -s.u[(1, 1)], s.u[(0, 0)], s.u[(0, 1)]]);
    scrambled.lambda = v(&[s.lambda[1], s.lambda[0]]);
    let (t, ambiguous) = track(&s.u, 1, scrambled).unwrap();
    assert!(!ambiguous);
    assert_eq!(t.u, s.u);
    assert_eq!(t.lambda, s.lambda);
}

#[test]
fn tracking_flags_near_equal_overlaps() {
    let c = quadratic_saddle();
    let s = linearize(&c, 1.0, &Vector::zeros(2)).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut rotated = s.clone();
    rotated.u = Matrix::from_row_slice(2, 2, &[r, r, -r, r]) * &s.u;
    let (_, ambiguous) = track(&s.u, 1, rotated).unwrap();
    assert!(ambiguous);
}

#[test]
fn evolution_operator_examples() {
    let c = ctx(Polynomial::diagonal_quadratic(&[2.0, -1.0]), &[0.0, 0.0], GammaCurve::constant(1.0));
    let times: Vec<f64> = (0..=20).map(|i| 1.0 + 0.1 * i as f64).collect();
    let g = vec![Vector::zeros(2); times.len()];
    let grid = SplitGrid::build(&c, &times, &g).unwrap();
    let v0 = evolution_operator(&grid, 1.3, 1.3, Block::Stable).unwrap();
    assert_eq!(v0, diag(&[0.0, 1.0]));
    let vs = evolution_operator(&grid, 1.0, 2.0, Block::Stable).unwrap();
    assert!((vs[(1, 1)] - (-2.0f64).exp()).abs() < 1e-12);
    assert!((vs[(1, 1)] - 0.1353).abs() < 1e-4);
    let vu = evolution_operator(&grid, 2.0, 1.5, Block::Unstable).unwrap();
    assert!((vu[(0, 0)] - (-0.5f64).exp()).abs() < 1e-12);
    assert!(evolution_operator(&grid, 2.0, 1.0, Block::Stable).is_err());
    assert!(evolution_operator(&grid, 1.0, 2.0, Block::Unstable).is_err());
    assert!(evolution_operator(&grid, 0.5, 2.0, Block::Stable).is_err());
}

/// Two agents on an edge, each `½(y₁² − y₂²) ± (b y₁ + b y₁y₂)`: the sum
/// has a saddle at 0 but the agents disagree, so `g(γ)` moves and the
/// frames rotate with `γ`.
fn consensus_context(b: f64, gamma: GammaCurve) -> SaddleContext {
    let agent = |s: f64| {
        Polynomial::diagonal_quadratic(&[1.0, -1.0])
            + Polynomial::term(2, s * b, &[(0, 1)])
            + Polynomial::term(2, s * b, &[(0, 1), (1, 1)])
    };
    let (a, bb) = (agent(1.0), agent(-1.0));
    let sum = SumLoss::new(vec![Arc::new(a) as LossOracle, Arc::new(bb) as LossOracle]).unwrap();
    let q = consensus_penalty(&laplacian(&Graph::path(2).unwrap()), 2).unwrap();
    SaddleContext::new(Arc::new(sum), q, gamma, Vector::zeros(4)).unwrap()
}

#[test]
fn decay_fit_holds_on_held_out_pairs() {
    let c = consensus_context(0.2, GammaCurve::new(1.0, 0.6));
    let model = ManifoldModel::build(c, quick()).unwrap();
    let pairs: Vec<(f64, f64)> = (0..20).map(|i| (model.t_start() + 0.2 * i as f64, model.t_start() + 0.45 * i as f64 + 0.3)).collect();
    let fit = fit_decay(model.splits(), &pairs, Block::Stable).unwrap();
    assert!(fit.rate > 0.0 && fit.holds_on_holdout, "{fit:?} {:?}", model.splits().splits[0].lambda);
}

#[test]
fn quadratic_picard_is_the_linear_flow() {
    let model = ManifoldModel::build(quadratic_saddle(), quick()).unwrap();
    assert!(model.is_frozen());
    let t0 = model.t_start();
    let zero = model.picard(t0, &v(&[0.0])).unwrap();
    assert!(zero.u.iter().all(|u| u.amax() < 1e-15));
    let sol = model.picard(t0, &v(&[0.05])).unwrap();
    for (t, u) in sol.times.iter().zip(&sol.u) {
        assert!(u[0].abs() < 1e-15);
        assert!((u[1] - 0.05 * (-(t - t0)).exp()).abs() < 1e-12);
    }
    assert!(sol.residual < 1e-12);
    assert!(model.psi(t0, &v(&[0.08])).unwrap().amax() < 1e-15);
}

#[test]
fn cubic_picard_contracts_and_matches_tangency() {
    let model = ManifoldModel::build(cubic(), quick()).unwrap();
    let t0 = model.t_start();
    let sol = model.picard(t0, &v(&[0.09])).unwrap();
    assert!(sol.ratios.iter().all(|&r| r < 0.5), "{:?}", sol.ratios);
    assert!(sol.residual < 1e-6);
    // leading order x₂ = (c/3) x₁²
    let psi = model.psi(t0, &v(&[0.02])).unwrap()[0];
    let lead = 0.1 / 3.0 * 0.02f64.powi(2);
    assert!((psi - lead).abs() < 0.05 * lead, "{psi} vs {lead}");
    let slope = tangency_slope(&model, t0, &v(&[1.0]), &[0.005, 0.01, 0.02, 0.05]).unwrap();
    assert!((slope - 2.0).abs() < 0.05, "{slope}");
    let env = decay_envelope(&sol, t0 + model.picard_span().0);
    assert!(env.slope < 0.0);
}

#[test]
fn eta_and_rectifier_on_the_quadratic_saddle() {
    let model = ManifoldModel::build(quadratic_saddle(), quick()).unwrap();
    let t = model.t_start() + 1.0;
    let z = v(&[0.3, 0.0]);
    assert!((model.eta_z(&z, t).unwrap() - 0.3).abs() < 1e-14);
    let w = v(&[0.05, -0.07]);
    assert!((model.rectify(&w, t).unwrap() - &w).amax() < 1e-15);
    assert!(matches!(model.eta_z(&v(&[0.3, 0.1]), t), Err(crate::Error::OutOfBall { .. })));
}

#[test]
fn eta_vanishes_on_the_cubic_manifold() {
    let model = ManifoldModel::build(cubic(), quick()).unwrap();
    let t = model.t_start() + 0.5;
    for s in [-0.09, -0.03, 0.04, 0.08] {
        let x = model.manifold_point(t, &v(&[s])).unwrap();
        assert!(model.eta(&x, t).unwrap() < 1e-12);
        let off = &x + model.frame(t).unwrap().row(0).transpose() * 1e-3;
        assert!(model.eta(&off, t).unwrap() > 0.9e-3);
    }
}

#[test]
fn dx_phi_is_identity_at_origin() {
    let model = ManifoldModel::build(cubic(), quick()).unwrap();
    let j = dx_phi_at_origin(&model, model.t_start(), 1e-4).unwrap();
    assert!((j - Matrix::identity(2, 2)).amax() < 1e-6);
}

#[test]
fn repulsion_on_linear_saddle() {
    let model = ManifoldModel::build(quadratic_saddle(), quick()).unwrap();
    let t = model.t_start();
    let xs = sample_ball(&model, t, 0.09, 12, 7).unwrap();
    let r = repulsion_check(&model, &xs, &[1e-3, 1e-2], &[t, t + 1.0]).unwrap();
    assert!(r.c2_hat >= 1.0 - 1e-9, "{}", r.c2_hat);
    assert!(r.c3_hat < 1e-9);
    assert!(r.violations.is_empty());
}

#[test]
fn rectified_spectrum_follows_the_penalty() {
    let c = ctx(Polynomial::diagonal_quadratic(&[1.0, -1.0]), &[0.0, 2.0], GammaCurve::new(1.0, 1.0));
    let model = ManifoldModel::build(c, quick()).unwrap();
    assert_eq!(model.n_u(), 0);
    let t = model.t_start() + 1.0;
    let rep = rectified_field_spectrum(&model, &[t], 1e-3).unwrap();
    let e = &rep.rows[0].eigenvalues;
    assert!((e[0] + 1.0).abs() < 1e-4, "{e:?}");
    assert!((e[1] - (1.0 - 2.0 * t)).abs() < 1e-3 * (2.0 * t), "{e:?}");
    let d = dt_phi_decay_probe(&model, &[t], 0.05).unwrap();
    assert_eq!(d, vec![0.0]);
}

#[test]
fn consensus_spectrum_converges_to_restricted_hessian() {
    let c = consensus_context(0.2, GammaCurve::new(1.0, 0.6));
    let model = ManifoldModel::build(
        c,
        ManifoldOptions {
            t_max: 60.0,
            ..Default::default()
        },
    )
    .unwrap();
    let rows = spectral_limits(&model, 10);
    let limit = restricted_limit(&model);
    let last = rows.last().unwrap();
    for (a, b) in last.in_constraint.iter().zip(&limit) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
    assert!(rows.iter().all(|r| r.in_constraint.iter().filter(|&&l| l > 0.0).count() == model.n_u()));
    let slopes = off_constraint_slopes(&rows[rows.len() / 2..]);
    let q = model.context().penalty().qhat_eigenvalues();
    let mut q: Vec<f64> = q.into_iter().filter(|&x| x > 1e-9).collect();
    q.sort_by(|a, b| a.total_cmp(b));
    for (s, qi) in slopes.iter().zip(&q) {
        assert!((s + qi).abs() < 0.05 * qi, "{s} vs {qi}");
    }
}

#[test]
fn autonomous_quadratic_is_flat_and_cubic_is_not() {
    let a = AutonomousManifold::new(quadratic_saddle(), 0.05, PicardOptions::default()).unwrap();
    assert!(a.psi(&v(&[0.07])).unwrap().amax() < 1e-15);
    let b = AutonomousManifold::new(cubic(), 0.01, PicardOptions::default()).unwrap();
    let sol = b.picard(&v(&[0.08])).unwrap();
    assert!(sol.residual < 1e-6);
    assert!(sol.psi(1)[0] > 1e-4);
}

#[test]
fn time_varying_manifold_approaches_the_autonomous_one() {
    let c = consensus_context(0.2, GammaCurve::new(1.0, 0.6));
    let auto = AutonomousManifold::new(c.clone(), 0.05, PicardOptions::default()).unwrap();
    let model = ManifoldModel::build(
        c,
        ManifoldOptions {
            t_max: 81.0,
            ..Default::default()
        },
    )
    .unwrap();
    let rows = compare_with_model(&model, &auto, &[10.0, 20.0, 40.0, 80.0], &[v(&[0.05]), v(&[-0.05])]).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

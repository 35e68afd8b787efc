//! Numerical checks on a built model: the repulsion inequality, the
//! spectrum of the rectified field, and the finite-difference probes of `Φ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::ManifoldModel;
use super::picard::PicardSolution;
use crate::flow::{dgf_field, integrate_dgf_at};
use crate::linalg::{fd_jacobian, real_parts_of_spectrum, sym_eigen};
use crate::{Error, Matrix, Result, Vector};

/// `count` points `Uᵀz + g` with `z` uniform in the `radius` ball at time `t`.
pub fn sample_ball(model: &ManifoldModel, t: f64, radius: f64, count: usize, seed: u64) -> Result<Vec<Vector>> {
    let m = model.context().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let dir = Vector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        let r = radius * rng.gen::<f64>().powf(1.0 / m as f64);
        out.push(model.from_z(&(dir * r), t)?);
    }
    Ok(out)
}

/// Ratio `η/ε` above which a repulsion rate is trusted.
pub const REPULSION_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepulsionSample {
    pub t: f64,
    pub epsilon: f64,
    pub eta_before: f64,
    pub eta_after: f64,
}

impl RepulsionSample {
    /// `(η_after − η_before)/(ε η_before)`.
    pub fn rate(&self) -> f64 {
        (self.eta_after - self.eta_before) / (self.epsilon * self.eta_before)
    }
}

#[derive(Debug, Clone)]
pub struct RepulsionReport {
    pub c2_hat: f64,
    pub c3_hat: f64,
    /// Rates are only trusted where `η_before ≥ eta_floor · ε`; below that the
    /// `ε²` remainder swamps the linear term and is charged to `c₃` instead.
    pub eta_floor: f64,
    pub samples: Vec<RepulsionSample>,
    /// Samples above the floor that did not move away from the manifold.
    pub violations: Vec<RepulsionSample>,
}

/// Sweep `η(x + εJ(x,t), t + ε)` against `η(x, t)` and fit the largest
/// `c₂` and then the smallest `c₃ ≥ 0` with
/// `η_after ≥ (1 + c₂ε) η_before − c₃ε²` on every sample.
pub fn repulsion_check(model: &ManifoldModel, samples: &[Vector], eps_grid: &[f64], t_grid: &[f64]) -> Result<RepulsionReport> {
    let ctx = model.context();
    let mut out = Vec::new();
    for &t in t_grid {
        for x in samples {
            let before = model.eta(x, t)?;
            let j = dgf_field(ctx.loss().as_ref(), ctx.penalty(), ctx.gamma().value(t), x);
            for &eps in eps_grid {
                let after = model.eta(&(x + &j * eps), t + eps)?;
                out.push(RepulsionSample {
                    t,
                    epsilon: eps,
                    eta_before: before,
                    eta_after: after,
                });
            }
        }
    }
    let eta_floor = REPULSION_FLOOR;
    let trusted: Vec<_> = out.iter().filter(|s| s.eta_before >= eta_floor * s.epsilon).collect();
    let c2_hat = trusted.iter().map(|s| s.rate()).fold(f64::INFINITY, f64::min);
    let c2_fit = if c2_hat.is_finite() { c2_hat.max(0.0) } else { 0.0 };
    let c3_hat = out
        .iter()
        .map(|s| ((1.0 + c2_fit * s.epsilon) * s.eta_before - s.eta_after) / (s.epsilon * s.epsilon))
        .fold(0.0, f64::max);
    let violations = trusted.iter().filter(|s| s.rate() <= 0.0).map(|s| **s).collect();
    Ok(RepulsionReport {
        c2_hat,
        c3_hat,
        eta_floor,
        samples: out,
        violations,
    })
}

#[derive(Debug, Clone)]
pub struct FieldSpectrum {
    pub t: f64,
    /// Real parts of the eigenvalues of `W_t`, descending.
    pub eigenvalues: Vec<f64>,
    pub n_positive: usize,
    pub n_negative: usize,
    pub min_positive: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FieldSpectrumReport {
    pub rows: Vec<FieldSpectrum>,
    /// Infimum of the smallest positive eigenvalue over the grid.
    pub gap: Option<f64>,
}

/// Rectified field `G(w, t) = d/dt Φ(z(t), t)` along the flow started at
/// `Φ⁻¹(w, t)`, by a one-sided three-point time difference.
fn rectified_field(model: &ManifoldModel, w: &Vector, t: f64, h: f64) -> Result<Vector> {
    let ctx = model.context();
    let z0 = model.rectify_inverse(w, t)?;
    let x0 = model.from_z(&z0, t)?;
    let gamma = |s: f64| ctx.gamma().value(s);
    let sol = integrate_dgf_at(ctx.loss().as_ref(), ctx.penalty(), gamma, &x0, &[t, t + h, t + 2.0 * h], h / 20.0)?;
    let w1 = model.rectify(&model.to_z(&sol.states[1], t + h)?, t + h)?;
    let w2 = model.rectify(&model.to_z(&sol.states[2], t + 2.0 * h)?, t + 2.0 * h)?;
    Ok((w1 * 4.0 - w * 3.0 - w2) / (2.0 * h))
}

/// `W_t = D_w G(0, t)` by central differences in `w`, and its signed
/// eigenvalue counts.
pub fn rectified_field_spectrum(model: &ManifoldModel, t_grid: &[f64], delta: f64) -> Result<FieldSpectrumReport> {
    let m = model.context().dim();
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let split = model.frame_at(t)?;
        let fastest = split.lambda.amax().max(1.0);
        let h = 1e-3 / fastest;
        let mut w = Matrix::zeros(m, m);
        for k in 0..m {
            let mut e = Vector::zeros(m);
            e[k] = delta;
            let gp = rectified_field(model, &e, t, h)?;
            let gm = rectified_field(model, &(-e), t, h)?;
            w.set_column(k, &((gp - gm) / (2.0 * delta)));
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateSpectrum(format!("rectified Jacobian is not finite at t = {t}")));
        }
        let eigenvalues = real_parts_of_spectrum(&w);
        let n_positive = eigenvalues.iter().filter(|&&l| l > 0.0).count();
        let min_positive = eigenvalues.iter().cloned().filter(|&l| l > 0.0).reduce(f64::min);
        rows.push(FieldSpectrum {
            t,
            n_negative: m - n_positive,
            eigenvalues,
            n_positive,
            min_positive,
        });
    }
    let gap = rows.iter().filter_map(|r| r.min_positive).reduce(f64::min);
    Ok(FieldSpectrumReport { rows, gap })
}

/// `‖D_tΦ(0, t)‖ = ‖∂_t ψ(t, 0)‖` by central differences of step `h`.
pub fn dt_phi_decay_probe(model: &ManifoldModel, t_grid: &[f64], h: f64) -> Result<Vec<f64>> {
    let zero = Vector::zeros(model.n_s());
    t_grid
        .iter()
        .map(|&t| {
            if t - h < model.t_start() || t + h > model.t_max() {
                return Err(Error::Parameter(format!("differencing at t = {t} leaves the model range")));
            }
            let p = model.psi(t + h, &zero)?;
            let q = model.psi(t - h, &zero)?;
            Ok((p - q).norm() / (2.0 * h))
        })
        .collect()
}

/// Finite-difference `D_zΦ(0, t)`.
pub fn dx_phi_at_origin(model: &ManifoldModel, t: f64, delta: f64) -> Result<Matrix> {
    let m = model.context().dim();
    let err = std::cell::RefCell::new(None);
    let jac = fd_jacobian(
        |z| match model.rectify(z, t) {
            Ok(w) => w,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                Vector::zeros(m)
            }
        },
        &Vector::zeros(m),
        delta,
    );
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(jac),
    }
}

/// Least-squares slope of `log ‖ψ(t0, s·dir)‖` against `log s`.
pub fn tangency_slope(model: &ManifoldModel, t0: f64, dir: &Vector, scales: &[f64]) -> Result<f64> {
    let d = dir.normalize();
    let mut pts = Vec::with_capacity(scales.len());
    for &s in scales {
        let p = model.psi(t0, &(&d * s))?;
        pts.push((s.ln(), p.norm().max(1e-300).ln()));
    }
    Ok(ls_slope(&pts))
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `log|u(t)| ≤ intercept + slope (t − t0)` for `t0 + 1 ≤ t ≤ t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEnvelope {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares slope, intercept lifted to cover every sample.
pub fn decay_envelope(sol: &PicardSolution, t_end: f64) -> DecayEnvelope {
    let t0 = sol.times[0];
    let pts: Vec<(f64, f64)> = sol
        .times
        .iter()
        .zip(&sol.u)
        .filter(|(&t, _)| t >= t0 + 1.0 && t <= t_end)
        .map(|(&t, u)| (t - t0, u.norm().max(1e-300).ln()))
        .collect();
    let slope = ls_slope(&pts);
    let intercept = pts.iter().map(|p| p.1 - slope * p.0).fold(f64::NEG_INFINITY, f64::max);
    DecayEnvelope { slope, intercept }
}

/// Central second differences `‖ψ(a + δd) − 2ψ(a) + ψ(a − δd)‖/δ²` per
/// scale `δ`.
pub fn psi_second_differences(model: &ManifoldModel, t0: f64, a: &Vector, dir: &Vector, scales: &[f64]) -> Result<Vec<f64>> {
    let d = dir.normalize();
    let mid = model.psi(t0, a)?;
    scales
        .iter()
        .map(|&s| {
            let p = model.psi(t0, &(a + &d * s))?;
            let q = model.psi(t0, &(a - &d * s))?;
            Ok((p - mid.clone() * 2.0 + q).norm() / (s * s))
        })
        .collect()
}

/// In- and off-constraint eigenvalues of `A(t)` at one reference time.
#[derive(Debug, Clone)]
pub struct SpectralLimitRow {
    pub t: f64,
    pub gamma: f64,
    pub in_constraint: Vec<f64>,
    pub off_constraint: Vec<f64>,
}

/// Classify each eigenvector of `A(t)` by whether most of its mass lies in
/// `C`, at every `stride`-th reference time.
pub fn spectral_limits(model: &ManifoldModel, stride: usize) -> Vec<SpectralLimitRow> {
    let basis = model.context().constraint_basis();
    model
        .splits()
        .splits
        .iter()
        .step_by(stride.max(1))
        .map(|s| {
            let mut inside = Vec::new();
            let mut outside = Vec::new();
            for i in 0..s.lambda.len() {
                let mass = (basis.transpose() * s.u.row(i).transpose()).norm_squared();
                if mass > 0.5 {
                    inside.push(s.lambda[i]);
                } else {
                    outside.push(s.lambda[i]);
                }
            }
            SpectralLimitRow {
                t: s.t,
                gamma: s.gamma,
                in_constraint: inside,
                off_constraint: outside,
            }
        })
        .collect()
}

/// Eigenvalues of `B = −∇²h|_C(x*)`, descending.
pub fn restricted_limit(model: &ManifoldModel) -> Vec<f64> {
    let (vals, _) = sym_eigen(&(-model.context().restricted_hessian()));
    let mut v: Vec<f64> = vals.iter().cloned().collect();
    v.reverse();
    v
}

/// Per off-constraint eigenvalue (sorted descending), the least-squares
/// slope of `λ_i(t)` against `γ_t` over the rows.
pub fn off_constraint_slopes(rows: &[SpectralLimitRow]) -> Vec<f64> {
    let k = rows.first().map_or(0, |r| r.off_constraint.len());
    (0..k)
        .map(|i| {
            let pts: Vec<_> = rows
                .iter()
                .filter(|r| r.off_constraint.len() == k)
                .map(|r| {
                    let mut v = r.off_constraint.clone();
                    v.sort_by(|a, b| b.total_cmp(a));
                    (r.gamma, v[i])
                })
                .collect();
            ls_slope(&pts)
        })
        .collect()
}

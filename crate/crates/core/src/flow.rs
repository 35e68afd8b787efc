//! The continuous-time flow `ẋ = −∇h(x) − γ_t Q x`, its time changes, and
//! comparisons against the discrete recursion.

use crate::engine::{Record, Trajectory};
use crate::graph::PenaltyMatrix;
use crate::loss::Loss;
use crate::schedule::Schedule;
use crate::{Error, Result, Vector};

/// Default RK4 step on the ζ-clock.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// Largest step actually used.
    pub step: f64,
    pub order: u32,
}

impl OdeSolution {
    pub fn last(&self) -> &Vector {
        self.states.last().expect("solution is never empty")
    }

    /// Same line format as discrete trajectories, tagged `continuous`.
    /// The step column holds the grid index.
    pub fn to_text(&self, q: &PenaltyMatrix, loss: &dyn Loss) -> String {
        let p = q.constraint_projector();
        let recs: Vec<Record> = self
            .times
            .iter()
            .zip(&self.states)
            .enumerate()
            .map(|(i, (&t, x))| {
                let xc = &p * x;
                Record {
                    step: i as u64,
                    zeta: t,
                    consensus_error: (x - &xc).norm(),
                    grad_norm: (&p * loss.subgradient(&xc)).norm(),
                    state_norm: x.norm(),
                    state: Some(x.clone()),
                }
            })
            .collect();
        crate::engine::trajectory_text(&recs, "continuous")
    }
}

/// Right-hand side `J(x, t) = −∇h(x) − γ_t Q x`.
pub fn dgf_field(loss: &dyn Loss, q: &PenaltyMatrix, gamma: f64, x: &Vector) -> Vector {
    -(loss.subgradient(x) + q.matrix() * x * gamma)
}

fn rk4_step<G: Fn(f64) -> f64>(
    loss: &dyn Loss,
    q: &PenaltyMatrix,
    gamma: &G,
    x: &Vector,
    t: f64,
    h: f64,
) -> Vector {
    let k1 = dgf_field(loss, q, gamma(t), x);
    let k2 = dgf_field(loss, q, gamma(t + 0.5 * h), &(x + &k1 * (0.5 * h)));
    let k3 = dgf_field(loss, q, gamma(t + 0.5 * h), &(x + &k2 * (0.5 * h)));
    let k4 = dgf_field(loss, q, gamma(t + h), &(x + &k3 * h));
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// Advance from `t_a` to `t_b` with equal RK4 steps no longer than `step`.
fn advance<G: Fn(f64) -> f64>(
    loss: &dyn Loss,
    q: &PenaltyMatrix,
    gamma: &G,
    mut x: Vector,
    t_a: f64,
    t_b: f64,
    step: f64,
) -> Result<(Vector, f64)> {
    let span = t_b - t_a;
    if span <= 0.0 {
        return Ok((x, 0.0));
    }
    let n = (span / step).ceil().max(1.0) as usize;
    let h = span / n as f64;
    for i in 0..n {
        let t = t_a + i as f64 * h;
        x = rk4_step(loss, q, gamma, &x, t, h);
        if !x.iter().all(|v| v.is_finite()) || x.norm() > crate::engine::DIVERGENCE_CEILING {
            return Err(Error::OdeDiverged { time: t + h });
        }
    }
    Ok((x, h))
}

/// Fixed-step RK4 from `t0` to `t1`, keeping every grid state.
pub fn integrate_dgf<G: Fn(f64) -> f64>(
    loss: &dyn Loss,
    q: &PenaltyMatrix,
    gamma: G,
    x0: &Vector,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<OdeSolution> {
    if !(step > 0.0) || !(t1 >= t0) {
        return Err(Error::Parameter("need step > 0 and t1 ≥ t0".into()));
    }
    let n = ((t1 - t0) / step).ceil() as usize;
    let h = if n == 0 { 0.0 } else { (t1 - t0) / n as f64 };
    let mut times = vec![t0];
    let mut states = vec![x0.clone()];
    let mut x = x0.clone();
    for i in 0..n {
        let t = t0 + i as f64 * h;
        x = rk4_step(loss, q, &gamma, &x, t, h);
        if !x.iter().all(|v| v.is_finite()) || x.norm() > crate::engine::DIVERGENCE_CEILING {
            return Err(Error::OdeDiverged { time: t + h });
        }
        times.push(if i + 1 == n { t1 } else { t + h });
        states.push(x.clone());
    }
    Ok(OdeSolution {
        times,
        states,
        step: h,
        order: 4,
    })
}

/// RK4 solution sampled exactly at the increasing `times` (the first is
/// the initial time), with sub-steps no longer than `step`.
pub fn integrate_dgf_at<G: Fn(f64) -> f64>(
    loss: &dyn Loss,
    q: &PenaltyMatrix,
    gamma: G,
    x0: &Vector,
    times: &[f64],
    step: f64,
) -> Result<OdeSolution> {
    if times.is_empty() || !(step > 0.0) {
        return Err(Error::Parameter("need at least one time and step > 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("times must be nondecreasing".into()));
    }
    let mut states = vec![x0.clone()];
    let mut x = x0.clone();
    let mut used: f64 = 0.0;
    for w in times.windows(2) {
        let (nx, h) = advance(loss, q, &gamma, x, w[0], w[1], step)?;
        x = nx;
        used = used.max(h);
        states.push(x.clone());
    }
    Ok(OdeSolution {
        times: times.to_vec(),
        states,
        step: used,
        order: 4,
    })
}

/// `γ` as a function of ζ-clock time: piecewise linear through the points
/// `(ζ_k, γ_k)`, constant before `ζ_1`.
#[derive(Debug, Clone)]
pub struct ClockGamma {
    zetas: Vec<f64>,
    gammas: Vec<f64>,
}

impl ClockGamma {
    /// Tabulate the first `steps + 1` clock points of `schedule`.
    pub fn new(schedule: &Schedule, steps: u64) -> Self {
        let mut zetas = Vec::with_capacity(steps as usize + 1);
        let mut gammas = Vec::with_capacity(steps as usize + 1);
        let mut z = 0.0;
        for k in 1..=steps + 1 {
            z += schedule.alpha(k);
            zetas.push(z);
            gammas.push(schedule.gamma(k));
        }
        Self { zetas, gammas }
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.zetas.partition_point(|&z| z <= t);
        if i == 0 {
            return self.gammas[0];
        }
        if i >= self.zetas.len() {
            return *self.gammas.last().unwrap();
        }
        let (z0, z1) = (self.zetas[i - 1], self.zetas[i]);
        let w = (t - z0) / (z1 - z0);
        self.gammas[i - 1] * (1.0 - w) + self.gammas[i] * w
    }
}

/// Integrate the flow from the trajectory's first state and clock value,
/// sampled at the trajectory's clock values.
pub fn solution_on_clock(
    traj: &Trajectory,
    loss: &dyn Loss,
    q: &PenaltyMatrix,
    schedule: &Schedule,
    step: f64,
) -> Result<OdeSolution> {
    let first = traj.records[0]
        .state
        .as_ref()
        .ok_or_else(|| Error::Parameter("trajectory lacks stored states".into()))?;
    let times: Vec<f64> = traj.records.iter().map(|r| r.zeta).collect();
    let last_step = traj.last().step;
    let g = ClockGamma::new(schedule, last_step + 1);
    integrate_dgf_at(loss, q, |t| g.value(t), first, &times, step)
}

/// `‖x(k) − 𝐱(ζ_k)‖` at each checkpoint. The solution's times must be the
/// trajectory's clock values.
pub fn discrete_vs_continuous_gap(traj: &Trajectory, sol: &OdeSolution) -> Result<Vec<f64>> {
    if traj.records.len() != sol.times.len() {
        return Err(Error::ClockMismatch(format!(
            "{} checkpoints vs {} solution times",
            traj.records.len(),
            sol.times.len()
        )));
    }
    traj.records
        .iter()
        .zip(sol.times.iter().zip(&sol.states))
        .map(|(r, (&t, y))| {
            if (r.zeta - t).abs() > 1e-12 * (1.0 + t.abs()) {
                return Err(Error::ClockMismatch(format!("ζ = {} vs t = {}", r.zeta, t)));
            }
            let x = r
                .state
                .as_ref()
                .ok_or_else(|| Error::Parameter("trajectory lacks stored states".into()))?;
            Ok((x - y).norm())
        })
        .collect()
}

/// `S(t) = ∫_0^t α` and its inverse `T`.
pub struct TimeChange<A: Fn(f64) -> f64> {
    alpha: A,
    tol: f64,
}

impl<A: Fn(f64) -> f64> TimeChange<A> {
    pub fn new(alpha: A) -> Self {
        Self { alpha, tol: 1e-10 }
    }

    /// Composite Simpson, panels doubled until two successive estimates
    /// agree within the tolerance.
    pub fn forward(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let simpson = |n: usize| -> f64 {
            let h = t / n as f64;
            let mut s = (self.alpha)(0.0) + (self.alpha)(t);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * (self.alpha)(i as f64 * h);
            }
            s * h / 3.0
        };
        let mut n = 16;
        let mut prev = simpson(n);
        while n < 1 << 24 {
            n *= 2;
            let cur = simpson(n);
            if (cur - prev).abs() <= self.tol * (1.0 + cur.abs()) {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::Quadrature(format!("Simpson did not settle for t = {t}")))
    }

    /// Solve `S(t) = τ` by safeguarded Newton (`S' = α`).
    pub fn inverse(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 {
            return Err(Error::Quadrature("negative clock value".into()));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut guard = 0;
        while self.forward(hi)? < tau {
            let prev = self.forward(hi)?;
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 200 || self.forward(hi)? <= prev {
                return Err(Error::Quadrature("S(t) is not strictly increasing".into()));
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.forward(t)? - tau;
            if f.abs() < 1e-13 * (1.0 + tau) {
                return Ok(t);
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let a = (self.alpha)(t);
            let nt = t - f / a;
            t = if a > 0.0 && nt > lo && nt < hi { nt } else { 0.5 * (lo + hi) };
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaForm {
    pub tau_grid: Vec<f64>,
    pub gamma_tau: Vec<f64>,
}

/// Map the grid through `S`, invert each point back through `T`, and
/// report `γ_τ = β_{T(τ)} / α_{T(τ)}`.
pub fn time_change_to_gamma_form<A, B>(alpha: A, beta: B, t_grid: &[f64]) -> Result<GammaForm>
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let tc = TimeChange::new(&alpha);
    let mut tau_grid = Vec::with_capacity(t_grid.len());
    let mut gamma_tau = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(alpha(t) > 0.0) {
            return Err(Error::Quadrature(format!("α must be positive, got {} at t = {t}", alpha(t))));
        }
        let tau = tc.forward(t)?;
        let back = tc.inverse(tau)?;
        tau_grid.push(tau);
        gamma_tau.push(beta(back) / alpha(back));
    }
    Ok(GammaForm {
        tau_grid,
        gamma_tau,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusProbe {
    /// Earliest absolute time after which every sampled trajectory stays
    /// within `ε` of `C`.
    pub t_bar_hat: f64,
    /// Per trajectory, the last grid time with `dist > ε` (or its start).
    pub last_exceed: Vec<f64>,
}

/// Integrate from every `(sample, t0)` pair over `[t0, t0 + duration]`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_consensus_probe<G: Fn(f64) -> f64 + Sync>(
    loss: &dyn Loss,
    q: &PenaltyMatrix,
    gamma: G,
    samples: &[Vector],
    t0s: &[f64],
    epsilon: f64,
    duration: f64,
    step: f64,
) -> Result<ConsensusProbe> {
    let p = q.constraint_projector();
    let mut last_exceed = Vec::new();
    for x0 in samples {
        for &t0 in t0s {
            let sol = integrate_dgf(loss, q, &gamma, x0, t0, t0 + duration, step)?;
            let mut last = t0;
            for (t, x) in sol.times.iter().zip(&sol.states) {
                if (x - &p * x).norm() > epsilon {
                    last = *t;
                }
            }
            last_exceed.push(last);
        }
    }
    let t_bar_hat = last_exceed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ConsensusProbe {
        t_bar_hat,
        last_exceed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::Polynomial;
    use crate::Matrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    #[test]
    fn linear_penalty_closed_form() {
        let q = PenaltyMatrix::new(Matrix::from_diagonal(&v(&[0.0, 2.0]))).unwrap();
        let h = Polynomial::zero(2);
        let sol = integrate_dgf(&h, &q, |_| 1.0, &v(&[1.0, 1.0]), 0.0, 1.0, 1e-3).unwrap();
        let x = sol.last();
        assert_eq!(x[0], 1.0);
        assert!((x[1] - (-2f64).exp()).abs() < 1e-6);
        assert_eq!(*sol.times.last().unwrap(), 1.0);
    }

    #[test]
    fn stationary_point() {
        let q = PenaltyMatrix::new(Matrix::from_diagonal(&v(&[0.0, 2.0]))).unwrap();
        let h = Polynomial::diagonal_quadratic(&[1.0, -1.0]);
        let sol = integrate_dgf(&h, &q, |t| t, &v(&[0.0, 0.0]), 1.0, 3.0, 1e-2).unwrap();
        assert!(sol.states.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn time_change_examples() {
        let r = time_change_to_gamma_form(|_| 1.0, |t| 2.0 * t, &[0.5, 1.0, 2.0]).unwrap();
        assert!((r.tau_grid[2] - 2.0).abs() < 1e-12);
        assert!((r.gamma_tau[1] - 2.0).abs() < 1e-9);
        let tc = TimeChange::new(|t: f64| 1.0 / (1.0 + t));
        assert!((tc.inverse(1.0).unwrap() - (std::f64::consts::E - 1.0)).abs() < 1e-8);
        assert!((tc.forward(3.0).unwrap() - 4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn clock_gamma_hits_nodes() {
        let s = Schedule::new(0.5, 1.0, 2.0, 0.6);
        let g = ClockGamma::new(&s, 10);
        let z3 = s.alpha(1) + s.alpha(2) + s.alpha(3);
        assert!((g.value(z3) - s.gamma(3)).abs() < 1e-12);
    }
}

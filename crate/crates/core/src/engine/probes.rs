//! Diagnostics computed from runs or from scalar recursions.

use super::Trajectory;
use crate::loss::{Loss, SumLoss};
use crate::graph::PenaltyMatrix;
use crate::schedule::Schedule;
use crate::{Error, Result, Vector};

/// Per-step check of the network-mean recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanResidual {
    /// `‖x̄(k+1) − [x̄(k) − α_k((1/N)Σ∇f_n(x_n(k)) + ξ̄(k+1))]‖`.
    pub identity: f64,
    /// `‖(1/N)Σ∇f_n(x_n) − (1/N)∇f(x̄)‖`.
    pub approximation_gap: f64,
    /// `max_n ‖x_n(k) − x̄(k)‖`.
    pub disagreement: f64,
}

/// Needs a run recorded at every step with states and noise means.
pub fn network_mean_residual(
    traj: &Trajectory,
    losses: &SumLoss,
    schedule: &Schedule,
) -> Result<Vec<MeanResidual>> {
    let n = losses.agents();
    let d = losses.agent_dim();
    let states: Vec<&Vector> = traj
        .records
        .iter()
        .map(|r| {
            r.state
                .as_ref()
                .ok_or_else(|| Error::Parameter("trajectory lacks stored states".into()))
        })
        .collect::<Result<_>>()?;
    for w in traj.records.windows(2) {
        if w[1].step != w[0].step + 1 {
            return Err(Error::Parameter("trajectory must be recorded at every step".into()));
        }
    }
    if traj.noise_means.len() + 1 < states.len() {
        return Err(Error::Parameter("trajectory lacks noise means".into()));
    }
    if !losses.components().iter().all(|c| c.smoothness().is_c1()) {
        return Err(Error::Loss("mean-recursion check needs smooth losses".into()));
    }
    let mean = |x: &Vector| {
        let mut m = Vector::zeros(d);
        for i in 0..n {
            m += x.rows(i * d, d);
        }
        m / n as f64
    };
    let mut out = Vec::with_capacity(states.len() - 1);
    for (j, pair) in states.windows(2).enumerate() {
        let k = traj.records[j].step;
        let (x, y) = (pair[0], pair[1]);
        let xbar = mean(x);
        let mut gavg = Vector::zeros(d);
        let mut disagreement: f64 = 0.0;
        for i in 0..n {
            let xi = x.rows(i * d, d).clone_owned();
            gavg += losses.components()[i].subgradient(&xi);
            disagreement = disagreement.max((&xi - &xbar).norm());
        }
        gavg /= n as f64;
        let predicted = &xbar - (&gavg + &traj.noise_means[j]) * schedule.alpha(k);
        let at_mean = losses.network_subgradient(&xbar) / n as f64;
        out.push(MeanResidual {
            identity: (mean(y) - predicted).norm(),
            approximation_gap: (gavg - at_mean).norm(),
            disagreement,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundednessReport {
    pub sup_norm: f64,
    pub within_bound: bool,
}

pub fn boundedness_probe(traj: &Trajectory, ceiling: f64) -> BoundednessReport {
    BoundednessReport {
        sup_norm: traj.sup_norm,
        within_bound: traj.sup_norm < ceiling,
    }
}

/// `z_{k+1} = (1 − r1(k)) z_k + r2(k)`, `r1 = a1 (k+1)^{−δ1}`,
/// `r2 = a2 (k+1)^{−δ2}`, tracked through `(k+1)^{δ0} z_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KarParams {
    pub a1: f64,
    pub delta1: f64,
    pub a2: f64,
    pub delta2: f64,
    pub delta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KarReport {
    /// Scaled sequence is nonincreasing over the last decade of checkpoints.
    pub converges: bool,
    /// `(k+1)^{δ0} z_k` at the horizon.
    pub scaled_limit: f64,
    /// `(k, (k+1)^{δ0} z_k)` at geometric checkpoints.
    pub trace: Vec<(u64, f64)>,
    /// Raw `z_k` at the same checkpoints.
    pub z: Vec<f64>,
}

pub fn rate_check_kar(p: &KarParams, z0: f64, steps: u64) -> Result<KarReport> {
    let bad = |m: &str| Err(Error::Parameter(m.to_string()));
    if !(0.0..1.0).contains(&p.delta1) {
        return bad("δ1 must lie in [0, 1)");
    }
    if !(p.a1 > 0.0 && p.a1 <= 1.0) {
        return bad("need 0 < a1 ≤ 1 so that r1(k) ≤ 1 for all k ≥ 0");
    }
    if p.a2 < 0.0 || z0 < 0.0 {
        return bad("a2 and z0 must be nonnegative");
    }
    if p.a2 > 0.0 && !(p.delta2 > p.delta1) {
        return bad("δ2 > δ1 required");
    }
    if !(p.delta0 >= 0.0) || (p.a2 > 0.0 && !(p.delta0 < p.delta2 - p.delta1)) {
        return bad("δ0 must lie in [0, δ2 − δ1)");
    }
    let mut z = z0;
    let mut trace = vec![(0, z0)];
    let mut zs = vec![z0];
    let mut next = 1u64;
    for k in 0..steps {
        let kp = (k + 1) as f64;
        let r1 = p.a1 * kp.powf(-p.delta1);
        let r2 = p.a2 * kp.powf(-p.delta2);
        z = (1.0 - r1) * z + r2;
        let idx = k + 1;
        if idx == next || idx == steps {
            trace.push((idx, ((idx + 1) as f64).powf(p.delta0) * z));
            zs.push(z);
            if idx == next {
                next *= 2;
            }
        }
    }
    let scaled_limit = trace.last().unwrap().1;
    let cutoff = steps / 10;
    let tail: Vec<f64> = trace.iter().filter(|(k, _)| *k >= cutoff).map(|t| t.1).collect();
    let converges = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(KarReport {
        converges,
        scaled_limit,
        trace,
        z: zs,
    })
}

/// `⟨x − ½α(v − γQx), v + γQx⟩`.
pub fn technical_inner_product(
    x: &Vector,
    loss: &dyn Loss,
    q: &PenaltyMatrix,
    alpha: f64,
    gamma: f64,
) -> f64 {
    let v = loss.subgradient(x);
    let qx = q.matrix() * x * gamma;
    (x - (&v - &qx) * (0.5 * alpha)).dot(&(v + qx))
}

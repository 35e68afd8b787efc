//! The discrete recursions.
//!
//! Stacked form: `x(k+1) = x(k) − α_k (v(k) + γ_k Q x(k) + ξ(k+1))`.
//! Agentwise form: `x_n(k+1) = x_n + β_k Σ_{ℓ∈Ω_n}(x_ℓ − x_n) − α_k (v_n + ξ_n)`.
//!
//! A trajectory pairs state `x(k)` with `ζ_k = Σ_{j≤k} α_j`; the initial
//! state is `x(1)`.

mod noise;
mod probes;
mod trajectory;

use std::sync::Arc;

pub use noise::{NoiseKind, NoiseModel, NoiseSource};
pub use probes::{
    boundedness_probe, network_mean_residual, rate_check_kar, technical_inner_product,
    BoundednessReport, KarParams, KarReport, MeanResidual,
};
pub use trajectory::{Record, Trajectory};
pub(crate) use trajectory::records_to_text as trajectory_text;

use crate::graph::{consensus_penalty, laplacian, Graph, PenaltyMatrix};
use crate::loss::{Loss, LossOracle, SumLoss};
use crate::schedule::Schedule;
use crate::{Error, Matrix, Result, Vector};

/// States beyond this norm abort the run.
pub const DIVERGENCE_CEILING: f64 = 1e12;

fn check_finite(x: &Vector, k: u64) -> Result<()> {
    let n = x.norm();
    if !n.is_finite() || n > DIVERGENCE_CEILING {
        return Err(Error::Diverged { step: k, norm: n });
    }
    Ok(())
}

/// One step of the stacked recursion. Consumes exactly one noise event.
pub fn general_step(
    x: &Vector,
    k: u64,
    loss: &dyn Loss,
    q: &PenaltyMatrix,
    schedule: &Schedule,
    noise: &mut NoiseSource,
) -> Result<Vector> {
    if x.len() != loss.dim() || x.len() != q.dim() {
        return Err(Error::Dimension {
            expected: q.dim(),
            got: x.len(),
        });
    }
    let alpha = schedule.alpha(k);
    let gamma = schedule.gamma(k);
    let v = loss.subgradient(x);
    let xi = noise.draw();
    let qx = q.matrix() * x;
    let next = x - (v + qx * gamma + xi) * alpha;
    check_finite(&next, k)?;
    Ok(next)
}

/// One step of the agentwise recursion. Each agent reads only its
/// neighbors' states and its own loss; the noise event is shared with the
/// stacked form through per-agent streams.
pub fn agentwise_step(
    states: &[Vector],
    k: u64,
    losses: &SumLoss,
    graph: &Graph,
    schedule: &Schedule,
    noise: &mut NoiseSource,
) -> Result<Vec<Vector>> {
    agentwise_step_adj(states, k, losses, &graph.adjacency(), schedule, noise)
}

fn agentwise_step_adj(
    states: &[Vector],
    k: u64,
    losses: &SumLoss,
    adjacency: &[Vec<usize>],
    schedule: &Schedule,
    noise: &mut NoiseSource,
) -> Result<Vec<Vector>> {
    let n_agents = losses.agents();
    if states.len() != n_agents || adjacency.len() != n_agents {
        return Err(Error::Dimension {
            expected: n_agents,
            got: states.len(),
        });
    }
    let d = losses.agent_dim();
    let alpha = schedule.alpha(k);
    let beta = schedule.beta(k);
    let xi = noise.draw();
    let mut out = Vec::with_capacity(n_agents);
    for n in 0..n_agents {
        let xn = &states[n];
        let mut mix = Vector::zeros(d);
        for &l in &adjacency[n] {
            mix += &states[l] - xn;
        }
        let v = losses.components()[n].subgradient(xn);
        let xin = xi.rows(n * d, d);
        let next = xn + mix * beta - (v + xin) * alpha;
        out.push(next);
    }
    let norm = out.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    if !norm.is_finite() || norm > DIVERGENCE_CEILING {
        return Err(Error::Diverged { step: k, norm });
    }
    Ok(out)
}

/// Which checkpoints a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    /// `k = 1, 2, 4, 8, …` plus the final state.
    Geometric,
    /// `k = 1, 1 + n, 1 + 2n, …` plus the final state.
    Every(u64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub steps: u64,
    pub schedule: Schedule,
    pub noise: NoiseModel,
    pub recording: Recording,
    pub store_states: bool,
    /// Keep the network-mean noise `ξ̄(k+1)` of every step.
    pub record_noise: bool,
    /// Use the agentwise form when the problem is distributed.
    pub agentwise: bool,
}

impl RunConfig {
    pub fn new(steps: u64, schedule: Schedule, noise: NoiseModel) -> Self {
        Self {
            steps,
            schedule,
            noise,
            recording: Recording::Geometric,
            store_states: false,
            record_noise: false,
            agentwise: false,
        }
    }
}

#[derive(Debug, Clone)]
struct Network {
    losses: SumLoss,
    graph: Graph,
    adjacency: Vec<Vec<usize>>,
}

/// A loss together with its penalty, optionally carrying the graph it was
/// built from.
#[derive(Debug, Clone)]
pub struct Problem {
    loss: LossOracle,
    q: PenaltyMatrix,
    projector: Matrix,
    network: Option<Network>,
}

impl Problem {
    pub fn general(loss: LossOracle, q: PenaltyMatrix) -> Result<Self> {
        if loss.dim() != q.dim() {
            return Err(Error::Dimension {
                expected: q.dim(),
                got: loss.dim(),
            });
        }
        let projector = q.constraint_projector();
        Ok(Self {
            loss,
            q,
            projector,
            network: None,
        })
    }

    /// `h(x) = Σ f_n(x_n)` with `Q = L ⊗ I_d`.
    pub fn distributed(losses: SumLoss, graph: Graph) -> Result<Self> {
        if graph.vertex_count() != losses.agents() {
            return Err(Error::Dimension {
                expected: losses.agents(),
                got: graph.vertex_count(),
            });
        }
        let q = consensus_penalty(&laplacian(&graph), losses.agent_dim())?;
        let loss: LossOracle = Arc::new(losses.clone());
        let mut p = Self::general(loss, q)?;
        p.network = Some(Network {
            adjacency: graph.adjacency(),
            losses,
            graph,
        });
        Ok(p)
    }

    pub fn loss(&self) -> &LossOracle {
        &self.loss
    }

    pub fn penalty(&self) -> &PenaltyMatrix {
        &self.q
    }

    pub fn graph(&self) -> Option<&Graph> {
        self.network.as_ref().map(|n| &n.graph)
    }

    pub fn sum_loss(&self) -> Option<&SumLoss> {
        self.network.as_ref().map(|n| &n.losses)
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    /// Orthogonal projector onto the constraint subspace `C`.
    pub fn projector(&self) -> &Matrix {
        &self.projector
    }

    /// `‖x − P_C x‖`.
    pub fn consensus_error(&self, x: &Vector) -> f64 {
        (x - &self.projector * x).norm()
    }

    /// `‖P_C v‖` with `v` the selection at `P_C x`.
    pub fn constrained_grad_norm(&self, x: &Vector) -> f64 {
        let xc = &self.projector * x;
        (&self.projector * self.loss.subgradient(&xc)).norm()
    }

    /// Network mean of a stacked state (the state itself for general
    /// problems).
    pub fn mean(&self, x: &Vector) -> Vector {
        let d = self.q.block_dim();
        let n = self.dim() / d;
        let mut m = Vector::zeros(d);
        for i in 0..n {
            m += x.rows(i * d, d);
        }
        m / n as f64
    }

    fn record(&self, k: u64, zeta: f64, x: &Vector, store: bool) -> Record {
        Record {
            step: k,
            zeta,
            consensus_error: self.consensus_error(x),
            grad_norm: self.constrained_grad_norm(x),
            state_norm: x.norm(),
            state: store.then(|| x.clone()),
        }
    }

    fn noise_source(&self, model: &NoiseModel) -> NoiseSource {
        let d = self.q.block_dim();
        NoiseSource::new(model, self.dim() / d, d, Some(self.projector.clone()))
    }

    /// Iterate `steps` times from `initial` (which is `x(1)`).
    pub fn run(&self, initial: &Vector, cfg: &RunConfig) -> Result<Trajectory> {
        cfg.schedule.validate()?;
        if initial.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: initial.len(),
            });
        }
        let mut noise = self.noise_source(&cfg.noise);
        let s = &cfg.schedule;
        let mut x = initial.clone();
        let mut zeta = s.alpha(1);
        let mut traj = Trajectory::new(self.record(1, zeta, &x, cfg.store_states));
        let mut next_geo = 2u64;
        let agentwise = cfg.agentwise && self.network.is_some();
        let d = self.q.block_dim();
        let mut blocks: Vec<Vector> = Vec::new();
        if agentwise {
            blocks = (0..self.dim() / d).map(|n| x.rows(n * d, d).clone_owned()).collect();
        }
        for k in 1..=cfg.steps {
            if agentwise {
                let net = self.network.as_ref().unwrap();
                blocks = agentwise_step_adj(&blocks, k, &net.losses, &net.adjacency, s, &mut noise)?;
                x = Vector::from_iterator(self.dim(), blocks.iter().flat_map(|b| b.iter().cloned()));
            } else {
                x = general_step(&x, k, self.loss.as_ref(), &self.q, s, &mut noise)?;
            }
            if cfg.record_noise {
                let xi = noise.last_draw().cloned().unwrap_or_else(|| Vector::zeros(self.dim()));
                traj.noise_means.push(self.mean(&xi));
            }
            let idx = k + 1;
            zeta += s.alpha(idx);
            traj.sup_norm = traj.sup_norm.max(x.norm());
            let keep = match cfg.recording {
                Recording::Geometric => {
                    if idx == next_geo {
                        next_geo *= 2;
                        true
                    } else {
                        false
                    }
                }
                Recording::Every(n) => (idx - 1) % n.max(1) == 0,
            };
            if keep || k == cfg.steps {
                traj.records.push(self.record(idx, zeta, &x, cfg.store_states));
            }
        }
        Ok(traj)
    }
}

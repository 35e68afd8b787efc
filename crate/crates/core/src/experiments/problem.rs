//! Turn a [`ProblemSpec`] into an engine [`Problem`] plus the critical
//! points the built-in losses are known to have.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, GraphKind, LossKey, NoiseKey, ProblemSpec};
use crate::engine::{NoiseModel, Problem};
use crate::graph::Graph;
use crate::loss::{make_l1_regularized, LossOracle, Polynomial, SumLoss};
use crate::manifold::SaddleContext;
use crate::schedule::interpolate_gamma;
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
}

/// A known critical point of `h|_C`, given by its agent-level value.
#[derive(Debug, Clone, PartialEq)]
pub struct Critical {
    pub kind: CriticalKind,
    pub point: Vector,
}

#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: Problem,
    pub agents: usize,
    pub agent_dim: usize,
    pub criticals: Vec<Critical>,
}

impl BuiltProblem {
    /// Known critical point nearest to the network mean of `x`.
    pub fn nearest_critical(&self, x: &Vector) -> Option<(&Critical, f64)> {
        let m = self.problem.mean(x);
        self.criticals
            .iter()
            .map(|c| (c, (&m - &c.point).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Stack one agent block `N` times.
    pub fn replicate(&self, y: &Vector) -> Vector {
        Vector::from_iterator(self.agents * self.agent_dim, (0..self.agents).flat_map(|_| y.iter().cloned()))
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn graph(spec: &ProblemSpec) -> Result<Graph> {
    let n = spec.agents;
    let g = match spec.graph {
        GraphKind::Path => Graph::path(n),
        GraphKind::Cycle => Graph::cycle(n),
        GraphKind::Complete => Graph::complete(n),
        GraphKind::Star => Graph::star(n),
        GraphKind::Edges => {
            let edges: Vec<(usize, usize)> = spec
                .edges
                .iter()
                .map(|e| {
                    if e[0] == 0 || e[1] == 0 {
                        Err(cfg_err("problem.edges are 1-indexed"))
                    } else {
                        Ok((e[0] - 1, e[1] - 1))
                    }
                })
                .collect::<Result<_>>()?;
            Graph::new(n, &edges)
        }
    }
    .map_err(|e| cfg_err(format!("problem.graph: {e}")))?;
    if !g.is_connected() {
        return Err(cfg_err("problem.graph: the communication graph must be connected"));
    }
    Ok(g)
}

fn soft_threshold(v: &Vector, w: f64) -> Vector {
    v.map(|x| x.signum() * (x.abs() - w).max(0.0))
}

pub fn build_problem(spec: &ProblemSpec) -> Result<BuiltProblem> {
    let (n, d) = (spec.agents, spec.agent_dim);
    if n == 0 || d == 0 {
        return Err(cfg_err("problem.agents and problem.agent_dim must be positive"));
    }
    let need_d2 = |name: &str| {
        if d != 2 {
            Err(cfg_err(format!("problem.loss = \"{name}\" needs agent_dim = 2")))
        } else {
            Ok(())
        }
    };
    let targets = || -> Result<Vec<Vector>> {
        if spec.targets.is_empty() {
            return Ok(vec![Vector::zeros(d); n]);
        }
        if spec.targets.len() != n || spec.targets.iter().any(|t| t.len() != d) {
            return Err(cfg_err(format!("problem.targets must be {n} vectors of length {d}")));
        }
        Ok(spec.targets.iter().map(|t| Vector::from_column_slice(t)).collect())
    };
    let curvature = |default: f64| -> Result<Vec<f64>> {
        if spec.curvature.is_empty() {
            return Ok(vec![default; d]);
        }
        if spec.curvature.len() != d {
            return Err(cfg_err(format!("problem.curvature must have length {d}")));
        }
        Ok(spec.curvature.clone())
    };
    let zero = Vector::zeros(d);
    let (components, criticals): (Vec<LossOracle>, Vec<Critical>) = match spec.loss {
        LossKey::Zero => (vec![Arc::new(Polynomial::zero(d)); n], vec![]),
        LossKey::Quadratic => {
            let a = targets()?;
            let mean = a.iter().fold(Vector::zeros(d), |s, x| s + x) / n as f64;
            (
                a.iter().map(|t| Arc::new(Polynomial::shifted_square(t)) as LossOracle).collect(),
                vec![Critical {
                    kind: CriticalKind::Minimum,
                    point: mean,
                }],
            )
        }
        LossKey::L1Quadratic => {
            if !(spec.weight > 0.0) {
                return Err(cfg_err("problem.weight must be positive for l1-quadratic"));
            }
            let a = targets()?;
            let mean = a.iter().fold(Vector::zeros(d), |s, x| s + x) / n as f64;
            let comps = a
                .iter()
                .map(|t| {
                    make_l1_regularized(Arc::new(Polynomial::shifted_square(t)), spec.weight).map(|l| Arc::new(l) as LossOracle)
                })
                .collect::<Result<_>>()?;
            (
                comps,
                vec![Critical {
                    kind: CriticalKind::Minimum,
                    point: soft_threshold(&mean, spec.weight),
                }],
            )
        }
        LossKey::QuadraticSaddle => {
            let c = curvature(1.0)?;
            let kind = if c.iter().all(|&x| x > 0.0) {
                CriticalKind::Minimum
            } else if c.iter().all(|&x| x < 0.0) {
                CriticalKind::Maximum
            } else {
                CriticalKind::Saddle
            };
            (
                vec![Arc::new(Polynomial::diagonal_quadratic(&c)); n],
                vec![Critical { kind, point: zero }],
            )
        }
        LossKey::QuarticSaddle => {
            need_d2("quartic-saddle")?;
            let min = |s: f64| Critical {
                kind: CriticalKind::Minimum,
                point: Vector::from_vec(vec![0.0, s]),
            };
            (
                vec![Arc::new(Polynomial::quartic_saddle()); n],
                vec![
                    Critical {
                        kind: CriticalKind::Saddle,
                        point: zero,
                    },
                    min(1.0),
                    min(-1.0),
                ],
            )
        }
        LossKey::CubicSaddle => {
            need_d2("cubic-saddle")?;
            if spec.coupling == 0.0 {
                return Err(cfg_err("problem.coupling must be nonzero for cubic-saddle"));
            }
            (
                vec![Arc::new(Polynomial::cubic_saddle(spec.coupling)); n],
                vec![Critical {
                    kind: CriticalKind::Saddle,
                    point: zero,
                }],
            )
        }
        LossKey::AntiCoercive => {
            let c = curvature(1.0)?;
            let neg: Vec<f64> = c.iter().map(|x| -x.abs()).collect();
            (
                vec![Arc::new(Polynomial::diagonal_quadratic(&neg)); n],
                vec![Critical {
                    kind: CriticalKind::Maximum,
                    point: zero,
                }],
            )
        }
    };
    let sum = SumLoss::new(components).map_err(|e| cfg_err(format!("problem: {e}")))?;
    let problem = Problem::distributed(sum, graph(spec)?).map_err(|e| cfg_err(format!("problem: {e}")))?;
    Ok(BuiltProblem {
        problem,
        agents: n,
        agent_dim: d,
        criticals,
    })
}

/// Initial state for `seed`: the configured point plus the seeded spread.
pub fn initial_state(cfg: &ExperimentConfig, built: &BuiltProblem, seed: u64) -> Result<Vector> {
    let m = built.problem.dim();
    let p = &cfg.init.point;
    let mut x = if p.is_empty() {
        Vector::zeros(m)
    } else if p.len() == built.agent_dim {
        built.replicate(&Vector::from_column_slice(p))
    } else if p.len() == m {
        Vector::from_column_slice(p)
    } else {
        return Err(cfg_err(format!(
            "init.point must have length {} (one agent) or {m} (stacked)",
            built.agent_dim
        )));
    };
    if cfg.init.spread > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        for v in x.iter_mut() {
            *v += cfg.init.spread * (2.0 * rng.gen::<f64>() - 1.0);
        }
    }
    Ok(x)
}

/// Noise model for `seed`.
pub fn noise_model(cfg: &ExperimentConfig, seed: u64) -> NoiseModel {
    let mut m = match cfg.noise.kind {
        NoiseKey::None => NoiseModel::none(),
        NoiseKey::Gaussian => NoiseModel::gaussian(cfg.noise.sigma, seed),
        NoiseKey::Sphere => NoiseModel::uniform_sphere(cfg.noise.sigma, seed),
    };
    m.constraint_only = cfg.noise.constraint_only;
    m
}

/// Saddle context at the origin, the saddle of every built-in saddle loss.
pub fn saddle_context(cfg: &ExperimentConfig, built: &BuiltProblem) -> Result<SaddleContext> {
    let saddle = built
        .criticals
        .iter()
        .find(|c| c.kind == CriticalKind::Saddle)
        .ok_or_else(|| cfg_err("problem has no known saddle point"))?;
    SaddleContext::new(
        built.problem.loss().clone(),
        built.problem.penalty().clone(),
        interpolate_gamma(&cfg.schedule),
        built.replicate(&saddle.point),
    )
    .map_err(|e| cfg_err(format!("problem: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(loss: LossKey) -> ProblemSpec {
        ProblemSpec {
            loss,
            agents: 3,
            agent_dim: 2,
            graph: GraphKind::Path,
            edges: vec![],
            targets: vec![],
            weight: 0.0,
            curvature: vec![],
            coupling: 0.0,
        }
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let mut s = spec(LossKey::Zero);
        s.graph = GraphKind::Edges;
        s.agents = 4;
        s.edges = vec![[1, 2], [3, 4]];
        let e = build_problem(&s).unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("connected")), "{e}");
    }

    #[test]
    fn quadratic_minimizer_is_the_target_mean() {
        let mut s = spec(LossKey::Quadratic);
        s.targets = vec![vec![1.0, 0.0], vec![2.0, 3.0], vec![0.0, 0.0]];
        let b = build_problem(&s).unwrap();
        assert_eq!(b.criticals[0].point, Vector::from_vec(vec![1.0, 1.0]));
    }

    #[test]
    fn l1_minimizer_is_soft_threshold() {
        let mut s = spec(LossKey::L1Quadratic);
        s.targets = vec![vec![1.0, 0.1], vec![1.0, 0.1], vec![1.0, -0.4]];
        s.weight = 0.2;
        let b = build_problem(&s).unwrap();
        let p = &b.criticals[0].point;
        assert!((p[0] - 0.8).abs() < 1e-15 && p[1] == 0.0);
    }
}

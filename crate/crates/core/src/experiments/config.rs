//! TOML experiment configuration. The schema is documented in
//! `docs/config.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::schedule::Schedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Consensus,
    CriticalPoint,
    SaddleAvoidance,
    DriftStats,
    ManifoldVerify,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Consensus => "consensus",
            Self::CriticalPoint => "critical-point",
            Self::SaddleAvoidance => "saddle-avoidance",
            Self::DriftStats => "drift-stats",
            Self::ManifoldVerify => "manifold-verify",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            Self::Consensus,
            Self::CriticalPoint,
            Self::SaddleAvoidance,
            Self::DriftStats,
            Self::ManifoldVerify,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::Parse(format!("unknown experiment kind `{s}`")))
    }
}

/// Either an explicit list or `{ first, count }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { first: u64, count: u64 },
}

impl SeedSpec {
    /// Sorted and deduplicated.
    pub fn resolve(&self) -> Vec<u64> {
        let mut v = match self {
            Self::List(v) => v.clone(),
            Self::Range { first, count } => (*first..first + count).collect(),
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKey {
    Zero,
    Quadratic,
    L1Quadratic,
    QuadraticSaddle,
    QuarticSaddle,
    CubicSaddle,
    AntiCoercive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    #[default]
    Path,
    Cycle,
    Complete,
    Star,
    Edges,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub loss: LossKey,
    #[serde(default = "one")]
    pub agents: usize,
    #[serde(default = "two")]
    pub agent_dim: usize,
    #[serde(default)]
    pub graph: GraphKind,
    /// 1-indexed pairs, used when `graph = "edges"`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[usize; 2]>,
    /// Per-agent targets `a_n` of the quadratic losses.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<Vec<f64>>,
    /// ℓ1 weight.
    #[serde(default)]
    pub weight: f64,
    /// Diagonal curvatures of `quadratic-saddle` and `anti-coercive`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curvature: Vec<f64>,
    /// Cubic coefficient of `cubic-saddle`.
    #[serde(default)]
    pub coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKey {
    #[default]
    None,
    Gaussian,
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKey,
    /// Standard deviation (gaussian) or radius (sphere).
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub constraint_only: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    /// One agent block (replicated) or the full stacked state; zeros if
    /// empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub point: Vec<f64>,
    /// Half-width of a seeded uniform perturbation of every coordinate.
    #[serde(default)]
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub consensus: f64,
    pub distance: f64,
    /// Classification ball radius around known critical points.
    pub ball: f64,
    /// Boundedness ceiling on `‖x‖`.
    pub ceiling: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            consensus: 1e-3,
            distance: 1e-2,
            ball: 0.1,
            ceiling: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftSpec {
    /// Restart steps `k` of the excursion runs over `[k, 2k]`.
    pub restarts: Vec<u64>,
    /// `S_k` band `[lo, hi]` for the conditional drift.
    pub band: [f64; 2],
    /// Skip the first steps of the main run in the drift average.
    pub burn_in: u64,
    pub bootstrap: usize,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            restarts: vec![100, 200, 400, 800, 1600, 3200, 6400],
            band: [0.05, 0.15],
            burn_in: 10,
            bootstrap: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    pub t_max: f64,
    pub radius: f64,
    /// Points sampled per seed for the repulsion sweep.
    pub samples: usize,
    pub sample_radius: f64,
    pub epsilons: Vec<f64>,
    /// Number of sweep times, spaced by one unit from the model start.
    pub times: usize,
}

impl Default for ManifoldSpec {
    fn default() -> Self {
        Self {
            t_start: None,
            t_max: 30.0,
            radius: 0.3,
            samples: 50,
            sample_radius: 0.05,
            epsilons: vec![1e-3, 3e-3, 1e-2],
            times: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: SeedSpec,
    pub steps: u64,
    /// Result directory; the CLI `--out` flag overrides it. Not hashed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub problem: ProblemSpec,
    pub schedule: Schedule,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub drift: DriftSpec,
    #[serde(default)]
    pub manifold: ManifoldSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML with every default filled in and `output` removed.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        toml::to_string(&c).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.resolve()
    }

    /// Structural checks that do not need the problem built.
    pub fn check(&self) -> Result<()> {
        self.schedule
            .validate()
            .map_err(|e| Error::Config(format!("schedule: {e}")))?;
        if self.seeds().is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        let n = &self.noise;
        if n.kind != NoiseKey::None && !(n.sigma > 0.0) {
            return Err(Error::Config("noise.sigma must be positive".into()));
        }
        let t = &self.tolerances;
        if [t.consensus, t.distance, t.ball, t.ceiling].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.kind == ExperimentKind::DriftStats {
            let d = &self.drift;
            if d.restarts.is_empty() || d.restarts.iter().any(|&k| k == 0) {
                return Err(Error::Config("drift.restarts must be nonempty positive steps".into()));
            }
            if !(d.band[0] >= 0.0 && d.band[1] > d.band[0]) {
                return Err(Error::Config("drift.band must satisfy 0 ≤ lo < hi".into()));
            }
        }
        if self.kind == ExperimentKind::ManifoldVerify {
            let m = &self.manifold;
            if m.epsilons.is_empty() || m.samples == 0 || m.times == 0 {
                return Err(Error::Config("manifold: need epsilons, samples and times".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
kind = "consensus"
seeds = { first = 1, count = 3 }
steps = 1000

[problem]
loss = "zero"
agents = 5

[schedule]
alpha_scale = 1.0
tau_alpha = 1.0
gamma_scale = 1.0
tau_gamma = 0.6
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml(GOOD).unwrap();
        assert_eq!(c.seeds(), vec![1, 2, 3]);
        assert_eq!(c.problem.agent_dim, 2);
        assert_eq!(c.tolerances.ball, 0.1);
        c.check().unwrap();
    }

    #[test]
    fn missing_loss_names_the_key() {
        let bad = GOOD.replace("loss = \"zero\"\n", "");
        let e = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("loss"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = GOOD.replace("agents = 5", "agents = 5\nagentz = 2");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn hash_ignores_output_and_formatting() {
        let a = ExperimentConfig::from_toml(GOOD).unwrap();
        let mut b = ExperimentConfig::from_toml(&GOOD.replace("steps = 1000", "steps   =   1000 # same")).unwrap();
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_toml(&GOOD.replace("steps = 1000", "steps = 1001")).unwrap();
        assert_ne!(a.hash(), c.hash());
        let round = ExperimentConfig::from_toml(&a.canonical()).unwrap();
        assert_eq!(round.hash(), a.hash());
    }

    #[test]
    fn bad_schedule_is_a_config_error() {
        let bad = GOOD.replace("tau_gamma = 0.6", "tau_gamma = 0.4");
        let c = ExperimentConfig::from_toml(&bad).unwrap();
        assert!(matches!(c.check(), Err(Error::Config(_))));
    }
}

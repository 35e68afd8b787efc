//! Linearization `A(t) = −∇²h(g(γ_t)) − γ_t Q`, its eigen-split with
//! continuous tracking, and the evolution operators of the split system.

use super::context::SaddleContext;
use crate::linalg::sym_eigen;
use crate::{Error, Matrix, Result, Vector};

/// Eigenvalues this close to zero cannot be assigned to either block.
pub const PARTITION_TOL: f64 = 1e-8;
/// Two overlaps within this margin make a matching ambiguous.
pub const AMBIGUITY_MARGIN: f64 = 0.05;

/// `U A Uᵀ = Λ` with the rows of `U` the eigenvectors. Unstable
/// (positive) eigenvalues come first.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub t: f64,
    pub gamma: f64,
    pub a: Matrix,
    pub u: Matrix,
    pub lambda: Vector,
    pub n_u: usize,
}

impl SpectralSplit {
    pub fn unstable(&self) -> Vec<f64> {
        self.lambda.iter().take(self.n_u).cloned().collect()
    }

    pub fn stable(&self) -> Vec<f64> {
        self.lambda.iter().skip(self.n_u).cloned().collect()
    }

    /// `‖U A Uᵀ − Λ‖_max`.
    pub fn diagonalization_error(&self) -> f64 {
        (&self.u * &self.a * self.u.transpose() - Matrix::from_diagonal(&self.lambda)).amax()
    }
}

/// `A` at penalty `gamma` and path point `g`, eigenvalues sorted
/// descending.
pub fn linearize_at_gamma(ctx: &SaddleContext, t: f64, gamma: f64, g: &Vector) -> Result<SpectralSplit> {
    let a = -(ctx.hessian(g) + ctx.penalty().matrix() * gamma);
    let (vals, vecs) = sym_eigen(&a);
    let m = vals.len();
    let mut lambda = Vector::zeros(m);
    let mut u = Matrix::zeros(m, m);
    for r in 0..m {
        let src = m - 1 - r;
        lambda[r] = vals[src];
        u.set_row(r, &vecs.column(src).transpose());
    }
    if let Some(bad) = lambda.iter().find(|l| l.abs() < PARTITION_TOL) {
        return Err(Error::Partition { t, lambda: *bad });
    }
    let n_u = lambda.iter().filter(|&&l| l > 0.0).count();
    Ok(SpectralSplit {
        t,
        gamma,
        a,
        u,
        lambda,
        n_u,
    })
}

/// [`linearize_at_gamma`] with `γ = γ_t`.
pub fn linearize(ctx: &SaddleContext, t: f64, g: &Vector) -> Result<SpectralSplit> {
    linearize_at_gamma(ctx, t, ctx.gamma().value(t), g)
}

/// Reorder and re-sign `next` to follow `prev`: greedy maximal
/// `|⟨u_i(prev), u_j(next)⟩|`. Returns whether any assignment was
/// ambiguous. Fails if tracking moves an eigenvalue across zero.
pub fn track(prev: &Matrix, prev_n_u: usize, next: SpectralSplit) -> Result<(SpectralSplit, bool)> {
    let m = next.lambda.len();
    let overlap = prev * next.u.transpose();
    let mut assigned_prev = vec![false; m];
    let mut assigned_next = vec![false; m];
    let mut perm = vec![0usize; m];
    let mut ambiguous = false;
    for _ in 0..m {
        let mut best = (0, 0, -1.0);
        for i in (0..m).filter(|&i| !assigned_prev[i]) {
            for j in (0..m).filter(|&j| !assigned_next[j]) {
                let o = overlap[(i, j)].abs();
                if o > best.2 {
                    best = (i, j, o);
                }
            }
        }
        let (i, j, o) = best;
        let runner_up = (0..m)
            .filter(|&jj| jj != j && !assigned_next[jj])
            .map(|jj| overlap[(i, jj)].abs())
            .fold(0.0, f64::max);
        if o - runner_up < AMBIGUITY_MARGIN {
            ambiguous = true;
        }
        assigned_prev[i] = true;
        assigned_next[j] = true;
        perm[i] = j;
    }
    let mut u = Matrix::zeros(m, m);
    let mut lambda = Vector::zeros(m);
    for i in 0..m {
        let j = perm[i];
        let sign = if overlap[(i, j)] < 0.0 { -1.0 } else { 1.0 };
        u.set_row(i, &(next.u.row(j) * sign));
        lambda[i] = next.lambda[j];
    }
    for (i, &l) in lambda.iter().enumerate() {
        if (i < prev_n_u) != (l > 0.0) {
            return Err(Error::Partition { t: next.t, lambda: l });
        }
    }
    Ok((
        SpectralSplit {
            u,
            lambda,
            n_u: prev_n_u,
            ..next
        },
        ambiguous,
    ))
}

/// Tracked splits over a time grid.
#[derive(Debug, Clone)]
pub struct SplitGrid {
    pub splits: Vec<SpectralSplit>,
    /// Grid times where the eigenvector matching was ambiguous.
    pub ambiguities: Vec<f64>,
}

impl SplitGrid {
    /// Linearize along `times` with path points `g` and track.
    pub fn build(ctx: &SaddleContext, times: &[f64], g: &[Vector]) -> Result<Self> {
        let mut splits: Vec<SpectralSplit> = Vec::with_capacity(times.len());
        let mut ambiguities = Vec::new();
        for (&t, gt) in times.iter().zip(g) {
            let s = linearize(ctx, t, gt)?;
            let s = match splits.last() {
                None => s,
                Some(prev) => {
                    let (s, amb) = track(&prev.u, prev.n_u, s)?;
                    if amb {
                        ambiguities.push(t);
                    }
                    s
                }
            };
            splits.push(s);
        }
        Ok(Self { splits, ambiguities })
    }

    pub fn times(&self) -> Vec<f64> {
        self.splits.iter().map(|s| s.t).collect()
    }

    fn lambda_at(&self, i: usize, t: f64) -> f64 {
        let s = &self.splits;
        let k = s.partition_point(|x| x.t <= t).clamp(1, s.len() - 1);
        let (a, b) = (&s[k - 1], &s[k]);
        let w = (t - a.t) / (b.t - a.t);
        a.lambda[i] * (1.0 - w) + b.lambda[i] * w
    }

    /// `∫_a^b λ_i` of the piecewise-linear interpolant, `a ≤ b`.
    pub fn integrate_lambda(&self, i: usize, a: f64, b: f64) -> f64 {
        let mut knots = vec![a];
        knots.extend(self.splits.iter().map(|s| s.t).filter(|&t| t > a && t < b));
        knots.push(b);
        knots
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.lambda_at(i, w[0]) + self.lambda_at(i, w[1])))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Stable,
    Unstable,
}

/// `V^s(t2, t1)` (for `t2 ≥ t1`) or `V^u(t2, t1)` (for `t2 ≤ t1`):
/// `exp(∫_{t1}^{t2} Λ)` on the chosen block, zero elsewhere.
pub fn evolution_operator(grid: &SplitGrid, t1: f64, t2: f64, which: Block) -> Result<Matrix> {
    let (lo, hi) = (grid.splits[0].t, grid.splits.last().unwrap().t);
    if t1 < lo || t1 > hi || t2 < lo || t2 > hi {
        return Err(Error::Orientation(format!("[{t1}, {t2}] outside grid [{lo}, {hi}]")));
    }
    let m = grid.splits[0].lambda.len();
    let n_u = grid.splits[0].n_u;
    let mut v = Matrix::zeros(m, m);
    match which {
        Block::Stable => {
            if t2 < t1 {
                return Err(Error::Orientation("stable operator needs t2 ≥ t1".into()));
            }
            for i in n_u..m {
                v[(i, i)] = grid.integrate_lambda(i, t1, t2).exp();
            }
        }
        Block::Unstable => {
            if t2 > t1 {
                return Err(Error::Orientation("unstable operator needs t2 ≤ t1".into()));
            }
            for i in 0..n_u {
                v[(i, i)] = (-grid.integrate_lambda(i, t2, t1)).exp();
            }
        }
    }
    Ok(v)
}

/// Relative safety margin taken off a fitted decay rate.
pub const DECAY_MARGIN: f64 = 0.1;

/// Fitted `‖V(t2,t1)‖ ≤ K e^{−rate |t2 − t1|}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub k: f64,
    pub rate: f64,
    /// The bound held on every held-out pair.
    pub holds_on_holdout: bool,
}

/// Fit on even-indexed pairs by least squares on `log ‖V‖`, shave the rate
/// by [`DECAY_MARGIN`], lift the intercept to cover every fitting pair, then
/// test the odd-indexed ones.
pub fn fit_decay(grid: &SplitGrid, pairs: &[(f64, f64)], which: Block) -> Result<DecayFit> {
    let mut obs = Vec::with_capacity(pairs.len());
    for &(t1, t2) in pairs {
        let v = evolution_operator(grid, t1, t2, which)?;
        let norm = v.diagonal().amax();
        obs.push(((t2 - t1).abs(), norm.max(1e-300).ln()));
    }
    let fit: Vec<_> = obs.iter().step_by(2).cloned().collect();
    let hold: Vec<_> = obs.iter().skip(1).step_by(2).cloned().collect();
    let n = fit.len() as f64;
    let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rate = -slope * (1.0 - DECAY_MARGIN);
    let log_k = fit.iter().map(|p| p.1 + rate * p.0).fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-9;
    let holds = hold.iter().all(|p| p.1 <= log_k - rate * p.0 + slack);
    Ok(DecayFit {
        k: log_k.exp(),
        rate,
        holds_on_holdout: holds,
    })
}

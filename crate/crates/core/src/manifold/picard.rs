//! Fixed-point solution of the stable-manifold integral equation
//!
//! ```text
//! u(t) = V^s(t,t0)(0; a_s) + ∫_{t0}^t V^s(t,τ) f(τ) dτ − ∫_t^∞ V^u(t,τ) f(τ) dτ
//! f(τ) = F̃(u(τ), τ) − U(τ) g'(γ_τ) γ̇_τ
//! ```
//!
//! Each coordinate is a scalar linear equation `y' = λ y + f`, integrated
//! exactly for `λ` frozen at the interval midpoint and `f` linear on the
//! interval (exponential product integration). The off-constraint rates grow
//! like `γ_t`, so plain trapezoid weights would need absurdly fine grids.

use super::context::SaddleContext;
use super::spectral::{linearize, track};
use crate::{Error, Matrix, Result, Vector};

/// Everything the integral equation needs at one grid time.
#[derive(Debug, Clone)]
pub struct FrameNode {
    pub t: f64,
    pub gamma: f64,
    pub g: Vector,
    pub u: Matrix,
    pub lambda: Vector,
    /// `U̇ Uᵀ`, antisymmetric.
    pub rotation_rate: Matrix,
    /// `−U g'(γ_t) γ̇_t`.
    pub forcing: Vector,
}

/// `D∇²h(g)[v]` by central differences of the Hessian.
fn hessian_derivative(ctx: &SaddleContext, g: &Vector, v: &Vector) -> Matrix {
    let n = v.norm();
    let m = g.len();
    if n == 0.0 {
        return Matrix::zeros(m, m);
    }
    let eps = 1e-4;
    let dir = v / n;
    (ctx.hessian(&(g + &dir * eps)) - ctx.hessian(&(g - &dir * eps))) * (n / (2.0 * eps))
}

/// Frames at `times`, tracked from `reference` (rows ordered and signed as
/// the caller wants them) and warm-starting `g` from `g_warm`.
pub fn frame_nodes(
    ctx: &SaddleContext,
    times: &[f64],
    reference: &Matrix,
    n_u: usize,
    g_warm: &Vector,
) -> Result<Vec<FrameNode>> {
    let mut out: Vec<FrameNode> = Vec::with_capacity(times.len());
    let mut warm = g_warm.clone();
    let mut prev = reference.clone();
    for &t in times {
        let gamma = ctx.gamma().value(t);
        let g = ctx.solve_g(gamma, &warm)?;
        let split = linearize(ctx, t, &g)?;
        let (split, _) = track(&prev, n_u, split)?;
        let gdot = ctx.g_prime(&g, gamma)? * ctx.gamma().derivative(t);
        let adot = -(hessian_derivative(ctx, &g, &gdot) + ctx.penalty().matrix() * ctx.gamma().derivative(t));
        let s = &split.u * adot * split.u.transpose();
        let m = g.len();
        let mut rate = Matrix::zeros(m, m);
        let scale = split.lambda.amax().max(1.0);
        for i in 0..m {
            for j in 0..m {
                let gap = split.lambda[i] - split.lambda[j];
                // inside a degenerate eigenspace the frame is arbitrary
                if i != j && gap.abs() > 1e-10 * scale {
                    rate[(i, j)] = s[(i, j)] / gap;
                }
            }
        }
        let forcing = -(&split.u * &gdot);
        prev = split.u.clone();
        warm = g.clone();
        out.push(FrameNode {
            t,
            gamma,
            g,
            u: split.u,
            lambda: split.lambda,
            rotation_rate: rate,
            forcing,
        });
    }
    Ok(out)
}

/// `F̃(z, t) + forcing` at one node.
pub fn nonlinearity(ctx: &SaddleContext, node: &FrameNode, z: &Vector) -> Vector {
    let x = node.u.transpose() * z + &node.g;
    let field = -ctx.penalized_gradient(&x, node.gamma);
    &node.u * field - node.lambda.component_mul(z) + &node.rotation_rate * z + &node.forcing
}

/// `(e^c − 1)/c` and `(e^c − 1 − c)/c²`.
fn phi12(c: f64) -> (f64, f64) {
    if c.abs() < 1e-3 {
        let c2 = c * c;
        (
            1.0 + c / 2.0 + c2 / 6.0 + c2 * c / 24.0,
            0.5 + c / 6.0 + c2 / 24.0 + c2 * c / 120.0,
        )
    } else {
        let e = c.exp_m1();
        (e / c, (e - c) / (c * c))
    }
}

/// Times and diagonal rates of the split system, the only frame data the
/// integral operator itself needs.
#[derive(Debug, Clone)]
pub struct RateGrid {
    pub times: Vec<f64>,
    pub lambda: Vec<Vector>,
}

impl RateGrid {
    pub fn from_nodes(nodes: &[FrameNode]) -> Self {
        Self {
            times: nodes.iter().map(|n| n.t).collect(),
            lambda: nodes.iter().map(|n| n.lambda.clone()).collect(),
        }
    }
}

/// One application of the integral operator to the sampled forcing `f`.
/// Returns `u` on the grid.
pub fn integral_operator(grid: &RateGrid, n_u: usize, a_s: &Vector, f: &[Vector]) -> Vec<Vector> {
    let (t, lam) = (&grid.times, &grid.lambda);
    let n = t.len();
    let m = lam[0].len();
    let mut u = vec![Vector::zeros(m); n];
    for i in 0..m {
        if i >= n_u {
            let mut y = a_s[i - n_u];
            u[0][i] = y;
            for j in 0..n - 1 {
                let h = t[j + 1] - t[j];
                let mu = 0.5 * (lam[j][i] + lam[j + 1][i]) * h;
                let (p1, p2) = phi12(mu);
                y = mu.exp() * y + h * (p1 - p2) * f[j][i] + h * p2 * f[j + 1][i];
                u[j + 1][i] = y;
            }
        } else {
            let mut y = 0.0;
            for j in (0..n - 1).rev() {
                let h = t[j + 1] - t[j];
                let nu = -0.5 * (lam[j][i] + lam[j + 1][i]) * h;
                let (p1, p2) = phi12(nu);
                y = nu.exp() * y + h * p2 * f[j][i] + h * (p1 - p2) * f[j + 1][i];
                u[j][i] = -y;
            }
        }
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Bound on the estimated contribution of the truncated unstable tail.
    pub tail_tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 200,
            tail_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub times: Vec<f64>,
    pub u: Vec<Vector>,
    pub iterations: usize,
    /// `‖u_{k+1} − u_k‖ / ‖u_k − u_{k−1}‖` per iteration.
    pub ratios: Vec<f64>,
    /// Sup-norm change from re-substituting the converged `u`.
    pub residual: f64,
    /// Estimate of what the truncation of `∫_t^∞` drops at the horizon.
    pub dropped_tail: f64,
}

impl PicardSolution {
    /// Unstable coordinates of `u(t0)`.
    pub fn psi(&self, n_u: usize) -> Vector {
        self.u[0].rows(0, n_u).into_owned()
    }
}

fn sup_diff(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

/// Iterate from `u ≡ 0` against the nodal nonlinearity of the tracked
/// frames. The tail window is everything after `horizon` on the grid.
pub fn picard_iterate(
    ctx: &SaddleContext,
    nodes: &[FrameNode],
    n_u: usize,
    a_s: &Vector,
    horizon: f64,
    opts: &PicardOptions,
) -> Result<PicardSolution> {
    let grid = RateGrid::from_nodes(nodes);
    picard_fixed_point(&grid, n_u, a_s, horizon, opts, &|j, z| nonlinearity(ctx, &nodes[j], z))
}

/// The fixed-point loop for an arbitrary nodal nonlinearity `f(j, z)`.
pub fn picard_fixed_point(
    grid: &RateGrid,
    n_u: usize,
    a_s: &Vector,
    horizon: f64,
    opts: &PicardOptions,
    f: &(dyn Fn(usize, &Vector) -> Vector + Sync),
) -> Result<PicardSolution> {
    let m = grid.lambda[0].len();
    if a_s.len() != m - n_u {
        return Err(Error::Dimension {
            expected: m - n_u,
            got: a_s.len(),
        });
    }
    let eval = |u: &[Vector]| -> Vec<Vector> { u.iter().enumerate().map(|(j, z)| f(j, z)).collect() };
    let mut u = vec![Vector::zeros(m); grid.times.len()];
    let mut ratios = Vec::new();
    let mut last_delta = f64::INFINITY;
    let mut growth = 0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iters {
        let next = integral_operator(grid, n_u, a_s, &eval(&u));
        let delta = sup_diff(&next, &u);
        if !delta.is_finite() {
            return Err(Error::NonContraction(format!("non-finite iterate at iteration {it}")));
        }
        if last_delta.is_finite() && last_delta > 0.0 {
            let r = delta / last_delta;
            ratios.push(r);
            growth = if r > 1.0 { growth + 1 } else { 0 };
            if growth >= 3 {
                return Err(Error::NonContraction(format!(
                    "update grew for 3 iterations (last ratio {r:.3})"
                )));
            }
        }
        u = next;
        iterations = it;
        last_delta = delta;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonContraction(format!(
            "no convergence in {} iterations (last update {last_delta:e})",
            opts.max_iters
        )));
    }
    let fu = eval(&u);
    let residual = sup_diff(&integral_operator(grid, n_u, a_s, &fu), &u);
    let dropped_tail = if n_u == 0 {
        0.0
    } else {
        let last = grid.times.len() - 1;
        let sigma = grid
            .times
            .iter()
            .zip(&grid.lambda)
            .filter(|(&t, _)| t >= horizon)
            .flat_map(|(_, l)| l.iter().take(n_u).cloned().collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min);
        let window = grid.times[last] - horizon;
        let f_end = fu[last].rows(0, n_u).amax();
        (-sigma * window).exp() * f_end / sigma
    };
    if dropped_tail > opts.tail_tol {
        return Err(Error::HorizonTooShort(dropped_tail));
    }
    Ok(PicardSolution {
        times: grid.times.clone(),
        u,
        iterations,
        ratios,
        residual,
        dropped_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_series_matches_closed_form() {
        for c in [-2e-3, -1e-3, 1e-3, 2e-3] {
            let (a, b) = phi12(c);
            let (a2, b2) = phi12(c * (1.0 + 1e-12));
            assert!((a - a2).abs() < 1e-9 && (b - b2).abs() < 1e-9);
        }
        let (a, b) = phi12(0.0);
        assert_eq!((a, b), (1.0, 0.5));
    }

    fn const_nodes(lambda: &[f64], n: usize, h: f64) -> Vec<FrameNode> {
        let m = lambda.len();
        (0..n)
            .map(|j| FrameNode {
                t: j as f64 * h,
                gamma: 0.0,
                g: Vector::zeros(m),
                u: Matrix::identity(m, m),
                lambda: Vector::from_column_slice(lambda),
                rotation_rate: Matrix::zeros(m, m),
                forcing: Vector::zeros(m),
            })
            .collect()
    }

    #[test]
    fn constant_forcing_is_integrated_exactly() {
        // y' = −2y + 1, y(0) = 0.5 → y(t) = ½ for all t
        let nodes = const_nodes(&[3.0, -2.0], 41, 0.25);
        let f = vec![Vector::from_vec(vec![3.0, 1.0]); 41];
        let u = integral_operator(&RateGrid::from_nodes(&nodes), 1, &Vector::from_vec(vec![0.5]), &f);
        for z in &u {
            assert!((z[1] - 0.5).abs() < 1e-14);
        }
        // unstable: u = −∫_t^T e^{−3(τ−t)} 3 dτ = −(1 − e^{−3(T−t)})
        let t_end = 10.0;
        for (nd, z) in nodes.iter().zip(&u) {
            let want = -(1.0 - (-3.0 * (t_end - nd.t)).exp());
            assert!((z[0] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_forcing_is_integrated_exactly() {
        // y' = −y + t, y(0) = 0 → y = t − 1 + e^{−t}
        let nodes = const_nodes(&[-1.0], 21, 0.5);
        let f: Vec<_> = nodes.iter().map(|n| Vector::from_vec(vec![n.t])).collect();
        let u = integral_operator(&RateGrid::from_nodes(&nodes), 0, &Vector::from_vec(vec![0.0]), &f);
        for (nd, z) in nodes.iter().zip(&u) {
            assert!((z[0] - (nd.t - 1.0 + (-nd.t).exp())).abs() < 1e-12);
        }
    }
}

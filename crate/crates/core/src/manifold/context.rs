//! The saddle of `h|_C` and the perturbed saddle path `g(γ)`.

use crate::graph::PenaltyMatrix;
use crate::linalg::{min_singular_value, sym_eigen};
use crate::loss::{hessian_or_fd, LossOracle, Smoothness};
use crate::schedule::GammaCurve;
use crate::{Error, Matrix, Result, Vector};

/// Residual target for Newton on `∇h(x) + γQx = 0`.
pub const PATH_TOL: f64 = 1e-9;

/// A critical point `x*` of `h|_C` with invertible restricted Hessian.
///
/// `n_u` counts the positive eigenvalues of `B = −∇²h|_C(x*)`, i.e. the
/// directions along which the restricted gradient flow leaves `x*`.
/// Extrema are accepted (`n_u = 0` or `n_u = d`); [`is_saddle`] tells them
/// apart.
///
/// [`is_saddle`]: SaddleContext::is_saddle
#[derive(Debug, Clone)]
pub struct SaddleContext {
    loss: LossOracle,
    q: PenaltyMatrix,
    gamma: GammaCurve,
    x_star: Vector,
    basis_c: Matrix,
    restricted_hessian: Matrix,
    n_u: usize,
}

impl SaddleContext {
    pub fn new(loss: LossOracle, q: PenaltyMatrix, gamma: GammaCurve, x_star: Vector) -> Result<Self> {
        let m = q.dim();
        if loss.dim() != m || x_star.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: if loss.dim() != m { loss.dim() } else { x_star.len() },
            });
        }
        match loss.smoothness() {
            Smoothness::C3 => {}
            Smoothness::C3Near(p) if (&p - &x_star).norm() < 1e-12 => {}
            other => {
                return Err(Error::Saddle(format!(
                    "loss must be C3 near the saddle, got {other:?}"
                )))
            }
        }
        let qx = (q.matrix() * &x_star).norm();
        if qx > 1e-9 * (1.0 + x_star.norm()) {
            return Err(Error::Saddle(format!("x* is not in the constraint set (‖Qx*‖ = {qx:e})")));
        }
        let basis_c = q.rotation().constraint_basis();
        let grad_c = basis_c.transpose() * loss.subgradient(&x_star);
        if grad_c.norm() > 1e-9 {
            return Err(Error::Saddle(format!(
                "x* is not critical for h|_C (‖∇h|_C‖ = {:e})",
                grad_c.norm()
            )));
        }
        let hess = hessian_or_fd(loss.as_ref(), &x_star);
        let restricted_hessian = basis_c.transpose() * &hess * &basis_c;
        let (vals, _) = sym_eigen(&restricted_hessian);
        let min_abs = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        if min_abs <= 1e-6 {
            return Err(Error::Saddle(format!(
                "restricted Hessian is singular (min |eigenvalue| = {min_abs:e})"
            )));
        }
        let n_u = vals.iter().filter(|&&v| v < 0.0).count();
        Ok(Self {
            loss,
            q,
            gamma,
            x_star,
            basis_c,
            restricted_hessian,
            n_u,
        })
    }

    pub fn loss(&self) -> &LossOracle {
        &self.loss
    }
    pub fn penalty(&self) -> &PenaltyMatrix {
        &self.q
    }
    pub fn gamma(&self) -> &GammaCurve {
        &self.gamma
    }
    pub fn x_star(&self) -> &Vector {
        &self.x_star
    }
    pub fn dim(&self) -> usize {
        self.q.dim()
    }
    pub fn constraint_dim(&self) -> usize {
        self.q.constraint_dim()
    }
    pub fn n_u(&self) -> usize {
        self.n_u
    }
    pub fn n_s(&self) -> usize {
        self.dim() - self.n_u
    }
    /// `M × d` orthonormal basis of `C`.
    pub fn constraint_basis(&self) -> &Matrix {
        &self.basis_c
    }
    /// `∇²h|_C(x*)` in the basis of [`constraint_basis`](Self::constraint_basis).
    pub fn restricted_hessian(&self) -> &Matrix {
        &self.restricted_hessian
    }
    /// Neither a minimum nor a maximum of `h|_C`.
    pub fn is_saddle(&self) -> bool {
        self.n_u > 0 && self.n_u < self.constraint_dim()
    }

    pub fn hessian(&self, x: &Vector) -> Matrix {
        hessian_or_fd(self.loss.as_ref(), x)
    }

    /// `∇²h(x) + γQ`.
    pub fn penalized_hessian(&self, x: &Vector, gamma: f64) -> Matrix {
        self.hessian(x) + self.q.matrix() * gamma
    }

    /// `∇h(x) + γQx`.
    pub fn penalized_gradient(&self, x: &Vector, gamma: f64) -> Vector {
        self.loss.subgradient(x) + self.q.matrix() * x * gamma
    }

    /// Smallest `γ = 2^j ≥ 1` at which `∇²h(x*) + γQ` has smallest singular
    /// value above 0.1.
    pub fn gamma0(&self) -> Result<f64> {
        let h = self.hessian(&self.x_star);
        let mut g = 1.0;
        for _ in 0..64 {
            if min_singular_value(&(&h + self.q.matrix() * g)) > 0.1 {
                return Ok(g);
            }
            g *= 2.0;
        }
        Err(Error::Saddle("no γ₀ makes the penalized Hessian well conditioned".into()))
    }

    /// Damped Newton on `∇h(x) + γQx = 0` from `warm`.
    pub fn solve_g(&self, gamma: f64, warm: &Vector) -> Result<Vector> {
        let mut x = warm.clone();
        let mut r = self.penalized_gradient(&x, gamma);
        let scale = 1.0 + gamma * self.q.matrix().amax();
        for _ in 0..100 {
            if r.norm() <= 1e-13 * scale {
                break;
            }
            let jac = self.penalized_hessian(&x, gamma);
            let step = jac
                .lu()
                .solve(&r)
                .ok_or_else(|| Error::Saddle(format!("singular penalized Hessian at γ = {gamma}")))?;
            let mut t = 1.0;
            loop {
                let cand = &x - &step * t;
                let rc = self.penalized_gradient(&cand, gamma);
                if rc.norm() < r.norm() || t < 1e-6 {
                    x = cand;
                    r = rc;
                    break;
                }
                t *= 0.5;
            }
        }
        if !(r.norm() <= PATH_TOL) {
            return Err(Error::Newton { gamma });
        }
        Ok(x)
    }

    /// `g'(γ) = −(∇²h(g) + γQ)⁻¹ Q g`.
    pub fn g_prime(&self, g: &Vector, gamma: f64) -> Result<Vector> {
        let rhs = self.q.matrix() * g;
        self.penalized_hessian(g, gamma)
            .lu()
            .solve(&rhs)
            .map(|v| -v)
            .ok_or_else(|| Error::Saddle(format!("singular penalized Hessian at γ = {gamma}")))
    }
}

#[derive(Debug, Clone)]
pub struct PerturbedSaddlePath {
    pub gamma_grid: Vec<f64>,
    pub points: Vec<Vector>,
    /// Polyline length plus the closing segment to `x*`.
    pub arc_length_estimate: f64,
    pub gamma0: f64,
}

/// Newton with continuation along an increasing `γ` grid, the first point
/// started from `x*`.
pub fn solve_perturbed_saddle(ctx: &SaddleContext, gamma_grid: &[f64]) -> Result<PerturbedSaddlePath> {
    if gamma_grid.is_empty() || gamma_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("γ grid must be nonempty and increasing".into()));
    }
    let gamma0 = ctx.gamma0()?;
    let mut points = Vec::with_capacity(gamma_grid.len());
    let mut warm = ctx.x_star().clone();
    for &g in gamma_grid {
        let p = ctx.solve_g(g, &warm)?;
        warm = p.clone();
        points.push(p);
    }
    let mut arc: f64 = points.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum();
    arc += (points.last().unwrap() - ctx.x_star()).norm();
    Ok(PerturbedSaddlePath {
        gamma_grid: gamma_grid.to_vec(),
        points,
        arc_length_estimate: arc,
        gamma0,
    })
}

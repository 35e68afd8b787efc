//! The classical stable manifold of the restricted flow `ċ = −∇(h|_C)(c)`
//! at `x*`, and its comparison with the time-varying one.

use super::context::SaddleContext;
use super::model::ManifoldModel;
use super::picard::{picard_fixed_point, PicardOptions, PicardSolution, RateGrid};
use crate::linalg::sym_eigen;
use crate::{Error, Matrix, Result, Vector};

/// Coordinates `y = V Bᵀ(x − x*)` on `C`, `V` the eigenbasis of
/// `B = −∇²h|_C(x*)` with unstable rows first.
#[derive(Debug, Clone)]
pub struct AutonomousManifold {
    ctx: SaddleContext,
    v: Matrix,
    lambda: Vector,
    n_u: usize,
    step: f64,
    horizon: f64,
    span: f64,
    opts: PicardOptions,
}

impl AutonomousManifold {
    pub fn new(ctx: SaddleContext, step: f64, opts: PicardOptions) -> Result<Self> {
        let b = -ctx.restricted_hessian();
        let (vals, vecs) = sym_eigen(&b);
        let d = vals.len();
        let mut v = Matrix::zeros(d, d);
        let mut lambda = Vector::zeros(d);
        for r in 0..d {
            lambda[r] = vals[d - 1 - r];
            v.set_row(r, &vecs.column(d - 1 - r).transpose());
        }
        let n_u = ctx.n_u();
        let stable_floor = lambda.iter().skip(n_u).cloned().fold(f64::NEG_INFINITY, f64::max);
        let sigma = lambda.iter().take(n_u).cloned().fold(f64::INFINITY, f64::min);
        let horizon = if stable_floor.is_finite() { 8.0 / stable_floor.abs() } else { 8.0 / sigma };
        let tail = if n_u > 0 { 10.0 / sigma } else { 0.0 };
        Ok(Self {
            ctx,
            v,
            lambda,
            n_u,
            step,
            horizon,
            span: horizon + tail,
            opts,
        })
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }
    pub fn n_s(&self) -> usize {
        self.lambda.len() - self.n_u
    }
    /// Rows are the eigenvectors of `B` in constraint-basis coordinates.
    pub fn frame(&self) -> &Matrix {
        &self.v
    }
    pub fn eigenvalues(&self) -> &Vector {
        &self.lambda
    }

    /// Flip frame rows so each has positive overlap with `reference`
    /// (rows in constraint-basis coordinates, same order).
    pub fn align_signs(&mut self, reference: &Matrix) {
        for r in 0..self.v.nrows().min(reference.nrows()) {
            if self.v.row(r).dot(&reference.row(r)) < 0.0 {
                let flipped = -self.v.row(r);
                self.v.set_row(r, &flipped);
            }
        }
    }

    /// Point of `R^M` with coordinates `y`.
    pub fn to_x(&self, y: &Vector) -> Vector {
        self.ctx.x_star() + self.ctx.constraint_basis() * (self.v.transpose() * y)
    }

    /// Coordinates of the projection of `x` onto `C`.
    pub fn to_y(&self, x: &Vector) -> Vector {
        &self.v * (self.ctx.constraint_basis().transpose() * (x - self.ctx.x_star()))
    }

    fn nonlinearity(&self, y: &Vector) -> Vector {
        let x = self.to_x(y);
        let grad_c = self.ctx.constraint_basis().transpose() * self.ctx.loss().subgradient(&x);
        -(&self.v * grad_c) - self.lambda.component_mul(y)
    }

    pub fn picard(&self, a_s: &Vector) -> Result<PicardSolution> {
        let n = (self.span / self.step).ceil() as usize;
        let grid = RateGrid {
            times: (0..=n).map(|j| j as f64 * self.step).collect(),
            lambda: vec![self.lambda.clone(); n + 1],
        };
        picard_fixed_point(&grid, self.n_u, a_s, self.horizon, &self.opts, &|_, y| self.nonlinearity(y))
    }

    /// `ψ*(a_s)`.
    pub fn psi(&self, a_s: &Vector) -> Result<Vector> {
        Ok(self.picard(a_s)?.psi(self.n_u))
    }

    /// `Φ*(y) = (y_u − ψ*(y_s); y_s)`.
    pub fn rectify(&self, y: &Vector) -> Result<Vector> {
        let ys = y.rows(self.n_u, self.n_s()).into_owned();
        let mut w = y.clone();
        let p = self.psi(&ys)?;
        for i in 0..self.n_u {
            w[i] -= p[i];
        }
        Ok(w)
    }

    /// The manifold point over `a_s`, in original coordinates.
    pub fn manifold_point(&self, a_s: &Vector) -> Result<Vector> {
        let p = self.psi(a_s)?;
        let y = Vector::from_iterator(self.lambda.len(), p.iter().chain(a_s.iter()).cloned());
        Ok(self.to_x(&y))
    }
}

/// One row of the comparison sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub t0: f64,
    /// Largest `‖P_C(x_nonaut − x_aut)‖` over the samples.
    pub gap: f64,
}

/// For each `t0` and each in-constraint stable coordinate vector in
/// `samples`, build the non-autonomous manifold point (same coordinates,
/// off-constraint stable coordinates zero) and the autonomous one, and
/// record the projected distance.
pub fn compare_with_model(
    model: &ManifoldModel,
    auto: &AutonomousManifold,
    t_grid: &[f64],
    samples: &[Vector],
) -> Result<Vec<ComparisonRow>> {
    let ctx = model.context();
    let basis = ctx.constraint_basis();
    let proj = basis * basis.transpose();
    let m = ctx.dim();
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t0 in t_grid {
        let u = model.frame(t0)?;
        // rows of U(t0) that live mostly in C, in frame order
        let inside: Vec<usize> = (0..m)
            .filter(|&i| (basis.transpose() * u.row(i).transpose()).norm_squared() > 0.5)
            .collect();
        if inside.len() != auto.frame().nrows() {
            return Err(Error::DegenerateSpectrum(format!(
                "{} frame rows lie in C at t = {t0}, expected {}",
                inside.len(),
                auto.frame().nrows()
            )));
        }
        let stable_inside: Vec<usize> = inside.iter().cloned().filter(|&i| i >= model.n_u()).collect();
        let mut gap: f64 = 0.0;
        for a in samples {
            if a.len() != stable_inside.len() {
                return Err(Error::Dimension {
                    expected: stable_inside.len(),
                    got: a.len(),
                });
            }
            let mut zs = Vector::zeros(model.n_s());
            for (k, &i) in stable_inside.iter().enumerate() {
                let v_row = auto.frame().row(auto.n_u() + k);
                let sign = v_row.dot(&(basis.transpose() * u.row(i).transpose()).transpose()).signum();
                zs[i - model.n_u()] = sign * a[k];
            }
            let x_non = model.manifold_point(t0, &zs)?;
            let x_aut = auto.manifold_point(a)?;
            gap = gap.max((&proj * (x_non - x_aut)).norm());
        }
        rows.push(ComparisonRow { t0, gap });
    }
    Ok(rows)
}

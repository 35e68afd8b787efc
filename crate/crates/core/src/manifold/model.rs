//! The built stable-manifold model: tracked frames, `ψ`, `Φ`, `η`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::context::{PerturbedSaddlePath, SaddleContext};
use super::picard::{frame_nodes, picard_iterate, FrameNode, PicardOptions, PicardSolution};
use super::spectral::{linearize, SplitGrid};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldOptions {
    /// First model time. `None` picks the first integer time after which
    /// `A(t)` has the in-constraint unstable count, plus one.
    pub t_start: Option<f64>,
    pub t_max: f64,
    /// Spacing of the reference frame grid.
    pub frame_spacing: f64,
    /// Initial Picard step; halved at build until `ψ` is stable.
    pub picard_step: f64,
    pub min_picard_step: f64,
    /// Validity ball radius `r` in `z` coordinates.
    pub radius: f64,
    pub picard: PicardOptions,
    /// Target accuracy of `ψ` for the step-halving check.
    pub psi_tol: f64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self {
            t_start: None,
            t_max: 100.0,
            frame_spacing: 0.1,
            picard_step: 0.05,
            min_picard_step: 0.005,
            radius: 0.3,
            picard: PicardOptions::default(),
            psi_tol: 1e-7,
        }
    }
}

pub struct ManifoldModel {
    ctx: SaddleContext,
    opts: ManifoldOptions,
    t_start: f64,
    grid: SplitGrid,
    g_ref: Vec<Vector>,
    frozen: bool,
    flat: bool,
    n_u: usize,
    step: f64,
    horizon_len: f64,
    tail_len: f64,
    stable_floor: f64,
    sigma_hat: f64,
    cache: Mutex<HashMap<(u64, u64), Arc<Vec<FrameNode>>>>,
}

impl std::fmt::Debug for ManifoldModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManifoldModel")
            .field("t_start", &self.t_start)
            .field("t_max", &self.opts.t_max)
            .field("n_u", &self.n_u)
            .field("step", &self.step)
            .field("frozen", &self.frozen)
            .finish()
    }
}

fn start_time(ctx: &SaddleContext, t_max: f64) -> Result<f64> {
    let gamma0 = ctx.gamma0()?;
    let c = ctx.gamma();
    let mut t = if c.exponent > 0.0 {
        (gamma0 / c.scale).powf(1.0 / c.exponent).max(1.0).ceil()
    } else {
        1.0
    };
    let mut warm = ctx.x_star().clone();
    while t <= t_max {
        if let Ok(g) = ctx.solve_g(c.value(t), &warm) {
            if let Ok(s) = linearize(ctx, t, &g) {
                if s.n_u == ctx.n_u() {
                    return Ok(t + 1.0);
                }
            }
            warm = g;
        }
        t += 1.0;
    }
    Err(Error::Saddle(format!(
        "the spectral split of A(t) never settles to n_u = {} before t = {t_max}",
        ctx.n_u()
    )))
}

impl ManifoldModel {
    pub fn build(ctx: SaddleContext, opts: ManifoldOptions) -> Result<Self> {
        if !(opts.radius > 0.0 && opts.frame_spacing > 0.0 && opts.picard_step > 0.0) {
            return Err(Error::Parameter("radius and steps must be positive".into()));
        }
        let t_start = match opts.t_start {
            Some(t) => t,
            None => start_time(&ctx, opts.t_max)?,
        };
        if t_start >= opts.t_max {
            return Err(Error::Parameter(format!("t_start = {t_start} is not below t_max = {}", opts.t_max)));
        }
        let count = ((opts.t_max - t_start) / opts.frame_spacing).round() as usize;
        let times: Vec<f64> = (0..=count).map(|i| t_start + i as f64 * opts.frame_spacing).collect();
        let mut g_ref = Vec::with_capacity(times.len());
        let mut warm = ctx.x_star().clone();
        for &t in &times {
            let g = ctx.solve_g(ctx.gamma().value(t), &warm)?;
            warm = g.clone();
            g_ref.push(g);
        }
        let grid = SplitGrid::build(&ctx, &times, &g_ref)?;
        let n_u = grid.splits[0].n_u;
        if n_u != ctx.n_u() {
            return Err(Error::Partition {
                t: t_start,
                lambda: grid.splits[0].lambda[n_u.min(grid.splits[0].lambda.len() - 1)],
            });
        }
        let first = &grid.splits[0];
        let fixed_frame = grid
            .splits
            .iter()
            .zip(&g_ref)
            .all(|(s, g)| (&s.u - &first.u).amax() < 1e-13 && (g - &g_ref[0]).amax() < 1e-13);
        let frozen = fixed_frame && grid.splits.iter().all(|s| (&s.lambda - &first.lambda).amax() < 1e-13);
        // quadratic h with a fixed frame and a fixed path: F̃ and the forcing
        // vanish, so ψ ≡ 0
        let flat = fixed_frame && ctx.loss().is_quadratic() && ctx.g_prime(&g_ref[0], first.gamma)?.amax() < 1e-13;
        let stable_floor = grid
            .splits
            .iter()
            .flat_map(|s| s.stable())
            .fold(f64::NEG_INFINITY, f64::max);
        let sigma_hat = grid.splits.iter().flat_map(|s| s.unstable()).fold(f64::INFINITY, f64::min);
        let horizon_len = if stable_floor.is_finite() { 8.0 / stable_floor.abs() } else { 8.0 / sigma_hat };
        let tail_len = if n_u > 0 { 10.0 / sigma_hat } else { 0.0 };
        let mut model = Self {
            ctx,
            opts,
            t_start,
            grid,
            g_ref,
            frozen,
            flat,
            n_u,
            step: opts.picard_step,
            horizon_len,
            tail_len,
            stable_floor,
            sigma_hat,
            cache: Mutex::new(HashMap::new()),
        };
        model.choose_step()?;
        Ok(model)
    }

    fn choose_step(&mut self) -> Result<()> {
        let n_s = self.n_s();
        if self.n_u == 0 || n_s == 0 || self.flat {
            return Ok(());
        }
        let mut probe = Vector::zeros(n_s);
        probe[0] = self.opts.radius / 6.0;
        let mut prev = self.psi(self.t_start, &probe)?;
        while self.step / 2.0 >= self.opts.min_picard_step {
            self.step /= 2.0;
            let next = self.psi(self.t_start, &probe)?;
            let change = (&next - &prev).amax();
            prev = next;
            // second order in the step: the coarser solution is off by
            // about 4/3 of the change (Richardson)
            if change * 4.0 / 3.0 < self.opts.psi_tol {
                self.step *= 2.0;
                break;
            }
        }
        Ok(())
    }

    pub fn context(&self) -> &SaddleContext {
        &self.ctx
    }
    pub fn options(&self) -> &ManifoldOptions {
        &self.opts
    }
    pub fn t_start(&self) -> f64 {
        self.t_start
    }
    pub fn t_max(&self) -> f64 {
        self.opts.t_max
    }
    pub fn n_u(&self) -> usize {
        self.n_u
    }
    pub fn n_s(&self) -> usize {
        self.ctx.dim() - self.n_u
    }
    pub fn radius(&self) -> f64 {
        self.opts.radius
    }
    /// Picard grid step in use.
    pub fn step(&self) -> f64 {
        self.step
    }
    /// The reference split grid.
    pub fn splits(&self) -> &SplitGrid {
        &self.grid
    }
    /// The frames do not move (constant `A`, constant `g`).
    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
    /// `ψ ≡ 0` is known in closed form.
    pub fn is_flat(&self) -> bool {
        self.flat
    }
    /// Largest stable eigenvalue over the reference grid (negative).
    pub fn stable_floor(&self) -> f64 {
        self.stable_floor
    }
    /// Smallest unstable eigenvalue over the reference grid.
    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }
    /// Picard span `horizon + tail window`.
    pub fn picard_span(&self) -> (f64, f64) {
        (self.horizon_len, self.tail_len)
    }

    /// `g(γ_t)` on the reference grid as a path in `γ`.
    pub fn path(&self) -> PerturbedSaddlePath {
        let gamma_grid: Vec<f64> = self.grid.splits.iter().map(|s| s.gamma).collect();
        let mut arc: f64 = self.g_ref.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum();
        arc += (self.g_ref.last().unwrap() - self.ctx.x_star()).norm();
        PerturbedSaddlePath {
            gamma_grid,
            points: self.g_ref.clone(),
            arc_length_estimate: arc,
            gamma0: self.ctx.gamma0().unwrap_or(f64::NAN),
        }
    }

    fn check_time(&self, t: f64) -> Result<usize> {
        if !(t >= self.t_start - 1e-12 && t <= self.opts.t_max + 1e-12) {
            return Err(Error::Parameter(format!(
                "t = {t} outside the model range [{}, {}]",
                self.t_start, self.opts.t_max
            )));
        }
        let i = ((t - self.t_start) / self.opts.frame_spacing).floor() as usize;
        Ok(i.min(self.grid.splits.len() - 1))
    }

    fn nodes(&self, t0: f64, step: f64) -> Result<Arc<Vec<FrameNode>>> {
        let key = (t0.to_bits(), step.to_bits());
        if let Some(n) = self.cache.lock().unwrap().get(&key) {
            return Ok(n.clone());
        }
        let count = ((self.horizon_len + self.tail_len) / step).ceil() as usize;
        let times: Vec<f64> = (0..=count).map(|j| t0 + j as f64 * step).collect();
        let nodes = if self.frozen {
            let base = self.frame_at(t0)?;
            times.iter().map(|&t| FrameNode { t, ..base.clone() }).collect()
        } else {
            let i = self.check_time(t0)?;
            frame_nodes(&self.ctx, &times, &self.grid.splits[i].u, self.n_u, &self.g_ref[i])?
        };
        let nodes = Arc::new(nodes);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() > 256 {
            cache.clear();
        }
        cache.insert(key, nodes.clone());
        Ok(nodes)
    }

    /// Frame data at an arbitrary model time, tracked from the reference grid.
    pub fn frame_at(&self, t: f64) -> Result<FrameNode> {
        let i = self.check_time(t)?;
        if self.flat {
            let s = &self.grid.splits[0];
            let gamma = self.ctx.gamma().value(t);
            let a = -self.ctx.penalized_hessian(&self.g_ref[0], gamma);
            let lambda = (&s.u * a * s.u.transpose()).diagonal();
            let m = lambda.len();
            return Ok(FrameNode {
                t,
                gamma,
                g: self.g_ref[0].clone(),
                u: s.u.clone(),
                lambda,
                rotation_rate: Matrix::zeros(m, m),
                forcing: Vector::zeros(m),
            });
        }
        let mut n = frame_nodes(&self.ctx, &[t], &self.grid.splits[i].u, self.n_u, &self.g_ref[i])?;
        Ok(n.pop().unwrap())
    }

    /// `T(x, t) = U(t)(x − g(γ_t))`.
    pub fn to_z(&self, x: &Vector, t: f64) -> Result<Vector> {
        let f = self.frame_at(t)?;
        Ok(&f.u * (x - &f.g))
    }

    /// Inverse of [`to_z`](Self::to_z).
    pub fn from_z(&self, z: &Vector, t: f64) -> Result<Vector> {
        let f = self.frame_at(t)?;
        Ok(f.u.transpose() * z + &f.g)
    }

    /// Solve the integral equation from `(t0, a_s)`.
    pub fn picard(&self, t0: f64, a_s: &Vector) -> Result<PicardSolution> {
        self.picard_with_step(t0, a_s, self.step)
    }

    pub fn picard_with_step(&self, t0: f64, a_s: &Vector, step: f64) -> Result<PicardSolution> {
        let lim = self.opts.radius / 3.0;
        if a_s.norm() > lim {
            return Err(Error::OutOfBall {
                norm: a_s.norm(),
                radius: lim,
            });
        }
        self.check_time(t0)?;
        let nodes = self.nodes(t0, step)?;
        picard_iterate(&self.ctx, &nodes, self.n_u, a_s, t0 + self.horizon_len, &self.opts.picard)
    }

    /// `ψ(t0, z_s)`: unstable coordinates of the manifold over `z_s`.
    pub fn psi(&self, t0: f64, z_s: &Vector) -> Result<Vector> {
        if self.n_u == 0 {
            return Ok(Vector::zeros(0));
        }
        if self.flat {
            let lim = self.opts.radius / 3.0;
            if z_s.norm() > lim {
                return Err(Error::OutOfBall {
                    norm: z_s.norm(),
                    radius: lim,
                });
            }
            self.check_time(t0)?;
            return Ok(Vector::zeros(self.n_u));
        }
        Ok(self.picard(t0, z_s)?.psi(self.n_u))
    }

    fn split(&self, z: &Vector) -> (Vector, Vector) {
        (z.rows(0, self.n_u).into_owned(), z.rows(self.n_u, z.len() - self.n_u).into_owned())
    }

    fn join(&self, zu: &Vector, zs: &Vector) -> Vector {
        Vector::from_iterator(zu.len() + zs.len(), zu.iter().chain(zs.iter()).cloned())
    }

    fn check_ball(&self, z: &Vector) -> Result<()> {
        if z.norm() > self.opts.radius {
            return Err(Error::OutOfBall {
                norm: z.norm(),
                radius: self.opts.radius,
            });
        }
        Ok(())
    }

    /// `Φ(z, t) = (z_u − ψ(t, z_s); z_s)` in `z` coordinates.
    pub fn rectify(&self, z: &Vector, t: f64) -> Result<Vector> {
        self.check_ball(z)?;
        let (zu, zs) = self.split(z);
        let psi = self.psi(t, &zs)?;
        Ok(self.join(&(zu - psi), &zs))
    }

    /// `Φ⁻¹(w, t) = (w_u + ψ(t, w_s); w_s)`: the shear inverts in closed
    /// form.
    pub fn rectify_inverse(&self, w: &Vector, t: f64) -> Result<Vector> {
        let (wu, ws) = self.split(w);
        let psi = self.psi(t, &ws)?;
        let z = self.join(&(wu + psi), &ws);
        self.check_ball(&z)?;
        Ok(z)
    }

    /// Distance to the manifold in `z` coordinates.
    pub fn eta_z(&self, z: &Vector, t: f64) -> Result<f64> {
        let w = self.rectify(z, t)?;
        Ok(w.rows(0, self.n_u).norm())
    }

    /// `η(x, t) = d(Φ(T(x, t), t))` for `x` in original coordinates.
    pub fn eta(&self, x: &Vector, t: f64) -> Result<f64> {
        self.eta_z(&self.to_z(x, t)?, t)
    }

    /// The manifold point over `z_s` at time `t`, in original coordinates.
    pub fn manifold_point(&self, t: f64, z_s: &Vector) -> Result<Vector> {
        let psi = self.psi(t, z_s)?;
        self.from_z(&self.join(&psi, z_s), t)
    }

    /// The current frame `U(t)`.
    pub fn frame(&self, t: f64) -> Result<Matrix> {
        Ok(self.frame_at(t)?.u)
    }
}

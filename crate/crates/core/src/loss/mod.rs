//! Objectives with Clarke subgradient selections.
//!
//! Built-ins know exactly where they are nonsmooth, so the selection at a
//! kink is the minimal-norm element of the known subdifferential rather
//! than whatever a numerical probe happens to see.

mod checks;
mod polynomial;
mod relu;

use std::fmt::Debug;
use std::sync::Arc;

pub use checks::{check_coercivity, finite_difference_gradient, CoercivityReport};
pub use polynomial::{Monomial, Polynomial};
pub use relu::ReluRegression;

use crate::{Error, Matrix, Result, Vector};

/// Regularity of a loss, weakest first.
#[derive(Debug, Clone, PartialEq)]
pub enum Smoothness {
    LocallyLipschitz,
    C1,
    C2,
    C3,
    /// Three times continuously differentiable near the given point only.
    C3Near(Vector),
}

impl Smoothness {
    fn rank(&self) -> u8 {
        match self {
            Smoothness::LocallyLipschitz => 0,
            Smoothness::C1 => 1,
            Smoothness::C2 => 2,
            Smoothness::C3Near(_) => 3,
            Smoothness::C3 => 4,
        }
    }

    /// At least continuously differentiable everywhere.
    pub fn is_c1(&self) -> bool {
        matches!(self, Smoothness::C1 | Smoothness::C2 | Smoothness::C3)
    }

    pub fn weakest(a: &Smoothness, b: &Smoothness) -> Smoothness {
        if a.rank() <= b.rank() {
            a.clone()
        } else {
            b.clone()
        }
    }
}

/// An objective `h: R^M → R` with a subgradient selection.
pub trait Loss: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    /// One element of the Clarke subdifferential; the gradient where `h` is
    /// differentiable.
    fn subgradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, _x: &Vector) -> Option<Matrix> {
        None
    }
    fn smoothness(&self) -> Smoothness;
    /// Structural knowledge: `false` exactly at known kinks.
    fn is_smooth_at(&self, _x: &Vector) -> bool {
        true
    }
    /// Exactly quadratic (constant Hessian).
    fn is_quadratic(&self) -> bool {
        false
    }
}

/// Shared handle to a loss.
pub type LossOracle = Arc<dyn Loss>;

/// Hessian if provided, else central differences of the subgradient.
pub fn hessian_or_fd(loss: &dyn Loss, x: &Vector) -> Matrix {
    match loss.hessian(x) {
        Some(h) => h,
        None => {
            let j = crate::linalg::fd_jacobian(|y| loss.subgradient(y), x, 1e-5);
            (&j + j.transpose()) * 0.5
        }
    }
}

/// `h(x) = Σ_n f_n(x_n)` over stacked agent states.
#[derive(Debug, Clone)]
pub struct SumLoss {
    components: Vec<LossOracle>,
    agent_dim: usize,
}

impl SumLoss {
    pub fn new(components: Vec<LossOracle>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Loss("sum needs at least one component".into()))?;
        let d = first.dim();
        for c in &components {
            if c.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: c.dim(),
                });
            }
        }
        Ok(Self {
            components,
            agent_dim: d,
        })
    }

    /// `n` copies of the same component.
    pub fn replicated(component: LossOracle, n: usize) -> Result<Self> {
        Self::new(vec![component; n])
    }

    pub fn agents(&self) -> usize {
        self.components.len()
    }

    pub fn agent_dim(&self) -> usize {
        self.agent_dim
    }

    pub fn components(&self) -> &[LossOracle] {
        &self.components
    }

    fn block<'a>(&self, x: &'a Vector, n: usize) -> Vector {
        x.rows(n * self.agent_dim, self.agent_dim).clone_owned()
    }

    /// `f(y) = Σ_n f_n(y)` evaluated at a single agent-sized point.
    pub fn network_value(&self, y: &Vector) -> f64 {
        self.components.iter().map(|c| c.value(y)).sum()
    }

    /// `∇f(y) = Σ_n ∇f_n(y)`.
    pub fn network_subgradient(&self, y: &Vector) -> Vector {
        let mut g = Vector::zeros(self.agent_dim);
        for c in &self.components {
            g += c.subgradient(y);
        }
        g
    }
}

impl Loss for SumLoss {
    fn dim(&self) -> usize {
        self.agent_dim * self.components.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        (0..self.agents())
            .map(|n| self.components[n].value(&self.block(x, n)))
            .sum()
    }

    fn subgradient(&self, x: &Vector) -> Vector {
        let d = self.agent_dim;
        let mut v = Vector::zeros(self.dim());
        for n in 0..self.agents() {
            let g = self.components[n].subgradient(&self.block(x, n));
            v.rows_mut(n * d, d).copy_from(&g);
        }
        v
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let d = self.agent_dim;
        let mut h = Matrix::zeros(self.dim(), self.dim());
        for n in 0..self.agents() {
            let hn = self.components[n].hessian(&self.block(x, n))?;
            h.view_mut((n * d, n * d), (d, d)).copy_from(&hn);
        }
        Some(h)
    }

    fn smoothness(&self) -> Smoothness {
        self.components
            .iter()
            .map(|c| c.smoothness())
            .reduce(|a, b| Smoothness::weakest(&a, &b))
            .unwrap_or(Smoothness::C3)
    }

    fn is_smooth_at(&self, x: &Vector) -> bool {
        (0..self.agents()).all(|n| self.components[n].is_smooth_at(&self.block(x, n)))
    }

    fn is_quadratic(&self) -> bool {
        self.components.iter().all(|c| c.is_quadratic())
    }
}

/// `base(x) + w Σ|x_i|`.
#[derive(Debug, Clone)]
pub struct L1Regularized {
    base: LossOracle,
    weight: f64,
}

impl L1Regularized {
    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl Loss for L1Regularized {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.base.value(x) + self.weight * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Away from kinks this is `∇base + w·sign(x)`. At `x_i = 0` the
    /// subdifferential in that coordinate is `b_i + w[−1, 1]`; its
    /// minimal-norm element is the soft threshold of `b_i`.
    fn subgradient(&self, x: &Vector) -> Vector {
        let b = self.base.subgradient(x);
        let w = self.weight;
        Vector::from_iterator(
            x.len(),
            x.iter().zip(b.iter()).map(|(&xi, &bi)| {
                if xi > 0.0 {
                    bi + w
                } else if xi < 0.0 {
                    bi - w
                } else {
                    bi.signum() * (bi.abs() - w).max(0.0)
                }
            }),
        )
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        if self.is_smooth_at(x) {
            self.base.hessian(x)
        } else {
            None
        }
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::LocallyLipschitz
    }

    fn is_smooth_at(&self, x: &Vector) -> bool {
        x.iter().all(|&v| v != 0.0) && self.base.is_smooth_at(x)
    }
}

/// User-supplied value and subgradient.
pub struct FnLoss<V, G>
where
    V: Fn(&Vector) -> f64 + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    dim: usize,
    value: V,
    subgradient: G,
    smoothness: Smoothness,
}

impl<V, G> FnLoss<V, G>
where
    V: Fn(&Vector) -> f64 + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    pub fn new(dim: usize, value: V, subgradient: G, smoothness: Smoothness) -> Self {
        Self {
            dim,
            value,
            subgradient,
            smoothness,
        }
    }
}

impl<V, G> Debug for FnLoss<V, G>
where
    V: Fn(&Vector) -> f64 + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FnLoss(dim={})", self.dim)
    }
}

impl<V, G> Loss for FnLoss<V, G>
where
    V: Fn(&Vector) -> f64 + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }
    fn subgradient(&self, x: &Vector) -> Vector {
        (self.subgradient)(x)
    }
    fn smoothness(&self) -> Smoothness {
        self.smoothness.clone()
    }
}

/// `½ Σ c_i x_i²` with `d_stable` positive and `d_unstable` negative
/// curvatures.
pub fn make_quadratic_saddle(
    d_stable: usize,
    d_unstable: usize,
    curvatures: &[f64],
) -> Result<Polynomial> {
    if curvatures.len() != d_stable + d_unstable {
        return Err(Error::Dimension {
            expected: d_stable + d_unstable,
            got: curvatures.len(),
        });
    }
    if curvatures.iter().any(|&c| c == 0.0 || !c.is_finite()) {
        return Err(Error::Loss("zero curvature makes the saddle degenerate".into()));
    }
    let neg = curvatures.iter().filter(|&&c| c < 0.0).count();
    if neg == 0 {
        return Err(Error::Loss("a saddle needs at least one negative curvature".into()));
    }
    if neg != d_unstable {
        return Err(Error::Loss(format!(
            "{neg} negative curvatures but d_unstable = {d_unstable}"
        )));
    }
    Ok(Polynomial::diagonal_quadratic(curvatures))
}

pub fn make_l1_regularized(base: LossOracle, weight: f64) -> Result<L1Regularized> {
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::Loss(format!("l1 weight must be positive, got {weight}")));
    }
    Ok(L1Regularized { base, weight })
}

pub fn make_relu_regression(
    inputs: Vec<Vector>,
    targets: Vec<f64>,
    widths: Vec<usize>,
) -> Result<ReluRegression> {
    ReluRegression::new(inputs, targets, widths)
}

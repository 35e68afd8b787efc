//! Multivariate polynomials with exact gradients and Hessians. Every smooth
//! desk example (quadratics, saddles with quartic or cubic terms) is one of
//! these.

use super::{Loss, Smoothness};
use crate::{Error, Matrix, Result, Vector};

/// `coef · Π x_i^{powers[i]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval(&self, x: &Vector) -> f64 {
        self.powers
            .iter()
            .zip(x.iter())
            .fold(self.coef, |acc, (&p, &xi)| acc * xi.powi(p as i32))
    }

    /// Partial derivative in coordinate `i`, as a monomial.
    fn diff(&self, i: usize) -> Option<Monomial> {
        let p = self.powers[i];
        if p == 0 {
            return None;
        }
        let mut powers = self.powers.clone();
        powers[i] = p - 1;
        Some(Monomial {
            coef: self.coef * p as f64,
            powers,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.powers.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: t.powers.len(),
                });
            }
            if !t.coef.is_finite() {
                return Err(Error::Loss("non-finite polynomial coefficient".into()));
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    /// Single term helper; `powers` as `(index, power)` pairs.
    pub fn term(dim: usize, coef: f64, powers: &[(usize, u32)]) -> Self {
        let mut p = vec![0; dim];
        for &(i, k) in powers {
            p[i] += k;
        }
        Self {
            dim,
            terms: vec![Monomial { coef, powers: p }],
        }
    }

    /// `½ Σ c_i x_i²`.
    pub fn diagonal_quadratic(curv: &[f64]) -> Self {
        let dim = curv.len();
        let mut out = Self::zero(dim);
        for (i, &c) in curv.iter().enumerate() {
            out = out + Self::term(dim, 0.5 * c, &[(i, 2)]);
        }
        out
    }

    /// `½ xᵀHx + bᵀx + c` for symmetric `H`.
    pub fn quadratic(h: &Matrix, b: &Vector, c: f64) -> Self {
        let dim = b.len();
        let mut out = Self::term(dim, c, &[]);
        for i in 0..dim {
            out = out + Self::term(dim, 0.5 * h[(i, i)], &[(i, 2)]);
            for j in i + 1..dim {
                let hij = 0.5 * (h[(i, j)] + h[(j, i)]);
                out = out + Self::term(dim, hij, &[(i, 1), (j, 1)]);
            }
            out = out + Self::term(dim, b[i], &[(i, 1)]);
        }
        out.prune()
    }

    /// `½‖x − a‖²`.
    pub fn shifted_square(a: &Vector) -> Self {
        let d = a.len();
        Self::quadratic(&Matrix::identity(d, d), &(-a), 0.5 * a.norm_squared())
    }

    /// `‖x‖⁴`.
    pub fn norm_fourth(dim: usize) -> Self {
        let mut out = Self::zero(dim);
        for i in 0..dim {
            out = out + Self::term(dim, 1.0, &[(i, 4)]);
            for j in i + 1..dim {
                out = out + Self::term(dim, 2.0, &[(i, 2), (j, 2)]);
            }
        }
        out
    }

    /// `½(x₁² − x₂²) + ¼x₂⁴`: saddle at 0, minima at `(0, ±1)`.
    pub fn quartic_saddle() -> Self {
        Self::diagonal_quadratic(&[1.0, -1.0]) + Self::term(2, 0.25, &[(1, 4)])
    }

    /// `½(x₁² − x₂²) + c(x₂³ + x₁²x₂)`.
    ///
    /// The `x₁²x₂` coupling bends the stable manifold; with `x₂³` alone the
    /// line `x₂ = 0` would stay invariant and the manifold would be flat.
    /// To leading order the stable manifold is `x₂ = (c/3) x₁²`.
    pub fn cubic_saddle(c: f64) -> Self {
        Self::diagonal_quadratic(&[1.0, -1.0])
            + Self::term(2, c, &[(1, 3)])
            + Self::term(2, c, &[(0, 2), (1, 1)])
    }

    /// Multiply every coefficient by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.coef *= s;
        }
        self
    }

    /// Embed into `dim` coordinates, mapping coordinate `i` to `map[i]`.
    pub fn embed(&self, dim: usize, map: &[usize]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut p = vec![0; dim];
                for (i, &k) in t.powers.iter().enumerate() {
                    p[map[i]] += k;
                }
                Monomial {
                    coef: t.coef,
                    powers: p,
                }
            })
            .collect();
        Self { dim, terms }.prune()
    }

    /// Merge like terms and drop zeros.
    fn prune(mut self) -> Self {
        let mut merged: Vec<Monomial> = Vec::new();
        for t in self.terms.drain(..) {
            if let Some(m) = merged.iter_mut().find(|m| m.powers == t.powers) {
                m.coef += t.coef;
            } else {
                merged.push(t);
            }
        }
        merged.retain(|m| m.coef != 0.0);
        self.terms = merged;
        self
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }
}

impl std::ops::Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Polynomial) -> Polynomial {
        assert_eq!(self.dim, rhs.dim, "polynomial dimension mismatch");
        self.terms.extend(rhs.terms);
        self.prune()
    }
}

impl Loss for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    fn subgradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim);
        for t in &self.terms {
            for i in 0..self.dim {
                if let Some(dt) = t.diff(i) {
                    g[i] += dt.eval(x);
                }
            }
        }
        g
    }

    fn hessian(&self, x: &Vector) -> Option<Matrix> {
        let mut h = Matrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            for i in 0..self.dim {
                let Some(di) = t.diff(i) else { continue };
                for j in i..self.dim {
                    if let Some(dij) = di.diff(j) {
                        let v = dij.eval(x);
                        h[(i, j)] += v;
                        if i != j {
                            h[(j, i)] += v;
                        }
                    }
                }
            }
        }
        Some(h)
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C3
    }

    fn is_quadratic(&self) -> bool {
        self.max_degree() <= 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::finite_difference_gradient;

    #[test]
    fn quadratic_form_matches_matrix() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = Vector::from_vec(vec![1.0, -1.0]);
        let p = Polynomial::quadratic(&h, &b, 0.5);
        let x = Vector::from_vec(vec![0.3, -0.7]);
        let want = 0.5 * x.dot(&(&h * &x)) + b.dot(&x) + 0.5;
        assert!((p.value(&x) - want).abs() < 1e-14);
        assert!((p.subgradient(&x) - (&h * &x + &b)).amax() < 1e-14);
        assert_eq!(p.hessian(&x).unwrap(), h);
        assert!(p.is_quadratic());
    }

    #[test]
    fn norm_fourth_and_gradients() {
        let p = Polynomial::norm_fourth(3);
        let x = Vector::from_vec(vec![0.5, -1.0, 2.0]);
        assert!((p.value(&x) - x.norm_squared().powi(2)).abs() < 1e-12);
        let g = p.subgradient(&x);
        assert!((g - &x * (4.0 * x.norm_squared())).amax() < 1e-12);
    }

    #[test]
    fn cubic_saddle_derivatives() {
        let p = Polynomial::cubic_saddle(0.1);
        let x = Vector::from_vec(vec![0.3, -0.2]);
        let fd = finite_difference_gradient(&p, &x, 1e-5);
        assert!((fd - p.subgradient(&x)).amax() < 1e-9);
        assert!(!p.is_quadratic());
        let h = p.hessian(&x).unwrap();
        // ∂²/∂x₁∂x₂ of 0.1 x₁² x₂ is 0.2 x₁.
        assert!((h[(0, 1)] - 0.06).abs() < 1e-14);
    }

    #[test]
    fn embed_moves_coordinates() {
        let p = Polynomial::term(1, 2.0, &[(0, 2)]).embed(3, &[2]);
        let x = Vector::from_vec(vec![5.0, 5.0, 3.0]);
        assert_eq!(p.value(&x), 18.0);
    }
}

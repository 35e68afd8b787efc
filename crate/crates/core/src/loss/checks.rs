//! Sampled assumption checkers and a finite-difference oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Loss;
use crate::Vector;

/// Central differences, one coordinate at a time.
pub fn finite_difference_gradient(loss: &dyn Loss, x: &Vector, step: f64) -> Vector {
    let mut g = Vector::zeros(x.len());
    let mut y = x.clone();
    for i in 0..x.len() {
        y[i] = x[i] + step;
        let fp = loss.value(&y);
        y[i] = x[i] - step;
        let fm = loss.value(&y);
        y[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    /// Smallest observed `⟨x, v⟩ / (‖x‖‖v‖)`.
    pub c1_hat: f64,
    /// Largest observed `‖v‖ / ‖x‖`.
    pub c2_hat: f64,
    pub pass: bool,
}

/// Sample points with `‖x‖ ∈ [R, 10R]` and record the worst alignment of
/// the subgradient with `x` and the largest growth ratio. A vanishing
/// subgradient counts as cosine 0.
pub fn check_coercivity(loss: &dyn Loss, radius: f64, samples: usize, seed: u64) -> CoercivityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = loss.dim();
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    for _ in 0..samples {
        let dir = loop {
            let d = Vector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            if d.norm() > 1e-12 {
                break d.normalize();
            }
        };
        let r = radius * rng.gen_range(1.0..=10.0);
        let x = dir * r;
        let v = loss.subgradient(&x);
        let vn = v.norm();
        let cos = if vn > 0.0 { x.dot(&v) / (r * vn) } else { 0.0 };
        c1 = c1.min(cos);
        c2 = c2.max(vn / r);
    }
    CoercivityReport {
        c1_hat: c1,
        c2_hat: c2,
        pass: c1 > 0.0 && c2.is_finite(),
    }
}

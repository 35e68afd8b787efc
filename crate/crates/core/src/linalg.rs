//! Small dense linear-algebra helpers shared by the other modules.

use crate::{Matrix, Vector};

/// Relative tolerance below which an eigenvalue counts as zero.
pub const ZERO_EIG_REL_TOL: f64 = 1e-9;

/// Symmetric eigendecomposition with eigenvalues ascending and each
/// eigenvector signed so its largest-magnitude entry is positive.
///
/// Returns `(values, vectors)` where column `i` of `vectors` pairs with
/// `values[i]`.
pub fn sym_eigen(a: &Matrix) -> (Vector, Matrix) {
    let n = a.nrows();
    // nalgebra's symmetric_eigen returns wrong eigenvectors for some
    // block-structured inputs, so the decomposition is done by faer
    let sym = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let eig = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let (s, u) = (eig.S(), eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let mut values = Vector::zeros(n);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = s[src];
        let mut col = Vector::from_fn(n, |i, _| u[(i, src)]);
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Flip `v` so that its largest-magnitude entry is positive. Ties go to the
/// lowest index.
pub fn fix_sign(v: &mut Vector) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Number of eigenvalues treated as zero under the relative tolerance.
pub fn count_zero(values: &Vector) -> usize {
    let scale = values.amax();
    if scale == 0.0 {
        return values.len();
    }
    values
        .iter()
        .filter(|l| l.abs() < ZERO_EIG_REL_TOL * scale)
        .count()
}

/// Smallest singular value.
pub fn min_singular_value(a: &Matrix) -> f64 {
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F>(f: F, x: &Vector, h: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let f0 = f(x);
    let mut jac = Matrix::zeros(f0.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// Residual `‖(A − λI)x‖` for unit `x`, and the bound `ε√m` on the
/// distance from `λ` to the spectrum of a symmetric `A`.
pub fn approximate_eigenvalue_bound(a: &Matrix, x: &Vector, lambda: f64) -> (f64, f64) {
    let xn = x.normalize();
    let eps = (a * &xn - &xn * lambda).norm();
    (eps, eps * (a.nrows() as f64).sqrt())
}

/// Distance from `lambda` to the spectrum of symmetric `a`.
pub fn spectrum_distance(a: &Matrix, lambda: f64) -> f64 {
    let (vals, _) = sym_eigen(a);
    vals.iter()
        .map(|v| (v - lambda).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Eigenvalues of a general square matrix (real parts of the complex
/// spectrum, sorted descending) via the real Schur form.
pub fn real_parts_of_spectrum(a: &Matrix) -> Vec<f64> {
    let mut re: Vec<f64> = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.re)
        .collect();
    re.sort_by(|x, y| y.total_cmp(x));
    re
}

// Loss oracles: polynomials, an l1 penalty, a ReLU network, and the
// gradient and coercivity checks.

use std::sync::Arc;

use dsgd::loss::{check_coercivity, finite_difference_gradient, make_l1_regularized, make_relu_regression, Loss, Polynomial};
use dsgd::Vector;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let saddle = Polynomial::quartic_saddle();
    let x = Vector::from_vec(vec![0.3, -0.7]);
    let fd = finite_difference_gradient(&saddle, &x, 1e-6);
    println!("quartic saddle at {:?}: value {:.4}, |grad - fd| = {:.1e}", x.as_slice(), saddle.value(&x), (saddle.subgradient(&x) - fd).norm());

    let rep = check_coercivity(&saddle, 10.0, 2000, 1);
    println!("coercive: {} (c1 = {:.3})", rep.pass, rep.c1_hat);
    let pure = Polynomial::diagonal_quadratic(&[1.0, -1.0]);
    println!("pure saddle coercive: {}", check_coercivity(&pure, 10.0, 2000, 1).pass);

    // at the kink the minimum-norm element of the Clarke gradient is returned
    let l1 = make_l1_regularized(Arc::new(Polynomial::shifted_square(&Vector::from_vec(vec![0.1, 2.0]))), 0.5)?;
    println!("l1 subgradient at 0: {:?}", l1.subgradient(&Vector::zeros(2)).as_slice());

    let inputs = vec![Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![0.0, 1.0])];
    let net = make_relu_regression(inputs, vec![1.0, -1.0], vec![2, 3, 1])?;
    let w = Vector::from_fn(net.dim(), |i, _| 0.1 * (i as f64 + 1.0).sin());
    println!("ReLU regression with {} weights, loss {:.4}", net.dim(), net.value(&w));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

// Stable manifold of a penalized cubic saddle: the graph `ψ`, the distance
// `η` and the repulsion sweep.

use std::sync::Arc;

use dsgd::graph::{consensus_penalty, laplacian, Graph};
use dsgd::loss::{LossOracle, Polynomial, SumLoss};
use dsgd::manifold::{repulsion_check, sample_ball, summary_text, ManifoldModel, ManifoldOptions, SaddleContext};
use dsgd::schedule::GammaCurve;
use dsgd::Vector;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let agent: LossOracle = Arc::new(Polynomial::cubic_saddle(0.2));
    let losses = SumLoss::replicated(agent, 2)?;
    let q = consensus_penalty(&laplacian(&Graph::path(2)?), 2)?;
    let ctx = SaddleContext::new(Arc::new(losses), q, GammaCurve::new(1.0, 0.6), Vector::zeros(4))?;
    let model = ManifoldModel::build(
        ctx,
        ManifoldOptions {
            t_max: 20.0,
            ..Default::default()
        },
    )?;
    let t = model.t_start();
    println!("n_u = {}, n_s = {}, model starts at t = {t}", model.n_u(), model.n_s());
    // along the consensus direction the graph is close to 0.047 s²
    let mut probes = Vec::new();
    for s in [0.02, 0.04, 0.08] {
        let mut zs = Vector::zeros(model.n_s());
        zs[0] = s;
        println!("psi({t}, {s:.2} e1) = {:.3e}", model.psi(t, &zs)?[0]);
        probes.push((t, zs));
    }
    let xs = sample_ball(&model, t, 0.05, 20, 3)?;
    let rep = repulsion_check(&model, &xs, &[1e-3, 1e-2], &[t, t + 1.0])?;
    print!("{}", summary_text(&model, &probes, Some(&rep))?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

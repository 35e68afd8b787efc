// Noisy distributed SGD on a path of agents holding different targets.

use std::sync::Arc;

use dsgd::engine::{boundedness_probe, NoiseModel, Problem, RunConfig};
use dsgd::graph::Graph;
use dsgd::loss::{LossOracle, Polynomial, SumLoss};
use dsgd::schedule::Schedule;
use dsgd::Vector;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let targets = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.5]];
    let losses: Vec<LossOracle> = targets
        .iter()
        .map(|a| Arc::new(Polynomial::shifted_square(&Vector::from_column_slice(a))) as LossOracle)
        .collect();
    let problem = Problem::distributed(SumLoss::new(losses)?, Graph::path(3)?)?;

    let mut cfg = RunConfig::new(20_000, Schedule::new(0.5, 1.0, 1.0, 0.6), NoiseModel::gaussian(0.1, 7));
    cfg.agentwise = true;
    let traj = problem.run(&Vector::zeros(problem.dim()), &cfg)?;
    for r in traj.records.iter().step_by(3) {
        println!("k = {:>6}  zeta {:>6.3}  consensus error {:.2e}  grad norm {:.2e}", r.step, r.zeta, r.consensus_error, r.grad_norm);
    }
    let b = boundedness_probe(&traj, 1e3);
    println!("sup |x| = {:.3}, within 1e3: {}", b.sup_norm, b.within_bound);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

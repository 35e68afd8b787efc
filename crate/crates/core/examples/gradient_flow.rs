// The distributed gradient flow next to the discrete iterates it
// approximates.

use std::sync::Arc;

use dsgd::engine::{NoiseModel, Problem, RunConfig};
use dsgd::flow::{discrete_vs_continuous_gap, solution_on_clock};
use dsgd::graph::Graph;
use dsgd::loss::{LossOracle, Polynomial, SumLoss};
use dsgd::schedule::Schedule;
use dsgd::Vector;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let losses: Vec<LossOracle> = vec![Arc::new(Polynomial::quartic_saddle()), Arc::new(Polynomial::quartic_saddle())];
    let problem = Problem::distributed(SumLoss::new(losses)?, Graph::path(2)?)?;
    let x0 = Vector::from_vec(vec![0.5, 0.2, -0.3, 0.1]);
    for a in [0.2, 0.1] {
        let s = Schedule::new(a, 0.8, 1.0, 0.6);
        // run until the clock reaches 2 so both scales cover the same span
        let (mut steps, mut zeta) = (0, s.alpha(1));
        while zeta < 2.0 {
            steps += 1;
            zeta += s.alpha(steps + 1);
        }
        let mut cfg = RunConfig::new(steps, s, NoiseModel::none());
        cfg.store_states = true;
        let traj = problem.run(&x0, &cfg)?;
        let sol = solution_on_clock(&traj, problem.loss().as_ref(), problem.penalty(), &s, 1e-2)?;
        let gap = discrete_vs_continuous_gap(&traj, &sol)?;
        println!("alpha scale {a}: zeta_K = {:.3}, max gap {:.3e}", traj.last().zeta, gap.iter().cloned().fold(0.0, f64::max));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

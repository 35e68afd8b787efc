// Step sizes, penalty weights and the elapsed clock.

use dsgd::schedule::{gamma_condition_check, interpolate_gamma, ElapsedClock, Schedule};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let s = Schedule::new(1.0, 1.0, 1.0, 0.6);
    let report = s.validate()?;
    println!("beta_k decays like k^-{:.1}", report.tau_beta);
    for k in [1, 10, 100, 1000] {
        println!("k = {k:>4}: alpha {:.2e}  gamma {:.3}  beta {:.3}", s.alpha(k), s.gamma(k), s.beta(k));
    }
    let mut clock = ElapsedClock::new(s);
    for _ in 0..999 {
        clock.advance();
    }
    println!("zeta after {} steps: {:.4}", clock.step(), clock.zeta());

    // exponents outside 1/2 < tau_gamma < tau_alpha <= 1 are refused
    assert!(Schedule::new(1.0, 0.6, 1.0, 0.7).validate().is_err());

    let g = interpolate_gamma(&s);
    let c = gamma_condition_check(&g, 1.0, 1.0, 20.0)?;
    println!("gamma condition: peak {:.3}, terminal {:.3}, decreasing tail {}", c.peak, c.terminal, c.decreasing_tail);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

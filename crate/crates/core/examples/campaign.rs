// A seeded campaign from a TOML config, written to disk and re-checked by
// the report.

use dsgd::experiments::{render_report, report_dir, run_campaign, ExperimentConfig};

const CONFIG: &str = r#"
kind = "saddle-avoidance"
seeds = [3, 1, 2]
steps = 5000

[problem]
loss = "quartic-saddle"
agents = 2

[schedule]
alpha_scale = 1.0
tau_alpha = 1.0
gamma_scale = 0.5
tau_gamma = 0.6

[noise]
kind = "gaussian"
sigma = 0.1

[init]
point = [0.5, 0.0]
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    println!("config hash {}", cfg.hash());
    let result = run_campaign(&cfg)?;
    print!("{}", result.records_text());

    let dir = std::env::temp_dir().join(format!("dsgd-example-{}", std::process::id()));
    result.write(&dir, &cfg.canonical())?;
    print!("{}", render_report(&report_dir(&dir)?));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

//! Batch experiments: TOML configs, seeded campaigns, result records and
//! the report that re-checks them.

mod campaigns;
mod config;
pub mod drift;
mod problem;
mod record;
mod report;
pub mod verify;

pub use campaigns::{aggregates, per_seed, prepare, run_campaign, worker_count, WORKERS_ENV};
pub use config::{
    DriftSpec, ExperimentConfig, ExperimentKind, GraphKind, InitSpec, LossKey, ManifoldSpec, NoiseKey, NoiseSpec,
    ProblemSpec, SeedSpec, Tolerances,
};
pub use problem::{build_problem, initial_state, noise_model, saddle_context, BuiltProblem, Critical, CriticalKind};
pub use record::{parse_summary, quantile, CampaignResult, SeedRecord, Value, CONFIG_FILE, RECORDS_FILE, SUMMARY_FILE, VERSION};
pub use report::{render as render_report, report_dir, ReportEntry};

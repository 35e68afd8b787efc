//! `report <dir>`: re-read result directories, recompute aggregates from the
//! per-seed records and compare them with the stored summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::campaigns::aggregates;
use super::config::{ExperimentConfig, ExperimentKind};
use super::record::{parse_summary, CampaignResult, CONFIG_FILE, RECORDS_FILE, SUMMARY_FILE};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub dir: PathBuf,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seeds: usize,
    pub aggregates: Vec<(String, f64)>,
    /// Aggregate names whose stored value differs from the recomputation.
    pub mismatches: Vec<String>,
}

fn result_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if dir.join(RECORDS_FILE).is_file() {
        out.push(dir.to_path_buf());
    }
    let mut subs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join(RECORDS_FILE).is_file())
        .collect();
    subs.sort();
    out.extend(subs);
    Ok(out)
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

/// Every result directory under `dir` (itself and its children). Fails if
/// they carry more than one config hash.
pub fn report_dir(dir: &Path) -> Result<Vec<ReportEntry>> {
    let dirs = result_dirs(dir)?;
    if dirs.is_empty() {
        return Err(Error::Config(format!("no {RECORDS_FILE} under {}", dir.display())));
    }
    let mut loaded = Vec::with_capacity(dirs.len());
    for d in dirs {
        let r = CampaignResult::from_records_text(&std::fs::read_to_string(d.join(RECORDS_FILE))?)?;
        loaded.push((d, r));
    }
    let mut hashes: Vec<&str> = loaded.iter().map(|(_, r)| r.config_hash.as_str()).collect();
    hashes.sort_unstable();
    hashes.dedup();
    if hashes.len() > 1 {
        return Err(Error::MixedHashes(hashes.join(", ")));
    }
    let mut out = Vec::with_capacity(loaded.len());
    for (d, mut r) in loaded {
        let cfg = ExperimentConfig::load(&d.join(CONFIG_FILE))?;
        if cfg.hash() != r.config_hash {
            return Err(Error::MixedHashes(format!(
                "{} records carry {} but its config hashes to {}",
                d.display(),
                r.config_hash,
                cfg.hash()
            )));
        }
        r.aggregates = aggregates(&cfg, &r)?;
        let stored = std::fs::read_to_string(d.join(SUMMARY_FILE))
            .map(|t| parse_summary(&t))
            .unwrap_or_default();
        let mismatches = r
            .aggregates
            .iter()
            .filter(|(k, v)| {
                stored
                    .get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .map_or(true, |s| !same(s, *v))
            })
            .map(|(k, _)| k.clone())
            .collect();
        out.push(ReportEntry {
            dir: d,
            kind: r.kind,
            config_hash: r.config_hash.clone(),
            seeds: r.records.len(),
            aggregates: r.aggregates,
            mismatches,
        });
    }
    Ok(out)
}

/// Human-readable rendering of [`report_dir`].
pub fn render(entries: &[ReportEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        writeln!(s, "== {} ({}, hash {}, {} seeds)", e.dir.display(), e.kind.as_str(), e.config_hash, e.seeds).unwrap();
        for (k, v) in &e.aggregates {
            writeln!(s, "  {k:<32} {v:.6e}").unwrap();
        }
        if e.mismatches.is_empty() {
            writeln!(s, "  summary matches the records").unwrap();
        } else {
            writeln!(s, "  summary DISAGREES on: {}", e.mismatches.join(", ")).unwrap();
        }
    }
    s
}

//! Per-seed records, their aggregates, and the on-disk formats described in
//! `docs/formats.md`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentKind;
use crate::{Error, Result};

pub const RECORDS_FILE: &str = "records.tsv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONFIG_FILE: &str = "config.toml";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exact text for a float: integers plainly, everything else in `e`
/// notation. Both forms parse back to the same bits.
fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Value {
    pub fn num(&self) -> f64 {
        match self {
            Self::Num(x) => *x,
            Self::Int(i) => *i as f64,
            Self::Text(_) => f64::NAN,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Self::Text(s) => s,
            _ => "",
        }
    }

    fn render(&self) -> String {
        match self {
            Self::Num(x) => format!("{x:e}"),
            Self::Int(i) => i.to_string(),
            Self::Text(s) => s.clone(),
        }
    }

    fn parse(s: &str) -> Self {
        if let Ok(i) = s.parse::<i64>() {
            Self::Int(i)
        } else if let Ok(x) = s.parse::<f64>() {
            Self::Num(x)
        } else {
            Self::Text(s.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRecord {
    pub seed: u64,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub version: String,
    pub columns: Vec<String>,
    /// Sorted by seed.
    pub records: Vec<SeedRecord>,
    pub aggregates: Vec<(String, f64)>,
}

impl CampaignResult {
    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.records.iter().map(|r| &r.values[i]).collect())
    }

    pub fn nums(&self, name: &str) -> Vec<f64> {
        self.column(name).map(|c| c.iter().map(|v| v.num()).collect()).unwrap_or_default()
    }

    pub fn aggregate(&self, name: &str) -> Option<f64> {
        self.aggregates.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn records_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# dsgd records").unwrap();
        writeln!(s, "# kind = {}", self.kind.as_str()).unwrap();
        writeln!(s, "# config_hash = {}", self.config_hash).unwrap();
        writeln!(s, "# version = {}", self.version).unwrap();
        writeln!(s, "seed\t{}", self.columns.join("\t")).unwrap();
        for r in &self.records {
            let vals: Vec<String> = r.values.iter().map(|v| v.render()).collect();
            writeln!(s, "{}\t{}", r.seed, vals.join("\t")).unwrap();
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# dsgd summary").unwrap();
        writeln!(s, "kind = {}", self.kind.as_str()).unwrap();
        writeln!(s, "config_hash = {}", self.config_hash).unwrap();
        writeln!(s, "version = {}", self.version).unwrap();
        writeln!(s, "seeds = {}", self.records.len()).unwrap();
        for (k, v) in &self.aggregates {
            writeln!(s, "{k} = {}", fmt_num(*v)).unwrap();
        }
        s
    }

    /// Parse a records file. Aggregates are left empty.
    pub fn from_records_text(text: &str) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut columns: Option<Vec<String>> = None;
        let mut records = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match &columns {
                None => {
                    if fields.first() != Some(&"seed") {
                        return Err(Error::Parse("records header must start with `seed`".into()));
                    }
                    columns = Some(fields[1..].iter().map(|s| s.to_string()).collect());
                }
                Some(cols) => {
                    if fields.len() != cols.len() + 1 {
                        return Err(Error::Parse(format!("record has {} fields, expected {}", fields.len(), cols.len() + 1)));
                    }
                    let seed = fields[0]
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad seed `{}`", fields[0])))?;
                    records.push(SeedRecord {
                        seed,
                        values: fields[1..].iter().map(|f| Value::parse(f)).collect(),
                    });
                }
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Parse(format!("records file lacks `# {k} = …`")))
        };
        Ok(Self {
            kind: ExperimentKind::parse(&get("kind")?)?,
            config_hash: get("config_hash")?,
            version: get("version")?,
            columns: columns.ok_or_else(|| Error::Parse("records file has no column header".into()))?,
            records,
            aggregates: Vec::new(),
        })
    }

    /// Write `records.tsv`, `summary.txt` and the canonical config.
    pub fn write(&self, dir: &Path, canonical_config: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(RECORDS_FILE), self.records_text())?;
        std::fs::write(dir.join(SUMMARY_FILE), self.summary_text())?;
        std::fs::write(dir.join(CONFIG_FILE), canonical_config)?;
        Ok(())
    }
}

/// `key = value` pairs of a summary file.
pub fn parse_summary(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Empirical `q`-quantile by linear interpolation of the sorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().cloned().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

//! Checkpoint records and their text form.
//!
//! One line per checkpoint, tab separated:
//! `step  zeta  consensus_error  grad_norm  state_norm  [x_1 … x_M]`.
//! Lines starting with `#` are comments; the first comment names the kind
//! (`discrete` or `continuous`).

use std::fmt::Write as _;

use crate::{Error, Result, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub step: u64,
    pub zeta: f64,
    pub consensus_error: f64,
    pub grad_norm: f64,
    pub state_norm: f64,
    pub state: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<Record>,
    /// Largest `‖x(k)‖` over every step, not just checkpoints.
    pub sup_norm: f64,
    /// `ξ̄(k+1)` for each step `k`, when requested.
    pub noise_means: Vec<Vector>,
}

impl Trajectory {
    pub fn new(first: Record) -> Self {
        Self {
            sup_norm: first.state_norm,
            records: vec![first],
            noise_means: Vec::new(),
        }
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("trajectory is never empty")
    }

    pub fn to_text(&self, kind: &str) -> String {
        records_to_text(&self.records, kind)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let records = records_from_text(text)?;
        if records.is_empty() {
            return Err(Error::Parse("trajectory without records".into()));
        }
        let sup = records.iter().map(|r| r.state_norm).fold(0.0, f64::max);
        Ok(Self {
            records,
            sup_norm: sup,
            noise_means: Vec::new(),
        })
    }
}

pub(crate) fn records_to_text(records: &[Record], kind: &str) -> String {
    let mut s = format!("# {kind}\n# step\tzeta\tconsensus_error\tgrad_norm\tstate_norm\tstate...\n");
    for r in records {
        let _ = write!(
            s,
            "{}\t{:e}\t{:e}\t{:e}\t{:e}",
            r.step, r.zeta, r.consensus_error, r.grad_norm, r.state_norm
        );
        if let Some(x) = &r.state {
            for v in x.iter() {
                let _ = write!(s, "\t{v:e}");
            }
        }
        s.push('\n');
    }
    s
}

pub(crate) fn records_from_text(text: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 5 {
            return Err(Error::Parse(format!("line {}: expected at least 5 fields", i + 1)));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
        };
        let step = f[0]
            .parse::<u64>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        let state = if f.len() > 5 {
            let vals = f[5..].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            Some(Vector::from_vec(vals))
        } else {
            None
        };
        out.push(Record {
            step,
            zeta: num(f[1])?,
            consensus_error: num(f[2])?,
            grad_norm: num(f[3])?,
            state_norm: num(f[4])?,
            state,
        });
    }
    Ok(out)
}

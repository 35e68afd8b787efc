//! Plain-text summary of a built model for the experiment records.

use std::fmt::Write;

use super::checks::RepulsionReport;
use super::model::ManifoldModel;
use crate::{Result, Vector};

/// `key = value` lines, one block per section, `#` comments.
pub fn summary_text(model: &ManifoldModel, psi_samples: &[(f64, Vector)], repulsion: Option<&RepulsionReport>) -> Result<String> {
    let mut s = String::new();
    let (horizon, tail) = model.picard_span();
    writeln!(s, "# manifold summary").unwrap();
    writeln!(s, "dim = {}", model.context().dim()).unwrap();
    writeln!(s, "n_u = {}", model.n_u()).unwrap();
    writeln!(s, "t_start = {}", model.t_start()).unwrap();
    writeln!(s, "t_max = {}", model.t_max()).unwrap();
    writeln!(s, "picard_step = {}", model.step()).unwrap();
    writeln!(s, "horizon = {horizon:.6}").unwrap();
    writeln!(s, "tail_window = {tail:.6}").unwrap();
    writeln!(s, "sigma_hat = {:e}", model.sigma_hat()).unwrap();
    writeln!(s, "stable_floor = {:e}", model.stable_floor()).unwrap();
    writeln!(s, "frame_ambiguities = {}", model.splits().ambiguities.len()).unwrap();
    writeln!(s, "\n# eigenvalue tracks: t, lambda...").unwrap();
    let splits = &model.splits().splits;
    let stride = (splits.len() / 20).max(1);
    for sp in splits.iter().step_by(stride) {
        let vals: Vec<String> = sp.lambda.iter().map(|l| format!("{l:e}")).collect();
        writeln!(s, "track {} {}", sp.t, vals.join(" ")).unwrap();
    }
    writeln!(s, "\n# psi samples: t0, |z_s|, |psi|, picard residual").unwrap();
    for (t0, zs) in psi_samples {
        let sol = model.picard(*t0, zs)?;
        writeln!(
            s,
            "psi {} {:e} {:e} {:e}",
            t0,
            zs.norm(),
            sol.psi(model.n_u()).norm(),
            sol.residual
        )
        .unwrap();
    }
    if let Some(r) = repulsion {
        writeln!(s, "\n# repulsion").unwrap();
        writeln!(s, "c2_hat = {:e}", r.c2_hat).unwrap();
        writeln!(s, "c3_hat = {:e}", r.c3_hat).unwrap();
        writeln!(s, "samples = {}", r.samples.len()).unwrap();
        writeln!(s, "violations = {}", r.violations.len()).unwrap();
    }
    Ok(s)
}

//! Stable-manifold machinery around a saddle of `h|_C`: the perturbed
//! saddle path, the tracked spectral split of the linearization, the
//! Picard solution of the manifold integral equation, the rectifier `Φ`
//! and the distance `η`.

mod autonomous;
mod checks;
mod context;
mod model;
mod picard;
mod report;
mod spectral;

pub use autonomous::{compare_with_model, AutonomousManifold, ComparisonRow};
pub use checks::{
    decay_envelope, dt_phi_decay_probe, dx_phi_at_origin, off_constraint_slopes, psi_second_differences,
    rectified_field_spectrum, repulsion_check, restricted_limit, sample_ball, spectral_limits, tangency_slope,
    DecayEnvelope, FieldSpectrum, FieldSpectrumReport, RepulsionReport, RepulsionSample, SpectralLimitRow,
};
pub use context::{solve_perturbed_saddle, PerturbedSaddlePath, SaddleContext, PATH_TOL};
pub use model::{ManifoldModel, ManifoldOptions};
pub use picard::{
    frame_nodes, integral_operator, nonlinearity, picard_fixed_point, picard_iterate, FrameNode, PicardOptions,
    PicardSolution, RateGrid,
};
pub use report::summary_text;
pub use spectral::{
    evolution_operator, fit_decay, linearize, linearize_at_gamma, track, Block, DecayFit, SpectralSplit, SplitGrid,
    AMBIGUITY_MARGIN, DECAY_MARGIN, PARTITION_TOL,
};

#[cfg(test)]
mod tests;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid penalty matrix: {0}")]
    Penalty(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("invalid loss: {0}")]
    Loss(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("diverged at step {step}: state norm {norm:e}")]
    Diverged { step: u64, norm: f64 },
    #[error("ode diverged at t = {time}")]
    OdeDiverged { time: f64 },
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("clock mismatch: {0}")]
    ClockMismatch(String),
    #[error("saddle context: {0}")]
    Saddle(String),
    #[error("newton failed to converge at gamma = {gamma}")]
    Newton { gamma: f64 },
    #[error("cannot partition spectrum at t = {t}: eigenvalue {lambda:e} too close to zero")]
    Partition { t: f64, lambda: f64 },
    #[error("evolution operator orientation: {0}")]
    Orientation(String),
    #[error("picard iteration did not contract (radius too large): {0}")]
    NonContraction(String),
    #[error("horizon too short: dropped tail estimate {0:e}")]
    HorizonTooShort(f64),
    #[error("outside validity ball: |z| = {norm} > {radius}")]
    OutOfBall { norm: f64, radius: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("result directories mix config hashes: {0}")]
    MixedHashes(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

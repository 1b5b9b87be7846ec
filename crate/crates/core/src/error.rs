use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient runs: {n} observations, the second-order model needs at least 6")]
    InsufficientRuns { n: usize },

    #[error("design matrix is rank deficient (estimated condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("quadratic part is singular (|det B| = {det:.3e}); no unique stationary point")]
    SingularB { det: f64 },

    #[error("kernel support truncated to width {width:.3e}")]
    DegenerateSupport { width: f64 },

    #[error("truncated kernel moments are near singular (a0*a2 - a1^2 = {det:.3e})")]
    NearSingularMoments { det: f64 },

    #[error("coordinate {coordinate} of the bootstrap cloud has zero spread")]
    ZeroScale { coordinate: usize },

    #[error("plug-in bandwidth selection failed: {0}")]
    PluginFailure(String),

    #[error("(1 - alpha) * b = {mass} is not a positive integer (alpha = {alpha}, b = {b})")]
    NonIntegerMass { alpha: f64, b: usize, mass: f64 },
}

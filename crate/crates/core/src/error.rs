use thiserror::Error;

/// Errors surfaced by estimators, solvers and samplers.
#[derive(Debug, Error)]
pub enum Error {
    /// A kernel specification violates its invariants (bandwidth, order).
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),

    /// Input data cannot support the requested estimate (empty, constant, too short).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Two inputs that must align in length do not.
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A discrete-instrument category is absent from the data.
    #[error("instrument category {0} is empty or missing")]
    MissingCategory(usize),

    /// The operation requires a different instrument type (e.g. binary).
    #[error("unsupported instrument: {0}")]
    UnsupportedInstrument(String),

    /// The pseudo-true linear system is (near-)singular: the instrument
    /// carries no identifying variation.
    #[error("model not identified: {0}")]
    NonIdentified(String),

    /// An iterative procedure produced a non-finite or exploding iterate.
    #[error("divergence at iteration {iteration}: empirical norm {norm:e}")]
    Divergence { iteration: usize, norm: f64 },

    /// A covariate stratum is too small to fit on.
    #[error("stratum x={stratum} has {n} observations, need at least {needed}")]
    InsufficientStratum {
        stratum: u8,
        n: usize,
        needed: usize,
    },

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A numerical routine produced a non-finite value or failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

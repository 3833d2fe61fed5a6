use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    /// Every particle carries zero weight.
    #[error("particle ensemble degenerated at level {level}: {detail}")]
    Degenerate { level: usize, detail: String },

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sampler exhausted after {attempts} attempts: {detail}")]
    SamplerExhausted { attempts: usize, detail: String },

    /// Adaptive splitting made no progress.
    #[error("splitting stagnated after {iterations} iterations at level {level}")]
    Stagnation { iterations: usize, level: f64 },

    #[error("forward simulation never reached detection after {restarts} restarts")]
    DetectionNotReached { restarts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

/// Outcome of a reverse proposal that could not produce a predecessor.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProposalError {
    /// No admissible predecessor exists; the engine zeroes the particle.
    #[error("no admissible predecessor")]
    EmptySupport,

    /// Any other failure aborts the run.
    #[error(transparent)]
    Fatal(#[from] Error),
}

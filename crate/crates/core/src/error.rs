use thiserror::Error;

/// Errors raised across the modeling pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("invalid microstate space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("support violation: reference has zero probability at microstate {index} where the other distribution is positive")]
    SupportViolation { index: usize },

    #[error("invalid coefficient matrix: {0}")]
    InvalidCoefficients(String),

    #[error("inconsistent constraint system: row {row} reduces to 0 = {moment}")]
    InconsistentSystem { row: usize, moment: f64 },

    #[error("rank deficiency: expected kernel dimension {expected}, found {found}")]
    RankDeficient { expected: usize, found: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("infeasible moments: constraint {constraint} cannot be met by a strictly positive distribution (residual {residual:e})")]
    InfeasibleMoments { constraint: usize, residual: f64 },

    #[error("zero marginal: constraint {constraint} has model mass 0 but target {target}")]
    ZeroMarginal { constraint: usize, target: f64 },

    #[error("rejection sampling exhausted after {attempts} draws outside the simplex")]
    RejectionExhausted { attempts: usize },

    #[error("architectures are not nested")]
    NotNested,

    #[error("no candidate model could be scored")]
    NoSolvableCandidate,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid hypergraph: {0}")]
    InvalidHypergraph(String),
}

pub type Result<T> = core::result::Result<T, Error>;

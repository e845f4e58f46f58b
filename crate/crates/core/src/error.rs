//! Error type shared by all solver modules.

use thiserror::Error;

/// Typed failures of assembly, linear algebra and the nonlinear pipelines.
///
/// Solver drivers are expected to propagate these unchanged so a CLI (or a
/// test harness) can report the failing stage mechanically.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// A field was used with an operator or domain it does not belong to.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A dense factorization failed (matrix not positive definite / singular).
    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),

    #[error(
        "eigen iteration did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    EigenDidNotConverge { iterations: usize, residual: f64 },

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NewtonDidNotConverge { iterations: usize, residual: f64 },

    /// Backtracking could not reduce the residual and the iterate is not
    /// within the accepted stall region.
    #[error("line search stalled (residual {residual:.3e}, scale {scale:.3e})")]
    LineSearchStalled { residual: f64, scale: f64 },

    /// An ε-continuation failed to become Cauchy before exhausting its
    /// schedule, or a monotone iteration ran out of its iteration budget.
    #[error("continuation stalled: {0}")]
    ContinuationStalled(String),

    #[error("no admissible subsolution scale found after {0} halvings")]
    SubsolutionSearchFailed(usize),

    #[error("no admissible supersolution scale found after {0} doublings")]
    SupersolutionSearchFailed(usize),

    /// A nodewise ordering (monotonicity or sandwich bound) was violated.
    #[error("ordering violated: {0}")]
    OrderingViolated(String),

    /// Mountain-pass / ball-minimizer geometry checks failed.
    #[error("geometry violated: {0}")]
    GeometryViolated(String),

    /// The two solution branches ceased to be distinct.
    #[error("branch collapse: {0}")]
    BranchCollapse(String),

    /// An iterate dropped below the positivity barrier.
    #[error("barrier violated: {0}")]
    BarrierViolated(String),

    #[error("problem size {n} exceeds the dense-algebra guard {guard}")]
    SizeGuardExceeded { n: usize, guard: usize },

    /// A quantity that must be strictly positive at interior nodes is not.
    #[error("positivity lost (minimum interior value {0:.3e})")]
    NonpositiveSolution(f64),
}

pub type Result<T> = std::result::Result<T, SolverError>;

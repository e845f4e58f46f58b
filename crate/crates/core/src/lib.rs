//! Finite-difference solver suite for mixed local/nonlocal elliptic equations
//! with singular nonlinearities on bounded 1D/2D domains.
//!
//! The operator is the sum of the classical Laplacian and an (unnormalized)
//! fractional Laplacian of order `s ∈ (0,1)`, discretized on uniform tensor
//! grids with the exterior-zero (nonlocal Dirichlet) convention: grid
//! functions are extended by zero on the whole complement of the domain.
//!
//! Two solver pipelines are provided on top of the shared operator and
//! eigenvalue machinery:
//!
//! * [`singular`] — a purely singular right-hand side `λ h(u) u^{-γ}`,
//!   solved by ε-regularized continuation plus a sub/supersolution sandwich
//!   with a shifted monotone iteration.
//! * [`multiplicity`] — a singular-plus-power right-hand side
//!   `λ u^{-γ} + u^q`, for which a ball minimizer and a mountain-pass
//!   critical point are computed for each ε and continued to the singular
//!   limit, certifying two distinct solutions.
//!
//! [`diagnostics`] holds the independent oracles (weak residuals against
//! smooth bump test fields, dense eigensolves, refinement studies) used to
//! validate everything above.

// validation guards are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which `x <= 0.0` would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod domain;
pub mod eigen;
pub mod error;
pub mod exec;
pub mod multiplicity;
pub mod operator;
pub mod problem;
pub mod quadrature;
pub mod singular;

pub use diagnostics::{
    bump_fields, dense_eigen_oracle, embedding_constants, noise_fields, refinement_study,
    weak_residual, ResidualReport,
};
pub use domain::{Domain, Field, Norms};
pub use eigen::{local_eigenvalue_closed_form, principal_eigenpair, EigenPair};
pub use error::{Result, SolverError};
pub use exec::Parallelism;
pub use multiplicity::{
    ball_minimizer, calibrate_geometry, energy, gradient, mountain_pass, solve_g2, BallOutcome,
    EpsTraceRow, MountainPassParams, PassOutcome, TwoSolutions,
};
pub use operator::MixedOperator;
pub use problem::{EpsSchedule, HFunction, Nonlinearity, ProblemSpec};
pub use singular::{
    find_a_lambda, find_b_lambda, solve_g1, solve_pure_singular, solve_regularized,
    ContinuationStep, NewtonOutcome, PureSingularSolution, SandwichCertificate,
};

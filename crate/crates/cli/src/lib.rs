//! Command-line front end for the mixed local/nonlocal solver suite:
//! configuration resolution, the solver pipelines, and deterministic
//! report serialization.

// validation guards are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which `x <= 0.0` would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipelines;
pub mod report;

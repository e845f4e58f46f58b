//! Principal eigenpair of the mixed operator by inverse power iteration.
//!
//! The generalized problem is `A e = λ M e` with `A = a_loc + a_frac` and the
//! lumped mass `M = ∏h·I`. A single Cholesky factorization of `A` drives the
//! iteration; convergence requires both a stationary Rayleigh quotient and a
//! small algebraic residual. The principal eigenfunction seeds the
//! subsolution of the singular pipeline and the endpoint direction of the
//! mountain pass, so it is normalized in the lumped L² norm and sign-fixed
//! to be nonnegative.

use nalgebra::{Cholesky, DVector};

use crate::domain::{Domain, Field};
use crate::error::{Result, SolverError};
use crate::operator::MixedOperator;

/// Converged principal eigenpair plus a second-eigenvalue estimate used to
/// detect (and warn about) a near-degenerate principal eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Nonnegative eigenfunction, lumped-L²-normalized.
    pub e1: Field,
    /// Algebraic residual `‖A e₁ − λ₁ M e₁‖₂`.
    pub residual: f64,
    pub iterations: usize,
    /// Rayleigh estimate of the second eigenvalue from one deflated inverse
    /// iteration; infinite when the deflated space is numerically empty.
    pub lambda2_estimate: f64,
}

impl EigenPair {
    /// Whether the estimated spectral gap certifies a simple λ₁.
    pub fn gap_ok(&self) -> bool {
        self.lambda2_estimate > self.lambda1 * (1.0 + 1e-6)
    }
}

/// Smallest eigenvalue of the mass-normalized local stiffness in closed
/// form: per axis `(4/h²) sin²(πh/(2L))`, summed over axes.
pub fn local_eigenvalue_closed_form(domain: &Domain) -> f64 {
    domain
        .axes()
        .iter()
        .map(|ax| {
            let h = ax.h();
            let arg = std::f64::consts::PI * h / (2.0 * ax.length());
            (4.0 / (h * h)) * arg.sin().powi(2)
        })
        .sum()
}

/// Inverse power iteration for the principal eigenpair of `op`.
///
/// Converged when successive Rayleigh quotients differ by less than
/// `tol·|λ|` *and* the algebraic residual is below `tol·max(1, ‖A e‖)`.
pub fn principal_eigenpair(op: &MixedOperator, tol: f64, max_iter: usize) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "eigen tolerance must be positive, got {tol}"
        )));
    }
    let n = op.n();
    let meas = op.mass();
    let chol = Cholesky::new(op.system_matrix()).ok_or_else(|| {
        SolverError::LinearSolveFailed("mixed operator is not positive definite".into())
    })?;

    let mut e: DVector<f64> = DVector::from_element(n, 1.0);
    let init_norm = (meas * e.norm_squared()).sqrt();
    e /= init_norm;
    let mut lambda = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut iterations = max_iter;
    let mut converged = false;
    for it in 0..max_iter {
        let z = chol.solve(&(&e * meas));
        e = &z / (meas * z.norm_squared()).sqrt();
        let ae = op.apply_vec(&e, true, true);
        let lam = e.dot(&ae); // meas·eᵀe = 1 after normalization
        residual = (&ae - &e * (lam * meas)).norm();
        let rayleigh_ok = (lam - lambda).abs() < tol * lam.abs();
        lambda = lam;
        if rayleigh_ok && residual <= tol * ae.norm().max(1.0) {
            iterations = it + 1;
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SolverError::EigenDidNotConverge {
            iterations: max_iter,
            residual,
        });
    }
    if e.sum() < 0.0 {
        e.neg_mut();
    }
    let min = e.min();
    if min < -1e-10 {
        return Err(SolverError::NonpositiveSolution(min));
    }

    let lambda2_estimate = second_eigenvalue_estimate(op, &chol, &e, meas);

    e.apply(|v| {
        if *v < 0.0 {
            *v = 0.0;
        }
    });
    Ok(EigenPair {
        lambda1: lambda,
        e1: Field::from_vector(op.domain(), e)?,
        residual,
        iterations,
        lambda2_estimate,
    })
}

/// One deflated inverse iteration (fixed budget) for a second-eigenvalue
/// Rayleigh estimate; `e1` must be M-normalized.
fn second_eigenvalue_estimate(
    op: &MixedOperator,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    e1: &DVector<f64>,
    meas: f64,
) -> f64 {
    let domain = op.domain();
    let cx = 0.5 * (domain.axes()[0].lo + domain.axes()[0].hi);
    // start from an odd-in-x profile, which overlaps the second mode
    let mut w = DVector::from_fn(op.n(), |i, _| domain.node_coords(i)[0] - cx);
    for _ in 0..50 {
        let proj = meas * e1.dot(&w);
        w -= e1 * proj;
        let nrm = (meas * w.norm_squared()).sqrt();
        if !(nrm > 1e-300) {
            return f64::INFINITY;
        }
        w /= nrm;
        w = chol.solve(&(&w * meas));
    }
    let proj = meas * e1.dot(&w);
    w -= e1 * proj;
    let nsq = meas * w.norm_squared();
    if !(nsq > 1e-300) {
        return f64::INFINITY;
    }
    let aw = op.apply_vec(&w, true, true);
    w.dot(&aw) / nsq
}

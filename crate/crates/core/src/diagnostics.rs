//! Solution verification: randomized weak-residual checks, a dense
//! eigenvalue oracle for cross-validation, grid-refinement studies, and
//! embedding-constant stability probes.
//!
//! Weak residuals test a computed field `u` against the equation
//! `A u = M g(u)` by pairing the algebraic residual with smooth, compactly
//! supported bump fields and normalizing by their H¹ seminorm — a
//! discretization of `|⟨residual, φ⟩| / |φ|₁` that is insensitive to the
//! grid scale.

use nalgebra::{DVector, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Domain, Field};
use crate::error::{Result, SolverError};
use crate::operator::MixedOperator;
use crate::problem::{EpsSchedule, ProblemSpec};
use crate::singular::solve_pure_singular;

/// Upper size limit for the dense eigenvalue oracle.
pub const DENSE_EIGEN_GUARD: usize = 2000;

/// Outcome of a weak-residual or refinement check.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// Largest normalized weak residual over the test fields.
    pub max_weak_residual: f64,
    pub n_test_fields: usize,
    /// Residual decay factors between successive refinement levels
    /// (empty unless produced by [`refinement_study`]).
    pub refinement_ratios: Vec<f64>,
    /// Reflection-symmetry defect of the checked solution.
    pub symmetry_defect: f64,
}

/// Seeded family of smooth tensor-product bump fields `∏ exp(1 − 1/(1−t²))`
/// with random centers (middle 60% of each axis) and widths (7.5%–17.5% of
/// the axis length).
pub fn bump_fields(domain: &Domain, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields = Vec::with_capacity(count);
    let mut draws = 0;
    while fields.len() < count && draws < 10 * count.max(1) {
        draws += 1;
        let shape: Vec<(f64, f64)> = domain
            .axes()
            .iter()
            .map(|ax| {
                let len = ax.length();
                let mid = 0.5 * (ax.lo + ax.hi);
                let c = mid + rng.gen_range(-0.3..0.3) * len;
                let w = rng.gen_range(0.075..0.175) * len;
                (c, w)
            })
            .collect();
        let f = Field::from_fn(domain, |x| {
            let mut v = 1.0;
            for (xi, &(c, w)) in x.iter().zip(shape.iter()) {
                let t = (xi - c) / w;
                if t.abs() >= 1.0 {
                    return 0.0;
                }
                v *= (1.0 - 1.0 / (1.0 - t * t)).exp();
            }
            v
        });
        if f.h1_semi() > 0.0 {
            fields.push(f);
        }
    }
    fields
}

/// Seeded iid standard-normal fields (Box–Muller), useful as rough test
/// directions where smoothness is not wanted.
pub fn noise_fields(domain: &Domain, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = domain.n_nodes();
    (0..count)
        .map(|_| {
            let values = DVector::from_fn(n, |_, _| {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            });
            Field::from_vector(domain, values).expect("matching domain")
        })
        .collect()
}

/// Normalized weak residual of `u` against the unregularized equation
/// `A u = M g(u)`, tested with `n_tests` seeded bump fields.
///
/// The singular right-hand side requires `u > 0` everywhere; the error
/// names the offending node otherwise.
pub fn weak_residual(
    op: &MixedOperator,
    spec: &ProblemSpec,
    u: &Field,
    n_tests: usize,
    seed: u64,
) -> Result<ResidualReport> {
    spec.validate()?;
    if u.domain() != op.domain() {
        return Err(SolverError::DomainMismatch(
            "field lives on a different grid than the operator".into(),
        ));
    }
    let (imin, umin) = u.values().argmin();
    if !(umin > 0.0) {
        let x = op.domain().node_coords(imin);
        return Err(SolverError::InvalidParameter(format!(
            "singular right-hand side undefined: u = {umin:.6e} ≤ 0 at node {imin} \
             (x = {:?})",
            &x[..op.domain().dim()]
        )));
    }
    let meas = op.mass();
    let gu = u.values().map(|t| meas * spec.rhs(t, 0.0));
    let residual = op.apply_vec(u.values(), true, true) - gu;
    let fields = bump_fields(op.domain(), n_tests, seed);
    let mut max_weak = 0.0_f64;
    for phi in &fields {
        let denom = phi.h1_semi();
        if denom > 0.0 {
            max_weak = max_weak.max(phi.values().dot(&residual).abs() / denom);
        }
    }
    Ok(ResidualReport {
        max_weak_residual: max_weak,
        n_test_fields: fields.len(),
        refinement_ratios: Vec::new(),
        symmetry_defect: u.reflection_defect(),
    })
}

/// All eigenvalues of the mass-normalized mixed operator by dense symmetric
/// factorization, ascending. Guarded to small systems; intended as an
/// oracle for the iterative eigensolver.
pub fn dense_eigen_oracle(op: &MixedOperator) -> Result<Vec<f64>> {
    let n = op.n();
    if n > DENSE_EIGEN_GUARD {
        return Err(SolverError::SizeGuardExceeded {
            n,
            guard: DENSE_EIGEN_GUARD,
        });
    }
    let m = op.system_matrix() / op.mass();
    let eig = SymmetricEigen::new(m);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Grid-refinement study for the parameter-free singular problem: solve on
/// `levels` nested grids, prolong each solution to the next refinement,
/// and measure its weak residual there. Returns the finest-level report
/// with the decay ratios between successive levels filled in.
#[allow(clippy::too_many_arguments)]
pub fn refinement_study(
    base: &Domain,
    s: f64,
    gamma: f64,
    schedule: &EpsSchedule,
    tol: f64,
    n_tests: usize,
    seed: u64,
    levels: usize,
) -> Result<ResidualReport> {
    if levels < 2 {
        return Err(SolverError::InvalidParameter(format!(
            "refinement study needs at least 2 levels, got {levels}"
        )));
    }
    let spec = ProblemSpec::pure_singular(s, gamma);
    let mut domain = base.clone();
    let mut residuals = Vec::with_capacity(levels);
    let mut defect = 0.0;
    for _ in 0..levels {
        let op = MixedOperator::assemble(&domain, s)?;
        let sol = solve_pure_singular(&op, gamma, schedule, tol)?;
        defect = sol.v0.reflection_defect();
        let fine_op = MixedOperator::assemble(&domain.refined(), s)?;
        let prolonged = sol.v0.prolonged();
        let report = weak_residual(&fine_op, &spec, &prolonged, n_tests, seed)?;
        residuals.push(report.max_weak_residual);
        domain = domain.refined();
    }
    let ratios = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(ResidualReport {
        max_weak_residual: *residuals.last().unwrap(),
        n_test_fields: n_tests,
        refinement_ratios: ratios,
        symmetry_defect: defect,
    })
}

/// Ratio of nonlocal to local quadratic form, maximized over seeded bump
/// fields, for each given domain. Stability of these constants across
/// resolutions probes the discrete embedding of the nonlocal energy into
/// the local one.
pub fn embedding_constants(
    s: f64,
    domains: &[Domain],
    n_fields: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(domains.len());
    for domain in domains {
        let op = MixedOperator::assemble(domain, s)?;
        let mut c = 0.0_f64;
        for f in bump_fields(domain, n_fields, seed) {
            let local = f.h1_semi().powi(2);
            if local > 0.0 {
                c = c.max(op.gagliardo_energy(&f)? / local);
            }
        }
        out.push(c);
    }
    Ok(out)
}

//! Singular semilinear solvers: a damped Newton kernel for regularized
//! problems, ε-continuation for the parameter-free singular equation, and
//! the ordered sub/supersolution construction for the weighted family.
//!
//! The discrete equation is `A u = M g(u)` with `A` the mixed stiffness and
//! `M` the lumped mass. Singular right-hand sides are approached through the
//! regularizations `g_ε` of [`ProblemSpec`](crate::ProblemSpec), solved to
//! tight tolerance at each ε with warm starts, and declared converged when
//! consecutive iterates are Cauchy in the H¹ seminorm.

use nalgebra::{Cholesky, DVector};

use crate::domain::{h1_semi_of, Field};
use crate::eigen::EigenPair;
use crate::error::{Result, SolverError};
use crate::operator::MixedOperator;
use crate::problem::{EpsSchedule, Nonlinearity, ProblemSpec};
use crate::quadrature::GaussRule;

/// Result of one damped-Newton solve of `A u = M g(u)`.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: Field,
    /// Final algebraic residual `‖A u − M g(u)‖₂`.
    pub residual: f64,
    pub iterations: usize,
}

/// One continuation step of [`solve_pure_singular`].
#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub eps: f64,
    /// Sup norm of the iterate at this ε.
    pub linf: f64,
    /// H¹-seminorm distance to the previous iterate (`None` on the first
    /// step).
    pub h1_diff: Option<f64>,
    pub newton_iterations: usize,
}

/// Converged ε → 0 limit of the parameter-free singular problem.
#[derive(Debug, Clone)]
pub struct PureSingularSolution {
    pub v0: Field,
    pub trace: Vec<ContinuationStep>,
    /// Regularization level at which continuation stopped.
    pub final_eps: f64,
}

/// Certificate for the weighted singular problem: an ordered pair of
/// sub/supersolution fields bracketing the computed solution.
#[derive(Debug, Clone)]
pub struct SandwichCertificate {
    /// Subsolution `a·e₁`.
    pub sub: Field,
    /// Supersolution `b·v₀`.
    pub sup: Field,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub solution: Field,
    /// Algebraic residual of the solution.
    pub residual: f64,
    /// Monotone-iteration count.
    pub iterations: usize,
    /// Shift that made the iteration monotone.
    pub sigma: f64,
    /// Value of the energy functional at the solution.
    pub energy: f64,
}

/// Damped Newton iteration on `F(u) = A u − M g(u)`, with backtracking on
/// `‖F‖₂` and convergence relative to the scale `‖A u‖ + ‖M g(u)‖ + 1`.
pub(crate) fn newton_system<G, DG>(
    op: &MixedOperator,
    g: &G,
    dg: &DG,
    u0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, f64, usize)>
where
    G: Fn(f64) -> f64,
    DG: Fn(f64) -> f64,
{
    let meas = op.mass();
    let a = op.system_matrix();
    let mut u = u0;
    let mut gu = u.map(|t| meas * g(t));
    let mut au = op.apply_vec(&u, true, true);
    let mut f = &au - &gu;
    for it in 0..max_iter {
        let nf = f.norm();
        let scale = au.norm() + gu.norm() + 1.0;
        if nf <= tol * scale {
            return Ok((u, nf, it));
        }
        let mut j = a.clone();
        for i in 0..u.len() {
            j[(i, i)] -= meas * dg(u[i]);
        }
        let d = j
            .lu()
            .solve(&(-&f))
            .ok_or_else(|| SolverError::LinearSolveFailed("singular Newton Jacobian".into()))?;
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1e-13 {
            let ut = &u + &d * alpha;
            let gt = ut.map(|t| meas * g(t));
            let at = op.apply_vec(&ut, true, true);
            let ft = &at - &gt;
            if ft.norm() <= (1.0 - 1e-4 * alpha) * nf {
                u = ut;
                gu = gt;
                au = at;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // the line search can stall at roundoff level near the solution;
            // accept if already within the square-root tolerance
            if nf <= tol.sqrt() * scale {
                return Ok((u, nf, it));
            }
            return Err(SolverError::LineSearchStalled {
                residual: nf,
                scale,
            });
        }
    }
    let nf = f.norm();
    Err(SolverError::NewtonDidNotConverge {
        iterations: max_iter,
        residual: nf,
    })
}

/// Solve a regularized problem `A u = M g(u)` by damped Newton from `u0`.
///
/// `g` must be C¹ with derivative `dg`; singular right-hand sides must be
/// passed in regularized form.
pub fn solve_regularized<G, DG>(
    op: &MixedOperator,
    g: G,
    dg: DG,
    u0: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome>
where
    G: Fn(f64) -> f64,
    DG: Fn(f64) -> f64,
{
    if u0.domain() != op.domain() {
        return Err(SolverError::DomainMismatch(
            "initial iterate lives on a different grid than the operator".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "newton tolerance must be positive, got {tol}"
        )));
    }
    let (u, residual, iterations) = newton_system(op, &g, &dg, u0.values().clone(), tol, max_iter)?;
    Ok(NewtonOutcome {
        u: Field::from_vector(op.domain(), u)?,
        residual,
        iterations,
    })
}

/// ε-continuation for `A v = M v^{−γ}`: solve the regularized problem along
/// the schedule with warm starts until consecutive iterates are Cauchy in
/// the H¹ seminorm.
///
/// The iterates increase nodewise as ε decreases; a violation beyond
/// roundoff slack aborts. Stagnation (the floor reached while the H¹
/// differences are neither small nor decreasing) aborts with the trace
/// embedded in the error.
pub fn solve_pure_singular(
    op: &MixedOperator,
    gamma: f64,
    schedule: &EpsSchedule,
    tol: f64,
) -> Result<PureSingularSolution> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SolverError::InvalidParameter(format!(
            "gamma = {gamma} outside (0, 1)"
        )));
    }
    schedule.validate()?;
    if !(tol > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "continuation tolerance must be positive, got {tol}"
        )));
    }
    let newton_tol = 1e-12;
    let mut u = DVector::zeros(op.n());
    let mut trace: Vec<ContinuationStep> = Vec::new();
    let mut final_eps = schedule.eps0;
    for eps in schedule.values() {
        let g = move |t: f64| (t.max(0.0) + eps).powf(-gamma);
        let dg = move |t: f64| {
            if t > 0.0 {
                -gamma * (t + eps).powf(-gamma - 1.0)
            } else {
                0.0
            }
        };
        let (u_new, _res, its) = newton_system(op, &g, &dg, u.clone(), newton_tol, 200)?;
        let slack = 1e-8 * u_new.amax().max(1.0);
        if let Some(i) = (0..u.len()).find(|&i| u_new[i] < u[i] - slack) {
            return Err(SolverError::OrderingViolated(format!(
                "ε-monotonicity failed at eps = {eps:.3e}, node {i}: {} < {}",
                u_new[i], u[i]
            )));
        }
        let h1_diff = if trace.is_empty() {
            None
        } else {
            Some(h1_semi_of(op.domain(), (&u_new - &u).as_slice()))
        };
        trace.push(ContinuationStep {
            eps,
            linf: u_new.amax(),
            h1_diff,
            newton_iterations: its,
        });
        u = u_new;
        final_eps = eps;
        if let Some(d) = h1_diff {
            if d < tol {
                break;
            }
        }
    }
    if let Some(last) = trace.last() {
        if let (Some(d_last), Some(prev)) = (last.h1_diff, trace.len().checked_sub(2)) {
            let d_prev = trace[prev].h1_diff.unwrap_or(f64::INFINITY);
            if d_last > tol && d_last >= d_prev {
                return Err(SolverError::ContinuationStalled(format!(
                    "H¹ increments not contracting at the floor: {:.3e} after {:.3e} \
                     over {} steps",
                    d_last,
                    d_prev,
                    trace.len()
                )));
            }
        }
    }
    let min = u.min();
    if !(min > 0.0) {
        return Err(SolverError::NonpositiveSolution(min));
    }
    Ok(PureSingularSolution {
        v0: Field::from_vector(op.domain(), u)?,
        trace,
        final_eps,
    })
}

/// Largest `a = 2^{−k}` (from 1, at most 200 halvings) making `a e₁` a
/// subsolution: nodewise `λ₁ t ≤ λ t^{−γ} h(t)` with `t = a e₁`.
pub fn find_a_lambda(eig: &EigenPair, spec: &ProblemSpec) -> Result<f64> {
    require_kind(spec, Nonlinearity::Singular)?;
    spec.validate()?;
    let e1 = eig.e1.values();
    let mut a = 1.0_f64;
    for _ in 0..200 {
        let ok = e1.iter().all(|&ei| {
            let t = a * ei;
            // t = 0 nodes pass: the right side is +∞ there
            eig.lambda1 * t <= spec.lambda * t.powf(-spec.gamma) * spec.h_fn.eval(t)
        });
        if ok {
            return Ok(a);
        }
        a *= 0.5;
    }
    Err(SolverError::SubsolutionSearchFailed(200))
}

/// Smallest `b = 2^k` (from 1, at most 200 doublings) making `b v₀` a
/// supersolution.
///
/// The scalar sufficient condition is checked first:
/// `(b‖v₀‖_∞)^{−(γ+1)} h(b‖v₀‖_∞) ≤ 1/(λ‖v₀‖_∞^{γ+1})`. Because `v₀`
/// satisfies `A v₀ = M v₀^{−γ}`, the supersolution inequality
/// `A(b v₀) ≥ M λ h(b v₀)(b v₀)^{−γ}` reduces to the nodewise scalar test
/// `b^{1+γ} ≥ λ h(b v₀ᵢ)`, which is verified exactly (to roundoff slack)
/// before returning.
pub fn find_b_lambda(v0: &Field, spec: &ProblemSpec) -> Result<f64> {
    require_kind(spec, Nonlinearity::Singular)?;
    spec.validate()?;
    let min = v0.min();
    if !(min > 0.0) {
        return Err(SolverError::NonpositiveSolution(min));
    }
    let vmax = v0.linf();
    let mut b = 1.0_f64;
    for _ in 0..200 {
        let lhs = (b * vmax).powf(-(spec.gamma + 1.0)) * spec.h_fn.eval(b * vmax);
        let rhs = 1.0 / (spec.lambda * vmax.powf(spec.gamma + 1.0));
        if lhs <= rhs {
            let bg = b.powf(1.0 + spec.gamma);
            let nodewise = v0.values().iter().all(|&vi| {
                let need = spec.lambda * spec.h_fn.eval(b * vi);
                bg >= need * (1.0 - 1e-9)
            });
            if nodewise {
                return Ok(b);
            }
        }
        b *= 2.0;
    }
    Err(SolverError::SupersolutionSearchFailed(200))
}

/// Solve the weighted singular problem by a shifted monotone iteration
/// inside the ordered interval `[a e₁, b v₀]`.
///
/// The shift `σ = λ·Lip(h(t)t^{−γ})` is estimated on the bracket's value
/// range from 1000 geometric sample points; the iteration
/// `(A + σM) u⁺ = M(λ h(u) u^{−γ} + σ u)` then increases monotonically from
/// the subsolution while staying below the supersolution. One retry with
/// `10σ` is attempted if the ordering checks trip.
pub fn solve_g1(
    op: &MixedOperator,
    eig: &EigenPair,
    spec: &ProblemSpec,
    schedule: &EpsSchedule,
    tol: f64,
) -> Result<SandwichCertificate> {
    require_kind(spec, Nonlinearity::Singular)?;
    spec.validate()?;
    if !(tol > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let pure = solve_pure_singular(op, spec.gamma, schedule, tol)?;
    let v0 = pure.v0;
    let mut a = find_a_lambda(eig, spec)?;
    let b = find_b_lambda(&v0, spec)?;

    let e1 = eig.e1.values();
    let sup = v0.values() * b;
    let mut sub = e1 * a;
    let mut guard = 0;
    while (0..sub.len()).any(|i| sub[i] > sup[i] + 1e-12) {
        a *= 0.5;
        sub = e1 * a;
        guard += 1;
        if guard > 200 {
            return Err(SolverError::OrderingViolated(
                "could not order the subsolution below the supersolution".into(),
            ));
        }
    }
    let tmin = sub.min();
    if !(tmin > 0.0) {
        return Err(SolverError::NonpositiveSolution(tmin));
    }

    // Lipschitz constant of t ↦ h(t)t^{−γ} over the bracket's value range,
    // sampled geometrically
    let tmax = sup.amax();
    let phi = |t: f64| spec.h_fn.eval(t) * t.powf(-spec.gamma);
    let m = 1000;
    let mut lip = 0.0_f64;
    let mut t_prev = tmin;
    let mut phi_prev = phi(tmin);
    for j in 1..m {
        let t = tmin * (tmax / tmin).powf(j as f64 / (m - 1) as f64);
        let p = phi(t);
        lip = lip.max(((p - phi_prev) / (t - t_prev)).abs());
        t_prev = t;
        phi_prev = p;
    }
    let sigma0 = spec.lambda * lip;

    let mut attempt = monotone_iteration(op, spec, &sub, &sup, sigma0, tol);
    if matches!(attempt, Err(SolverError::OrderingViolated(_))) {
        attempt = monotone_iteration(op, spec, &sub, &sup, 10.0 * sigma0, tol);
    }
    let (u, sigma, iterations) = attempt?;

    let meas = op.mass();
    let gu = u.map(|t| meas * spec.lambda * spec.h_fn.eval(t) * t.powf(-spec.gamma));
    let residual = (op.apply_vec(&u, true, true) - gu).norm();
    let slack = 1e-10 * u.amax().max(1.0);
    if let Some(i) = (0..u.len()).find(|&i| u[i] < sub[i] - slack || u[i] > sup[i] + slack) {
        return Err(SolverError::OrderingViolated(format!(
            "solution escaped the bracket at node {i}"
        )));
    }
    let energy = g1_energy(op, spec, &u);

    Ok(SandwichCertificate {
        sub: Field::from_vector(op.domain(), sub)?,
        sup: Field::from_vector(op.domain(), sup)?,
        a_lambda: a,
        b_lambda: b,
        solution: Field::from_vector(op.domain(), u)?,
        residual,
        iterations,
        sigma,
        energy,
    })
}

fn monotone_iteration(
    op: &MixedOperator,
    spec: &ProblemSpec,
    sub: &DVector<f64>,
    sup: &DVector<f64>,
    sigma: f64,
    tol: f64,
) -> Result<(DVector<f64>, f64, usize)> {
    let meas = op.mass();
    let mut shifted = op.system_matrix();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += sigma * meas;
    }
    let chol = Cholesky::new(shifted).ok_or_else(|| {
        SolverError::LinearSolveFailed("shifted monotone-iteration matrix".into())
    })?;
    let mut u = sub.clone();
    let max_iter = 200_000;
    for it in 0..max_iter {
        let rhs =
            u.map(|t| meas * (spec.lambda * spec.h_fn.eval(t) * t.powf(-spec.gamma) + sigma * t));
        let u_new = chol.solve(&rhs);
        let slack = 1e-9 * u_new.amax().max(1.0);
        if let Some(i) = (0..u.len()).find(|&i| u_new[i] < u[i] - slack) {
            return Err(SolverError::OrderingViolated(format!(
                "monotone iteration decreased at node {i} on step {it}"
            )));
        }
        if let Some(i) = (0..u.len()).find(|&i| u_new[i] > sup[i] + slack) {
            return Err(SolverError::OrderingViolated(format!(
                "monotone iteration crossed the supersolution at node {i} on step {it}"
            )));
        }
        let d = h1_semi_of(op.domain(), (&u_new - &u).as_slice());
        u = u_new;
        if d < tol {
            return Ok((u, sigma, it + 1));
        }
    }
    Err(SolverError::ContinuationStalled(format!(
        "monotone iteration did not contract within {max_iter} steps"
    )))
}

/// Energy `J(u) = ½⟨Au, u⟩ − λ Σᵢ G(uᵢ)·M` with `G(t) = ∫₀ᵗ h(w)w^{−γ} dw`,
/// evaluated after the substitution `w = z^{1/(1−γ)}` that removes the
/// endpoint singularity.
fn g1_energy(op: &MixedOperator, spec: &ProblemSpec, u: &DVector<f64>) -> f64 {
    let quad = 0.5 * u.dot(&op.apply_vec(u, true, true));
    let rule = GaussRule::legendre(32);
    let one_m_gamma = 1.0 - spec.gamma;
    let meas = op.mass();
    let mut pot = 0.0;
    for &t in u.iter() {
        let upper = t.powf(one_m_gamma);
        let g =
            rule.integrate(0.0, upper, |z| spec.h_fn.eval(z.powf(1.0 / one_m_gamma))) / one_m_gamma;
        pot += g;
    }
    quad - spec.lambda * meas * pot
}

fn require_kind(spec: &ProblemSpec, kind: Nonlinearity) -> Result<()> {
    if spec.kind != kind {
        return Err(SolverError::InvalidParameter(format!(
            "nonlinearity {:?} passed where {:?} is required",
            spec.kind, kind
        )));
    }
    Ok(())
}

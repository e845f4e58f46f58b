//! Two-solution construction for the singular-plus-power problem: a local
//! minimizer inside an explicit H¹ ball and a mountain-pass critical point
//! outside it, continued jointly in the regularization parameter.
//!
//! The geometry is calibrated first: an ascent iteration estimates the
//! sharpest constant `C_θ` in the discrete embedding `‖u⁺‖_{q+1}^{q+1} ≤
//! C_θ |u|₁^{q+1}`, which yields a ball radius `R`, a rim energy level
//! `ρ > 0` separating the two branches, and a sufficient multiplier range
//! `λ < Λ_est`. All radii and path lengths are measured in the **local** H¹
//! seminorm `|v|₁ = (vᵀ A_loc v)^{1/2}`, whose embedding constants the
//! calibration estimates.

use nalgebra::{Cholesky, DVector, Dyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::weak_residual;
use crate::domain::{h1_semi_of, Field};
use crate::eigen::{principal_eigenpair, EigenPair};
use crate::error::{Result, SolverError};
use crate::operator::MixedOperator;
use crate::problem::{EpsSchedule, Nonlinearity, ProblemSpec};
use crate::singular::newton_system;

const BALL_GRAD_TOL: f64 = 1e-7;
const PASS_GRAD_TOL: f64 = 1e-6;
const POLISH_EVERY: usize = 200;

/// Calibrated mountain-pass geometry, all lengths in the local H¹ seminorm.
#[derive(Debug, Clone, Copy)]
pub struct MountainPassParams {
    /// Ball radius `R`.
    pub radius: f64,
    /// Rim energy level `ρ > 0`.
    pub rho: f64,
    /// Endpoint scale: `T e₁` has energy below −1 outside the ball.
    pub t_scale: f64,
    /// Sufficient multiplier bound `Λ_est`.
    pub lambda_est: f64,
    /// Sharp embedding constant estimate from the ascent iteration.
    pub c_theta: f64,
    /// Interpolation weight `measure^{(r−q−1)/r}` recorded for reporting.
    pub theta: f64,
    /// Safety factor applied to the radius (halved until `ρ > 0`).
    pub k: f64,
    /// Principal eigenvalue of the purely local operator.
    pub lambda1_local: f64,
}

/// Converged ball minimizer.
#[derive(Debug, Clone)]
pub struct BallOutcome {
    pub v: Field,
    pub energy: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Converged mountain-pass point.
#[derive(Debug, Clone)]
pub struct PassOutcome {
    pub zeta: Field,
    pub energy: f64,
    pub gradient_norm: f64,
    pub sweeps: usize,
    pub retries: usize,
}

/// One row of the joint ε-continuation trace.
#[derive(Debug, Clone, Copy)]
pub struct EpsTraceRow {
    pub eps: f64,
    pub energy_nu: f64,
    pub energy_zeta: f64,
    pub h1_nu: f64,
    pub h1_zeta: f64,
    pub gradient_nu: f64,
    pub gradient_zeta: f64,
    pub ball_iterations: usize,
    pub pass_sweeps: usize,
}

/// Certified pair of distinct solutions with their continuation history.
#[derive(Debug, Clone)]
pub struct TwoSolutions {
    /// Ball minimizer, negative energy.
    pub nu: Field,
    /// Mountain-pass solution, energy at least `ρ`.
    pub zeta: Field,
    /// Energy of `nu` in the unregularized functional.
    pub energy_nu: f64,
    /// Energy of `zeta` in the unregularized functional.
    pub energy_zeta: f64,
    pub eps_trace: Vec<EpsTraceRow>,
    pub barrier: Field,
    pub barrier_min: f64,
    pub params: MountainPassParams,
    /// `‖ν − ζ‖_∞ / ‖ζ‖_∞`.
    pub distinctness: f64,
    /// Largest H¹ seminorm seen along either branch.
    pub theta_observed: f64,
    pub weak_residual_nu: f64,
    pub weak_residual_zeta: f64,
    /// Whether `λ < Λ_est` held (the sufficient certification range).
    pub lambda_below_estimate: bool,
}

/// Regularized energy `I_{λ,ε}(u) = ½⟨Au,u⟩ − λ/(1−γ) Σ((u⁺+ε)^{1−γ} −
/// ε^{1−γ})·M − Σ(u⁺)^{q+1}·M/(q+1)`; `ε = 0` selects the singular limit,
/// which is still finite thanks to `1 − γ > 0`.
pub fn energy(op: &MixedOperator, spec: &ProblemSpec, eps: f64, u: &Field) -> Result<f64> {
    require_g2(spec)?;
    check_domain(op, u)?;
    if !(eps >= 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "regularization eps = {eps} must be nonnegative"
        )));
    }
    Ok(energy_vec(op, spec, eps, u.values()))
}

/// Gradient `A u − M(λ(u⁺+ε)^{−γ} + (u⁺)^q)` of the regularized energy;
/// requires `ε > 0` so the formula is finite on all of ℝ.
pub fn gradient(op: &MixedOperator, spec: &ProblemSpec, eps: f64, u: &Field) -> Result<Field> {
    require_g2(spec)?;
    check_domain(op, u)?;
    if !(eps > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "gradient requires eps > 0, got {eps}"
        )));
    }
    Field::from_vector(op.domain(), gradient_vec(op, spec, eps, u.values()))
}

fn energy_vec(op: &MixedOperator, spec: &ProblemSpec, eps: f64, u: &DVector<f64>) -> f64 {
    let quad = 0.5 * u.dot(&op.apply_vec(u, true, true));
    let meas = op.mass();
    let omg = 1.0 - spec.gamma;
    let qp = spec.q + 1.0;
    let mut sing = 0.0;
    let mut pow = 0.0;
    if eps > 0.0 {
        let base = eps.powf(omg);
        for &t in u.iter() {
            let tp = t.max(0.0);
            sing += (tp + eps).powf(omg) - base;
            pow += tp.powf(qp);
        }
    } else {
        for &t in u.iter() {
            let tp = t.max(0.0);
            sing += tp.powf(omg);
            pow += tp.powf(qp);
        }
    }
    quad - spec.lambda / omg * meas * sing - meas / qp * pow
}

fn gradient_vec(
    op: &MixedOperator,
    spec: &ProblemSpec,
    eps: f64,
    u: &DVector<f64>,
) -> DVector<f64> {
    let meas = op.mass();
    let au = op.apply_vec(u, true, true);
    let g = u.map(|t| {
        let tp = t.max(0.0);
        meas * (spec.lambda * (tp + eps).powf(-spec.gamma) + tp.powf(spec.q))
    });
    au - g
}

/// Estimate the mountain-pass geometry at regularization `eps`.
///
/// `C_θ` is the maximum of `Σ(v⁺)^{q+1}·M` over `|v|₁ = 1`, found by a
/// projected ascent iteration from `restarts = 20` seeded random starts;
/// from it follow the ball radius `R` (shrunk by the safety factor `k`
/// until the rim level `ρ` is positive), the multiplier bound `Λ_est`, and
/// the endpoint scale `T` (doubled until `T e₁` has energy below −1 beyond
/// the ball).
pub fn calibrate_geometry(
    op: &MixedOperator,
    eig: &EigenPair,
    spec: &ProblemSpec,
    eps: f64,
    seed: u64,
) -> Result<MountainPassParams> {
    require_g2(spec)?;
    spec.validate()?;
    if !(eps > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "calibration requires eps > 0, got {eps}"
        )));
    }
    let n = op.n();
    let meas = op.mass();
    let q = spec.q;
    let l = spec.r;
    let theta = op.domain().measure().powf((l - q - 1.0) / l);

    let chol_loc = Cholesky::new(op.a_loc().clone_owned()).ok_or_else(|| {
        SolverError::LinearSolveFailed("local stiffness is not positive definite".into())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c_theta = 0.0_f64;
    for _ in 0..20 {
        let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let nv = h1_semi_of(op.domain(), v.as_slice());
        if !(nv > 0.0) {
            continue;
        }
        v /= nv;
        let mut q_old = f64::NEG_INFINITY;
        for _ in 0..500 {
            let rhs = v.map(|t| meas * t.max(0.0).powf(q));
            let w = chol_loc.solve(&rhs);
            let nw = h1_semi_of(op.domain(), w.as_slice());
            if !(nw > 0.0) {
                break;
            }
            v = w / nw;
            let qv = meas * v.iter().map(|&t| t.max(0.0).powf(q + 1.0)).sum::<f64>();
            if (qv - q_old).abs() < 1e-8 * qv.max(1e-30) {
                q_old = qv;
                break;
            }
            q_old = qv;
        }
        c_theta = c_theta.max(q_old);
    }
    if !(c_theta > 0.0) {
        return Err(SolverError::GeometryViolated(
            "embedding-constant ascent produced no positive value".into(),
        ));
    }

    let mut k = 0.5_f64;
    let mut radius = 0.0;
    let mut rho = -1.0;
    for _ in 0..10 {
        radius = k * ((q + 1.0) / (2.0 * c_theta)).powf(1.0 / (q - 1.0));
        rho = 0.5 * (radius * radius / 2.0 - c_theta * radius.powf(q + 1.0) / (q + 1.0));
        if rho > 0.0 {
            break;
        }
        k *= 0.5;
    }
    if !(rho > 0.0) {
        return Err(SolverError::GeometryViolated(format!(
            "rim level stayed nonpositive down to k = {k}"
        )));
    }

    let lambda1_local = principal_eigenpair(&op.without_fractional(), 1e-12, 2000)?.lambda1;
    let omg = 1.0 - spec.gamma;
    let sup_bound = (1.0 / omg)
        * lambda1_local.powf(-omg / 2.0)
        * radius.powf(omg)
        * op.domain().measure().powf((1.0 + spec.gamma) / 2.0);
    let lambda_est = rho / sup_bound;

    let e1 = eig.e1.values();
    let mut t_scale = 2.0 * radius;
    let mut found = false;
    for _ in 0..200 {
        let te = e1 * t_scale;
        let low = energy_vec(op, spec, eps, &te) < -1.0;
        let out = h1_semi_of(op.domain(), te.as_slice()) > radius;
        if low && out {
            found = true;
            break;
        }
        t_scale *= 2.0;
    }
    if !found {
        return Err(SolverError::GeometryViolated(
            "no endpoint scale with energy below −1 outside the ball".into(),
        ));
    }

    Ok(MountainPassParams {
        radius,
        rho,
        t_scale,
        lambda_est,
        c_theta,
        theta,
        k,
        lambda1_local,
    })
}

/// Minimize the regularized energy over the closed ball `|v|₁ ≤ R` by
/// preconditioned projected descent, then polish the interior minimizer
/// with Newton's method.
///
/// Fails with a geometry error if the minimizer pins to the rim (no
/// interior minimum) or its energy is not negative.
pub fn ball_minimizer(
    op: &MixedOperator,
    eig: &EigenPair,
    spec: &ProblemSpec,
    eps: f64,
    params: &MountainPassParams,
    warm: Option<&Field>,
    tol: f64,
) -> Result<BallOutcome> {
    require_g2(spec)?;
    if !(eps > 0.0 && tol > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "ball minimizer requires eps > 0 and tol > 0, got eps = {eps}, tol = {tol}"
        )));
    }
    let radius = params.radius;
    let chol = full_cholesky(op)?;

    let mut v = match warm {
        Some(w) => {
            check_domain(op, w)?;
            let mut v = w.values().clone();
            let nv = h1_semi_of(op.domain(), v.as_slice());
            if nv > radius {
                v *= radius / nv;
            }
            v
        }
        None => {
            let e1 = eig.e1.values();
            let ne = h1_semi_of(op.domain(), e1.as_slice());
            let mut t = radius / (2.0 * ne);
            let mut start = e1 * t;
            let mut ok = false;
            for _ in 0..60 {
                if energy_vec(op, spec, eps, &start) < 0.0 {
                    ok = true;
                    break;
                }
                t *= 0.5;
                start = e1 * t;
            }
            if !ok {
                return Err(SolverError::GeometryViolated(
                    "no negative-energy starting point inside the ball".into(),
                ));
            }
            start
        }
    };

    let mut iterations = 0;
    for it in 0..5000 {
        iterations = it;
        let g = gradient_vec(op, spec, eps, &v);
        if g.norm() < tol {
            break;
        }
        let d = chol.solve(&(-&g));
        let e0 = energy_vec(op, spec, eps, &v);
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha >= 1e-14 {
            let mut vt = &v + &d * alpha;
            let nvt = h1_semi_of(op.domain(), vt.as_slice());
            if nvt > radius {
                vt *= radius / nvt;
            }
            let et = energy_vec(op, spec, eps, &vt);
            if et < e0 - 1e-12 * e0.abs() {
                v = vt;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let nv = h1_semi_of(op.domain(), v.as_slice());
    if nv >= radius - 1e-8 {
        return Err(SolverError::GeometryViolated(format!(
            "ball minimizer pinned to the rim: |v|₁ = {nv:.6e} vs R = {radius:.6e}"
        )));
    }

    let g = |t: f64| spec.rhs(t, eps);
    let dg = |t: f64| spec.rhs_derivative(t, eps);
    let (v, _res, _its) = newton_system(op, &g, &dg, v, 1e-12, 100)?;

    let e_final = energy_vec(op, spec, eps, &v);
    if !(e_final < 0.0) {
        return Err(SolverError::GeometryViolated(format!(
            "ball minimizer energy {e_final:.6e} is not negative"
        )));
    }
    let nv = h1_semi_of(op.domain(), v.as_slice());
    if nv >= radius - 1e-8 {
        return Err(SolverError::GeometryViolated(format!(
            "polished minimizer left the ball interior: |v|₁ = {nv:.6e}"
        )));
    }
    let vmin = v.min();
    if !(vmin > 0.0) {
        return Err(SolverError::NonpositiveSolution(vmin));
    }
    let gradient_norm = gradient_vec(op, spec, eps, &v).norm();
    Ok(BallOutcome {
        v: Field::from_vector(op.domain(), v)?,
        energy: e_final,
        gradient_norm,
        iterations,
    })
}

/// Locate the mountain-pass critical point by discrete path deformation.
///
/// A piecewise-linear path from 0 to `T e₁` is relaxed by moving only its
/// maximum-energy interior node along the preconditioned negative gradient,
/// with the step capped in H¹ length; the path is redistributed to uniform
/// H¹ arclength every few sweeps. Periodically — and whenever the max node
/// becomes stationary — a Newton polish is attempted and accepted only if
/// the polished point keeps energy at least `ρ`, which certifies it sits
/// outside the ball branch. Up to six retries halve the step cap.
#[allow(clippy::too_many_arguments)]
pub fn mountain_pass(
    op: &MixedOperator,
    eig: &EigenPair,
    spec: &ProblemSpec,
    eps: f64,
    params: &MountainPassParams,
    warm: Option<&Field>,
    tol: f64,
    n_path: usize,
) -> Result<PassOutcome> {
    require_g2(spec)?;
    if !(eps > 0.0 && tol > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "mountain pass requires eps > 0 and tol > 0, got eps = {eps}, tol = {tol}"
        )));
    }
    if n_path < 5 {
        return Err(SolverError::InvalidParameter(format!(
            "path needs at least 5 nodes, got {n_path}"
        )));
    }
    let chol = full_cholesky(op)?;
    let endpoint = eig.e1.values() * params.t_scale;
    let mut path = initial_path(op, warm, &endpoint, n_path)?;
    let mut energies: Vec<f64> = path.iter().map(|p| energy_vec(op, spec, eps, p)).collect();
    let mut seg_scale = mean_segment(op, &path);

    let g = |t: f64| spec.rhs(t, eps);
    let dg = |t: f64| spec.rhs_derivative(t, eps);

    let mut cap_frac = 1.0_f64;
    let mut total_sweeps = 0usize;
    let max_sweeps = 20_000;
    for retry in 0..6 {
        let mut sweep = 0usize;
        loop {
            sweep += 1;
            total_sweeps += 1;
            if sweep > max_sweeps {
                break;
            }
            let jmax = (1..n_path - 1)
                .max_by(|&a, &b| energies[a].total_cmp(&energies[b]))
                .unwrap();
            let grad = gradient_vec(op, spec, eps, &path[jmax]);
            let gn = grad.norm();

            if gn < tol || sweep.is_multiple_of(POLISH_EVERY) {
                if let Ok((z, _res, _its)) =
                    newton_system(op, &g, &dg, path[jmax].clone(), 1e-12, 100)
                {
                    let ez = energy_vec(op, spec, eps, &z);
                    if ez >= params.rho {
                        let gradient_norm = gradient_vec(op, spec, eps, &z).norm();
                        return Ok(PassOutcome {
                            zeta: Field::from_vector(op.domain(), z)?,
                            energy: ez,
                            gradient_norm,
                            sweeps: total_sweeps,
                            retries: retry,
                        });
                    }
                }
                if gn < tol {
                    // stationary but the polish collapsed below the rim
                    // level; restart with a tighter step cap
                    break;
                }
            }

            let mut d = chol.solve(&(-&grad));
            let dn = h1_semi_of(op.domain(), d.as_slice());
            let cap = cap_frac * seg_scale;
            if dn > cap && dn > 0.0 {
                d *= cap / dn;
            }
            let e0 = energies[jmax];
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha >= 1e-14 {
                let vt = &path[jmax] + &d * alpha;
                let et = energy_vec(op, spec, eps, &vt);
                if et < e0 - 1e-12 * e0.abs() {
                    path[jmax] = vt;
                    energies[jmax] = et;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
            if sweep.is_multiple_of(10) {
                redistribute(op, &mut path);
                for (e, p) in energies.iter_mut().zip(path.iter()) {
                    *e = energy_vec(op, spec, eps, p);
                }
                seg_scale = mean_segment(op, &path);
            }
        }
        cap_frac *= 0.5;
        redistribute(op, &mut path);
        for (e, p) in energies.iter_mut().zip(path.iter()) {
            *e = energy_vec(op, spec, eps, p);
        }
        seg_scale = mean_segment(op, &path);
    }
    Err(SolverError::ContinuationStalled(format!(
        "mountain-pass deformation stalled after {total_sweeps} sweeps; \
         the max-energy node would not polish above the rim level {:.3e}",
        params.rho
    )))
}

/// Solve the singular-plus-power problem along the ε-schedule, continuing
/// the ball minimizer `ν` and mountain-pass point `ζ` jointly with warm
/// starts until both branches are Cauchy in the H¹ seminorm.
///
/// Each step asserts the energy separation `I(ν) < 0 < ρ ≤ I(ζ)`, the
/// positivity barrier `ν, ζ ≥ ξ − 1e−9` where `ξ = A^{−1}(M·min{1, λ/2})`,
/// and a 10%-slack non-increase of the H¹ norms over the last three steps.
/// The final pair is checked for distinctness (`‖ν−ζ‖_∞ ≥ ½‖ζ‖_∞`) and its
/// weak residuals against the unregularized right-hand side are recorded.
#[allow(clippy::too_many_arguments)]
pub fn solve_g2(
    op: &MixedOperator,
    eig: &EigenPair,
    spec: &ProblemSpec,
    schedule: &EpsSchedule,
    seed: u64,
    tol: f64,
    n_path: usize,
) -> Result<TwoSolutions> {
    require_g2(spec)?;
    spec.validate()?;
    schedule.validate()?;
    if !(tol > 0.0) {
        return Err(SolverError::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let params = calibrate_geometry(op, eig, spec, schedule.eps0, seed)?;
    let lambda_below_estimate = spec.lambda < params.lambda_est;

    let meas = op.mass();
    let chol = full_cholesky(op)?;
    let xi = chol.solve(&DVector::from_element(
        op.n(),
        meas * spec.lambda.min(2.0) * 0.5,
    ));
    let barrier_min = xi.min();
    if !(barrier_min > 0.0) {
        return Err(SolverError::BarrierViolated(format!(
            "positivity barrier has nonpositive minimum {barrier_min:.3e}"
        )));
    }

    let mut nu_prev: Option<Field> = None;
    let mut zeta_prev: Option<Field> = None;
    let mut trace: Vec<EpsTraceRow> = Vec::new();
    for eps in schedule.values() {
        let ball = ball_minimizer(op, eig, spec, eps, &params, nu_prev.as_ref(), BALL_GRAD_TOL)?;
        let pass = mountain_pass(
            op,
            eig,
            spec,
            eps,
            &params,
            zeta_prev.as_ref(),
            PASS_GRAD_TOL,
            n_path,
        )?;
        if !(ball.energy < 0.0 && params.rho <= pass.energy) {
            return Err(SolverError::GeometryViolated(format!(
                "energy separation failed at eps = {eps:.3e}: I(ν) = {:.6e}, ρ = {:.6e}, \
                 I(ζ) = {:.6e}",
                ball.energy, params.rho, pass.energy
            )));
        }
        for (name, field) in [("ν", &ball.v), ("ζ", &pass.zeta)] {
            let vals = field.values();
            if let Some(i) = (0..vals.len()).find(|&i| vals[i] < xi[i] - 1e-9) {
                return Err(SolverError::BarrierViolated(format!(
                    "{name} fell below the barrier at node {i} (eps = {eps:.3e}): \
                     {:.6e} < {:.6e}",
                    vals[i], xi[i]
                )));
            }
        }
        let h1_nu = ball.v.h1_semi();
        let h1_zeta = pass.zeta.h1_semi();
        trace.push(EpsTraceRow {
            eps,
            energy_nu: ball.energy,
            energy_zeta: pass.energy,
            h1_nu,
            h1_zeta,
            gradient_nu: ball.gradient_norm,
            gradient_zeta: pass.gradient_norm,
            ball_iterations: ball.iterations,
            pass_sweeps: pass.sweeps,
        });
        let cauchy = match (&nu_prev, &zeta_prev) {
            (Some(pn), Some(pz)) => {
                let dn = h1_semi_of(op.domain(), (ball.v.values() - pn.values()).as_slice());
                let dz = h1_semi_of(op.domain(), (pass.zeta.values() - pz.values()).as_slice());
                dn.max(dz) < tol
            }
            _ => false,
        };
        nu_prev = Some(ball.v);
        zeta_prev = Some(pass.zeta);
        if cauchy {
            break;
        }
    }
    let nu = nu_prev.expect("schedule yields at least one eps");
    let zeta = zeta_prev.expect("schedule yields at least one eps");

    // once the branches have settled, their H¹ norms must stop growing:
    // a drift beyond 10% over the last steps signals a lost uniform bound
    if trace.len() >= 3 {
        let tail = &trace[trace.len() - 3..];
        for w in tail.windows(2) {
            if w[1].h1_nu > 1.1 * w[0].h1_nu || w[1].h1_zeta > 1.1 * w[0].h1_zeta {
                return Err(SolverError::GeometryViolated(format!(
                    "uniform H¹ bound drifting upward between eps = {:.3e} and {:.3e}",
                    w[0].eps, w[1].eps
                )));
            }
        }
    }

    for (name, select) in [
        (
            "ν",
            &(|r: &EpsTraceRow| r.energy_nu) as &dyn Fn(&EpsTraceRow) -> f64,
        ),
        ("ζ", &|r: &EpsTraceRow| r.energy_zeta),
    ] {
        let e: Vec<f64> = trace.iter().map(select).collect();
        if e.len() >= 4 {
            let d: Vec<f64> = e.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            let m = d.len();
            let ok = d[m - 1] <= d[m - 2] * (1.0 + 1e-9) + 1e-14
                && d[m - 2] <= d[m - 3] * (1.0 + 1e-9) + 1e-14;
            if !ok {
                return Err(SolverError::ContinuationStalled(format!(
                    "energy trace of {name} is not Cauchy: last differences {:.3e}, {:.3e}, \
                     {:.3e}",
                    d[m - 3],
                    d[m - 2],
                    d[m - 1]
                )));
            }
        }
    }

    let diff_linf = (nu.values() - zeta.values()).amax();
    let distinctness = diff_linf / zeta.linf();
    if !(distinctness >= 0.5) {
        return Err(SolverError::BranchCollapse(format!(
            "branches merged: ‖ν−ζ‖_∞/‖ζ‖_∞ = {distinctness:.3} at λ = {} (Λ_est = {:.6e})",
            spec.lambda, params.lambda_est
        )));
    }
    let theta_observed = trace
        .iter()
        .map(|r| r.h1_nu.max(r.h1_zeta))
        .fold(0.0, f64::max);

    let weak_residual_nu = weak_residual(op, spec, &nu, 20, seed + 1)?.max_weak_residual;
    let weak_residual_zeta = weak_residual(op, spec, &zeta, 20, seed + 1)?.max_weak_residual;
    let energy_nu = energy_vec(op, spec, 0.0, nu.values());
    let energy_zeta = energy_vec(op, spec, 0.0, zeta.values());

    Ok(TwoSolutions {
        nu,
        zeta,
        energy_nu,
        energy_zeta,
        eps_trace: trace,
        barrier: Field::from_vector(op.domain(), xi)?,
        barrier_min,
        params,
        distinctness,
        theta_observed,
        weak_residual_nu,
        weak_residual_zeta,
        lambda_below_estimate,
    })
}

fn initial_path(
    op: &MixedOperator,
    warm: Option<&Field>,
    endpoint: &DVector<f64>,
    n_path: usize,
) -> Result<Vec<DVector<f64>>> {
    let n = op.n();
    let mut path = Vec::with_capacity(n_path);
    match warm {
        None => {
            for j in 0..n_path {
                let t = j as f64 / (n_path - 1) as f64;
                path.push(endpoint * t);
            }
        }
        Some(mid) => {
            check_domain(op, mid)?;
            let mid = mid.values();
            let split = n_path / 2;
            for j in 0..n_path {
                if j <= split {
                    let t = j as f64 / split as f64;
                    path.push(mid * t);
                } else {
                    let t = (j - split) as f64 / (n_path - 1 - split) as f64;
                    path.push(mid + (endpoint - mid) * t);
                }
            }
        }
    }
    debug_assert_eq!(path.len(), n_path);
    debug_assert!(path.iter().all(|p| p.len() == n));
    Ok(path)
}

fn mean_segment(op: &MixedOperator, path: &[DVector<f64>]) -> f64 {
    let total: f64 = path
        .windows(2)
        .map(|w| h1_semi_of(op.domain(), (&w[1] - &w[0]).as_slice()))
        .sum();
    total / (path.len() - 1) as f64
}

/// Re-space the path nodes to uniform H¹ arclength by linear interpolation
/// along the current polyline; endpoints stay fixed.
fn redistribute(op: &MixedOperator, path: &mut [DVector<f64>]) {
    let m = path.len();
    let mut cum = Vec::with_capacity(m);
    cum.push(0.0);
    for w in path.windows(2) {
        let l = h1_semi_of(op.domain(), (&w[1] - &w[0]).as_slice());
        cum.push(cum.last().unwrap() + l);
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return;
    }
    let old: Vec<DVector<f64>> = path.to_vec();
    for (j, node) in path.iter_mut().enumerate().take(m - 1).skip(1) {
        let target = total * j as f64 / (m - 1) as f64;
        let mut k = match cum.binary_search_by(|c| c.total_cmp(&target)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        k = k.min(m - 2);
        let len = cum[k + 1] - cum[k];
        let t = if len > 0.0 {
            (target - cum[k]) / len
        } else {
            0.0
        };
        *node = &old[k] * (1.0 - t) + &old[k + 1] * t;
    }
}

fn full_cholesky(op: &MixedOperator) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(op.system_matrix()).ok_or_else(|| {
        SolverError::LinearSolveFailed("mixed operator is not positive definite".into())
    })
}

fn require_g2(spec: &ProblemSpec) -> Result<()> {
    if spec.kind != Nonlinearity::SingularPlusPower {
        return Err(SolverError::InvalidParameter(format!(
            "nonlinearity {:?} passed where SingularPlusPower is required",
            spec.kind
        )));
    }
    Ok(())
}

fn check_domain(op: &MixedOperator, f: &Field) -> Result<()> {
    if f.domain() != op.domain() {
        return Err(SolverError::DomainMismatch(
            "field lives on a different grid than the operator".into(),
        ));
    }
    Ok(())
}

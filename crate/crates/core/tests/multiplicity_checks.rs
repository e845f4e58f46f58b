//! Checks of the two-solution machinery: energy/gradient consistency,
//! geometry calibration, ball minimizer, mountain pass, and the joint
//! ε-continuation.

use mixfrac::{
    ball_minimizer, calibrate_geometry, energy, gradient, mountain_pass, noise_fields,
    principal_eigenpair, solve_g2, Domain, EigenPair, EpsSchedule, Field, MixedOperator,
    ProblemSpec, SolverError,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(n: usize) -> (Domain, MixedOperator, EigenPair) {
    let domain = Domain::interval(-1.0, 1.0, n).unwrap();
    let op = MixedOperator::assemble(&domain, 0.5).unwrap();
    let eig = principal_eigenpair(&op, 1e-12, 5000).unwrap();
    (domain, op, eig)
}

fn spec_at(lambda: f64) -> ProblemSpec {
    ProblemSpec::g2(0.5, 0.5, lambda, 2.0)
}

#[test]
fn energy_vanishes_at_zero_and_reduces_to_quadratic_on_negative_fields() {
    let (domain, op, _) = setup(63);
    let spec = spec_at(0.1);
    let zero = Field::zeros(&domain);
    assert_eq!(energy(&op, &spec, 1.0, &zero).unwrap(), 0.0);
    assert_eq!(energy(&op, &spec, 0.0, &zero).unwrap(), 0.0);

    // on nonpositive fields only the quadratic part survives
    let neg = Field::from_fn(&domain, |x| -(1.0 - x[0] * x[0]));
    let e = energy(&op, &spec, 0.5, &neg).unwrap();
    let quad = 0.5 * op.bilinear(&neg, &neg).unwrap();
    assert!((e - quad).abs() <= 1e-14 * quad.abs());
}

#[test]
fn energy_decreases_in_lambda() {
    let (domain, op, _) = setup(63);
    let u = Field::from_fn(&domain, |x| (1.0 - x[0] * x[0]).max(0.0));
    let e_small = energy(&op, &spec_at(0.05), 0.1, &u).unwrap();
    let e_large = energy(&op, &spec_at(0.5), 0.1, &u).unwrap();
    assert!(e_large < e_small);
}

#[test]
fn gradient_matches_directional_finite_differences() {
    let (domain, op, _) = setup(63);
    let spec = spec_at(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &eps in &[1.0, 1e-2] {
        for _ in 0..5 {
            let u = Field::from_fn(&domain, |x| {
                0.5 + 0.3 * (2.0 * x[0]).sin() + rng.gen_range(-0.05..0.05)
            });
            let v = Field::from_fn(&domain, |x| (1.5 * x[0]).cos() + rng.gen_range(-0.1..0.1));
            let g = gradient(&op, &spec, eps, &u).unwrap();
            let directional = g.values().dot(v.values());
            let d = 1e-6 / v.linf().max(1.0);
            let mut up = u.clone();
            up.values_mut().axpy(d, v.values(), 1.0);
            let mut dn = u.clone();
            dn.values_mut().axpy(-d, v.values(), 1.0);
            let fd = (energy(&op, &spec, eps, &up).unwrap()
                - energy(&op, &spec, eps, &dn).unwrap())
                / (2.0 * d);
            let rel = (directional - fd).abs() / directional.abs().max(1e-12);
            assert!(rel <= 1e-6, "eps {eps}: gradient vs FD rel error {rel:.2e}");
        }
    }
}

#[test]
fn calibration_is_deterministic_and_consistent() {
    let (_, op, eig) = setup(63);
    let spec = spec_at(1.0);
    let p1 = calibrate_geometry(&op, &eig, &spec, 1.0, 42).unwrap();
    let p2 = calibrate_geometry(&op, &eig, &spec, 1.0, 42).unwrap();
    assert_eq!(p1.radius, p2.radius);
    assert_eq!(p1.c_theta, p2.c_theta);
    assert_eq!(p1.lambda_est, p2.lambda_est);
    assert!(p1.radius > 0.0 && p1.rho > 0.0 && p1.lambda_est > 0.0);

    // the rim level is consistent with its defining formula
    let r = p1.radius;
    let rho_expected = 0.5 * (r * r / 2.0 - p1.c_theta * r.powf(spec.q + 1.0) / (spec.q + 1.0));
    assert!((p1.rho - rho_expected).abs() <= 1e-14 * p1.rho);
    let meas = op.domain().measure();
    assert!((p1.theta - meas.powf((spec.r - spec.q - 1.0) / spec.r)).abs() <= 1e-15);

    // the endpoint is below level −1 and outside the ball
    let te = Field::from_vector(op.domain(), eig.e1.values() * p1.t_scale).unwrap();
    assert!(energy(&op, &spec, 1.0, &te).unwrap() < -1.0);
    assert!(te.h1_semi() > p1.radius);
}

#[test]
fn random_rim_fields_stay_above_the_rim_level() {
    // the defining property of ρ: every field on the sphere |v|₁ = R has
    // energy at least ρ when the singular term is absent — and keeps a
    // positive margin once λ stays below the calibrated bound
    let (domain, op, eig) = setup(63);
    let spec0 = spec_at(1.0);
    let params = calibrate_geometry(&op, &eig, &spec0, 1.0, 9).unwrap();
    let spec = spec_at(params.lambda_est / 2.0);
    for (k, f) in noise_fields(&domain, 10, 31).into_iter().enumerate() {
        let nf = f.h1_semi();
        let v = Field::from_vector(&domain, f.values() * (params.radius / nf)).unwrap();
        for &eps in &[1.0, 1e-4, 1e-8] {
            let e = energy(&op, &spec, eps, &v).unwrap();
            assert!(
                e >= params.rho,
                "rim field {k} at eps {eps}: energy {e:.6} below rho {:.6}",
                params.rho
            );
        }
    }
}

#[test]
fn ball_minimizer_finds_interior_negative_minimum() {
    let (_, op, eig) = setup(63);
    let spec0 = spec_at(1.0);
    let params = calibrate_geometry(&op, &eig, &spec0, 1.0, 5).unwrap();
    let spec = spec_at(params.lambda_est / 4.0);
    let ball = ball_minimizer(&op, &eig, &spec, 1.0, &params, None, 1e-7).unwrap();
    assert!(ball.energy < 0.0);
    assert!(ball.v.h1_semi() < params.radius - 1e-8);
    assert!(ball.v.min() > 0.0);
    assert!(ball.gradient_norm <= 1e-8);

    // warm start from the converged point returns immediately
    let again = ball_minimizer(&op, &eig, &spec, 1.0, &params, Some(&ball.v), 1e-7).unwrap();
    assert!((again.energy - ball.energy).abs() <= 1e-10 * ball.energy.abs());
}

#[test]
fn mountain_pass_point_sits_above_the_rim_level() {
    let (_, op, eig) = setup(63);
    let spec0 = spec_at(1.0);
    let params = calibrate_geometry(&op, &eig, &spec0, 1.0, 5).unwrap();
    let spec = spec_at(params.lambda_est / 4.0);
    let pass = mountain_pass(&op, &eig, &spec, 1.0, &params, None, 1e-6, 41).unwrap();
    assert!(pass.energy >= params.rho);
    assert!(pass.zeta.h1_semi() > params.radius);
    assert!(pass.gradient_norm <= 1e-9 * 100.0);
    assert!(pass.zeta.min() > 0.0);
}

#[test]
fn two_solutions_certified_along_the_continuation() {
    let (_, op, eig) = setup(63);
    let spec0 = spec_at(1.0);
    let params = calibrate_geometry(&op, &eig, &spec0, 1.0, 12345).unwrap();
    let spec = spec_at(params.lambda_est / 4.0);
    let sched = EpsSchedule::default();
    let two = solve_g2(&op, &eig, &spec, &sched, 12345, 1e-8, 41).unwrap();

    assert!(two.lambda_below_estimate);
    assert!(two.energy_nu < 0.0);
    assert!(two.energy_zeta >= two.params.rho);
    assert!(two.distinctness >= 0.5);
    assert!(two.barrier_min > 0.0);
    for row in &two.eps_trace {
        assert!(
            row.energy_nu < 0.0 && two.params.rho <= row.energy_zeta,
            "separation failed at eps = {}",
            row.eps
        );
    }
    // both branches dominate the barrier at the limit
    let xi = two.barrier.values();
    for i in 0..xi.len() {
        assert!(two.nu.values()[i] >= xi[i] - 1e-9);
        assert!(two.zeta.values()[i] >= xi[i] - 1e-9);
    }
    assert!(two.weak_residual_nu <= 1e-6);
    assert!(two.weak_residual_zeta <= 1e-6);
    // energy traces settle: the last consecutive differences shrink
    let last = &two.eps_trace[two.eps_trace.len() - 3..];
    let d1 = (last[1].energy_zeta - last[0].energy_zeta).abs();
    let d2 = (last[2].energy_zeta - last[1].energy_zeta).abs();
    assert!(d2 <= d1 * (1.0 + 1e-9) + 1e-14);
}

#[test]
fn invalid_calls_are_rejected() {
    let (domain, op, eig) = setup(15);
    let wrong = ProblemSpec::pure_singular(0.5, 0.5);
    let u = Field::zeros(&domain);
    assert!(energy(&op, &wrong, 1.0, &u).is_err());
    assert!(matches!(
        gradient(&op, &spec_at(0.1), 0.0, &u),
        Err(SolverError::InvalidParameter(_))
    ));
    assert!(energy(&op, &spec_at(0.1), -1.0, &u).is_err());
    assert!(calibrate_geometry(&op, &eig, &spec_at(0.1), 0.0, 1).is_err());
}

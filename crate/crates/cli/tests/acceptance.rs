//! Acceptance suite: every shipping criterion as one test with its stated
//! tolerance, printing one pass line per criterion. The fractional-kernel
//! criterion is judged against an independent adaptive quadrature oracle
//! implemented here from scratch (truncated symmetric-difference form with
//! Taylor correction, dyadic panels toward the kinks, closed-form tail),
//! not against the assembly code under test.

use std::fs;
use std::process::Command;

use mixfrac::quadrature::GaussRule;
use mixfrac::{
    bump_fields, calibrate_geometry, dense_eigen_oracle, energy, gradient,
    local_eigenvalue_closed_form, noise_fields, principal_eigenpair, solve_g1, solve_g2,
    solve_pure_singular, weak_residual, Domain, EpsSchedule, Field, HFunction, MixedOperator,
    ProblemSpec,
};

const EIGEN_TOL: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 10_000;

fn interval(n: usize) -> Domain {
    Domain::interval(-1.0, 1.0, n).unwrap()
}

fn probe_index(domain: &Domain, x: f64) -> usize {
    let ax = domain.axes()[0];
    ((x - ax.lo) / ax.h() - 1.0).round() as usize
}

// ---------------------------------------------------------------------------
// independent principal-value quadrature oracle
// ---------------------------------------------------------------------------

/// Dyadic grading of `[p, q]` toward both endpoints, `depth` halvings.
fn panels(p: f64, q: f64, depth: usize) -> Vec<(f64, f64)> {
    let mid = 0.5 * (p + q);
    let len = q - p;
    let mut cuts = vec![p, q];
    for k in 1..depth {
        let step = len * 0.5_f64.powi(k as i32);
        if p + step < mid {
            cuts.push(p + step);
        }
        if q - step > mid {
            cuts.push(q - step);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// `PV ∫_ℝ (u(x) − u(y)) |x − y|^{−1−2s} dy` for compactly supported `u`,
/// smooth near `x`, written as `∫_0^∞ (2u(x) − u(x+z) − u(x−z)) z^{−1−2s} dz`:
/// a Taylor-corrected truncation on `[0, z_t]`, dyadically graded 24-point
/// Gauss–Legendre panels toward every kink of the integrand, and the exact
/// tail `2u(x) Z^{−2s}/(2s)` once `u(x ± z)` vanishes for `z ≥ Z`.
fn pv_fractional_1d(u: &dyn Fn(f64) -> f64, x: f64, s: f64, kinks: &[f64], z_max: f64) -> f64 {
    let rule = GaussRule::legendre(24);
    let zt = 1e-4 * z_max;
    let d = 1e-5 * z_max;
    let upp = (u(x + d) - 2.0 * u(x) + u(x - d)) / (d * d);
    let mut total = -upp * zt.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let g = |z: f64| (2.0 * u(x) - u(x + z) - u(x - z)) * z.powf(-1.0 - 2.0 * s);
    let mut pts = vec![zt, z_max];
    pts.extend(kinks.iter().copied().filter(|&k| zt < k && k < z_max));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    for w in pts.windows(2) {
        for (a, b) in panels(w[0], w[1], 48) {
            if b > a {
                total += rule.integrate(a, b, g);
            }
        }
    }
    total + 2.0 * u(x) * z_max.powf(-2.0 * s) / (2.0 * s)
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

/// Assembly structure and kernel normalization on the 255-node interval:
/// exact symmetry (defect ≤ 1e−12), M-matrix sign pattern, and the strong
/// fractional value of the barrier profile `(1 − x²)₊^s` within 2% of the
/// independent quadrature oracle at three interior probes.
#[test]
fn criterion_1_operator_structure_and_kernel_constant() {
    use std::f64::consts::PI;
    let domain = interval(255);
    let h = domain.axes()[0].h();
    for &s in &[0.25, 0.5, 0.75] {
        let op = MixedOperator::assemble(&domain, s).unwrap();
        let defect = op.symmetry_defect();
        assert!(defect <= 1e-12, "s = {s}: symmetry defect {defect:.3e}");
        let a = op.system_matrix();
        for i in 0..op.n() {
            for j in 0..op.n() {
                if i == j {
                    assert!(a[(i, i)] > 0.0, "s = {s}: diagonal ({i},{i}) not positive");
                } else {
                    assert!(
                        a[(i, j)] <= 0.0,
                        "s = {s}: offdiagonal ({i},{j}) = {} positive",
                        a[(i, j)]
                    );
                }
            }
        }

        let barrier = move |y: f64| (1.0 - y * y).max(0.0).powf(s);
        let w = Field::from_fn(&domain, |x| barrier(x[0]));
        let y = op.apply_fractional(&w).unwrap();
        let exact = PI / (PI * s).sin();
        for &x in &[-0.4375, 0.0, 0.25] {
            let oracle = pv_fractional_1d(
                &barrier,
                x,
                s,
                &[(1.0 - x).abs(), (1.0 + x).abs()],
                1.0 + x.abs(),
            );
            // the oracle itself must reproduce the closed-form constant
            let oracle_rel = (oracle - exact).abs() / exact;
            assert!(
                oracle_rel <= 1e-6,
                "s = {s}, x = {x}: oracle {oracle:.10} vs closed form {exact:.10}"
            );
            let strong = y.values()[probe_index(&domain, x)] / (2.0 * h);
            let rel = (strong - oracle).abs() / oracle.abs();
            assert!(
                rel <= 2e-2,
                "s = {s}, x = {x}: discrete {strong:.6} vs oracle {oracle:.6} (rel {rel:.2e})"
            );
        }
    }
    println!("criterion 1 (operator structure and kernel constant vs quadrature oracle): PASS");
}

/// Eigenvalues on the asymmetric interval (0, 1) with 199 nodes: the local
/// principal eigenvalue matches its closed form to 1e−12, the mixed
/// eigenvalue dominates it, matches a dense solve to 1e−10, and the
/// principal mode is strictly positive.
#[test]
fn criterion_2_eigenvalues_against_closed_form_and_dense_oracle() {
    let domain = Domain::interval(0.0, 1.0, 199).unwrap();
    let op = MixedOperator::assemble(&domain, 0.5).unwrap();

    let local = op.without_fractional();
    let eig_local = principal_eigenpair(&local, EIGEN_TOL, EIGEN_MAX_ITER).unwrap();
    let closed = local_eigenvalue_closed_form(&domain);
    let rel = (eig_local.lambda1 - closed).abs() / closed;
    assert!(
        rel <= 1e-12,
        "local eigenvalue {:.15e} vs closed form {closed:.15e} (rel {rel:.2e})",
        eig_local.lambda1
    );

    // the mixed matrix on this finer grid is stiff enough that its
    // attainable residual floor sits near 3e-12; the Rayleigh quotient is
    // quadratically more accurate, so 1e-11 still supports the 1e-10 gate
    let eig = principal_eigenpair(&op, 1e-11, EIGEN_MAX_ITER).unwrap();
    assert!(
        eig.lambda1 >= closed,
        "adding the fractional part must not lower the principal eigenvalue"
    );
    let dense = dense_eigen_oracle(&op).unwrap();
    let rel_dense = (eig.lambda1 - dense[0]).abs() / dense[0];
    assert!(
        rel_dense <= 1e-10,
        "iterated {:.15e} vs dense {:.15e} (rel {rel_dense:.2e})",
        eig.lambda1,
        dense[0]
    );
    assert!(
        eig.e1.min() > 0.0,
        "principal mode min {:.3e}",
        eig.e1.min()
    );
    println!("criterion 2 (eigenvalues vs closed form and dense oracle): PASS");
}

/// Sandwich certificates across the weighted singular family on 63 nodes:
/// for every multiplier in {0.1, 1, 10}, exponent in {0.25, 0.5, 0.75}, and
/// both weights, the solution is bracketed nodewise by its certified sub-
/// and supersolution, its weak residual stays below 1e−6, and for the
/// unweighted cases the exact scaling identity `u = λ^{1/(1+γ)} v₀` holds
/// to 1e−8 in the max norm.
#[test]
fn criterion_3_sandwich_certificates_across_the_singular_family() {
    let domain = interval(63);
    let op = MixedOperator::assemble(&domain, 0.5).unwrap();
    let eig = principal_eigenpair(&op, 1e-12, EIGEN_MAX_ITER).unwrap();
    // a floor below the default keeps the regularization bias of v0 well
    // under the scaling-identity tolerance
    let schedule = EpsSchedule {
        floor: 1e-10,
        ..EpsSchedule::default()
    };
    let tol = 1e-10;
    for gamma in [0.25, 0.5, 0.75] {
        let pure = solve_pure_singular(&op, gamma, &schedule, tol).unwrap();
        for lambda in [0.1, 1.0, 10.0] {
            for h_fn in [HFunction::One, HFunction::OnePlusT] {
                let spec = ProblemSpec::g1(0.5, gamma, lambda, h_fn);
                let cert = solve_g1(&op, &eig, &spec, &schedule, tol).unwrap();
                let tag = format!("lambda = {lambda}, gamma = {gamma}, h = {h_fn}");

                let u = cert.solution.values();
                let slack = 1e-10 * cert.solution.linf().max(1.0);
                for i in 0..u.len() {
                    assert!(
                        cert.sub.values()[i] <= u[i] + slack
                            && u[i] <= cert.sup.values()[i] + slack,
                        "{tag}: sandwich violated at node {i}"
                    );
                }
                assert!(cert.solution.min() > 0.0, "{tag}: positivity lost");

                let weak = weak_residual(&op, &spec, &cert.solution, 20, 12345).unwrap();
                assert!(
                    weak.max_weak_residual <= 1e-6,
                    "{tag}: weak residual {:.3e} above 1e-6",
                    weak.max_weak_residual
                );

                if h_fn == HFunction::One {
                    let scale = lambda.powf(1.0 / (1.0 + gamma));
                    let diff = (cert.solution.values() - pure.v0.values() * scale)
                        .abs()
                        .max();
                    assert!(
                        diff <= 1e-8,
                        "{tag}: scaling identity off by {diff:.3e} (tolerance 1e-8)"
                    );
                }
            }
        }
    }
    println!("criterion 3 (sandwich certificates and scaling identity across the family): PASS");
}

/// The singular-limit profile is stable under refinement: its max norm
/// drifts by less than 5% across 63-, 127-, and 255-node grids.
#[test]
fn criterion_4_singular_profile_stable_under_refinement() {
    let schedule = EpsSchedule::default();
    let mut peaks = Vec::new();
    for n in [63_usize, 127, 255] {
        let domain = interval(n);
        let op = MixedOperator::assemble(&domain, 0.5).unwrap();
        let sol = solve_pure_singular(&op, 0.5, &schedule, 1e-9).unwrap();
        peaks.push(sol.v0.linf());
    }
    let max = peaks.iter().cloned().fold(f64::MIN, f64::max);
    let min = peaks.iter().cloned().fold(f64::MAX, f64::min);
    let drift = max / min - 1.0;
    assert!(
        drift < 0.05,
        "peak drift {:.3}% across refinements (peaks {peaks:?})",
        100.0 * drift
    );
    println!("criterion 4 (singular profile stable under refinement, drift < 5%): PASS");
}

/// Two distinct solutions on 127 nodes at a quarter of the calibrated
/// multiplier bound: calibration reproduces the frozen reference geometry
/// to 0.1%, every continuation step separates the energies across the rim
/// level, both branches stay above the positivity barrier, and the final
/// pair differs by at least half its size with weak residuals below 1e−6.
#[test]
fn criterion_5_two_distinct_solutions_certified() {
    let domain = interval(127);
    let op = MixedOperator::assemble(&domain, 0.5).unwrap();
    let eig = principal_eigenpair(&op, 1e-12, EIGEN_MAX_ITER).unwrap();
    let schedule = EpsSchedule::default();

    let probe = ProblemSpec::g2(0.5, 0.5, 1.0, 2.0);
    let params = calibrate_geometry(&op, &eig, &probe, schedule.eps0, 12345).unwrap();
    // frozen reference geometry (cross-validated prototype, same seed)
    for (name, got, reference) in [
        ("radius", params.radius, 3.39721),
        ("rim level", params.rho, 1.44263),
        ("multiplier bound", params.lambda_est, 0.291639),
        ("endpoint scale", params.t_scale, 27.1777),
        ("power constant", params.c_theta, 0.220770),
        ("local eigenvalue", params.lambda1_local, 2.467277),
    ] {
        let rel = (got - reference).abs() / reference;
        assert!(
            rel <= 1e-3,
            "{name} = {got:.6} deviates from frozen reference {reference:.6} (rel {rel:.2e})"
        );
    }

    let lambda = 0.25 * params.lambda_est;
    let spec = ProblemSpec::g2(0.5, 0.5, lambda, 2.0);
    let two = solve_g2(&op, &eig, &spec, &schedule, 12345, 1e-8, 41).unwrap();

    for row in &two.eps_trace {
        assert!(
            row.energy_nu < 0.0 && two.params.rho <= row.energy_zeta,
            "energy separation failed at eps = {:.3e}: {} vs rim {} vs {}",
            row.eps,
            row.energy_nu,
            two.params.rho,
            row.energy_zeta
        );
    }
    assert!(two.barrier_min > 0.0);
    for (name, field) in [("minimizer", &two.nu), ("pass point", &two.zeta)] {
        for i in 0..field.len() {
            assert!(
                field.values()[i] >= two.barrier.values()[i] - 1e-9,
                "{name} dips below the positivity barrier at node {i}"
            );
        }
    }
    assert!(
        two.distinctness >= 0.5,
        "distinctness {:.4} below 1/2",
        two.distinctness
    );
    assert!(two.weak_residual_nu <= 1e-6 && two.weak_residual_zeta <= 1e-6);
    println!("criterion 5 (two distinct solutions with certified separation): PASS");
}

/// The analytic energy gradient matches central finite differences to 1e−6
/// relative accuracy over 20 seeded directions at three regularization
/// levels.
#[test]
fn criterion_6_energy_gradient_matches_finite_differences() {
    let domain = interval(63);
    let op = MixedOperator::assemble(&domain, 0.5).unwrap();
    let spec = ProblemSpec::g2(0.5, 0.5, 0.25, 2.0);
    let noise = noise_fields(&domain, 40, 7);
    let mut worst = 0.0_f64;
    for pair in noise.chunks_exact(2) {
        let u = Field::from_vector(&domain, pair[0].values().map(|t| t.abs() + 0.1)).unwrap();
        let v = &pair[1];
        let delta = 1e-6 / v.linf().max(1.0);
        for eps in [1.0, 1e-2, 1e-4] {
            let gd = gradient(&op, &spec, eps, &u)
                .unwrap()
                .values()
                .dot(v.values());
            let up = Field::from_vector(&domain, u.values() + v.values() * delta).unwrap();
            let um = Field::from_vector(&domain, u.values() - v.values() * delta).unwrap();
            let fd = (energy(&op, &spec, eps, &up).unwrap()
                - energy(&op, &spec, eps, &um).unwrap())
                / (2.0 * delta);
            worst = worst.max((gd - fd).abs() / gd.abs().max(1e-12));
        }
    }
    assert!(
        worst <= 1e-6,
        "worst relative gradient error {worst:.3e} above 1e-6"
    );
    println!("criterion 6 (energy gradient vs finite differences, 20 directions): PASS");
}

/// Mountain-pass geometry at half the multiplier bound on 127 nodes: all
/// 50 seeded fields scaled onto the rim keep energy at or above the rim
/// level at every regularization, while the path endpoint drops below −1
/// outside the ball.
#[test]
fn criterion_7_rim_energy_level_and_endpoint_drop() {
    let domain = interval(127);
    let op = MixedOperator::assemble(&domain, 0.5).unwrap();
    let eig = principal_eigenpair(&op, 1e-12, EIGEN_MAX_ITER).unwrap();

    let probe = ProblemSpec::g2(0.5, 0.5, 1.0, 2.0);
    let params = calibrate_geometry(&op, &eig, &probe, 1.0, 12345).unwrap();
    let lambda = 0.5 * params.lambda_est;
    let spec = ProblemSpec::g2(0.5, 0.5, lambda, 2.0);

    let mut fields = bump_fields(&domain, 25, 12345);
    fields.extend(noise_fields(&domain, 25, 12346));
    assert_eq!(fields.len(), 50);
    for (k, f) in fields.iter().enumerate() {
        let h1 = f.h1_semi();
        assert!(h1 > 0.0);
        let rim = Field::from_vector(&domain, f.values() * (params.radius / h1)).unwrap();
        for eps in [1.0, 1e-4, 1e-8] {
            let val = energy(&op, &spec, eps, &rim).unwrap();
            assert!(
                val >= params.rho,
                "field {k}: rim energy {val:.6} below level {:.6} at eps = {eps:.0e}",
                params.rho
            );
        }
    }

    let endpoint = Field::from_vector(&domain, eig.e1.values() * params.t_scale).unwrap();
    assert!(
        endpoint.h1_semi() > params.radius,
        "path endpoint must leave the ball"
    );
    for eps in [1.0, 1e-4, 1e-8] {
        let val = energy(&op, &spec, eps, &endpoint).unwrap();
        assert!(
            val < -1.0,
            "endpoint energy {val:.6} not below -1 at eps = {eps:.0e}"
        );
    }
    println!("criterion 7 (rim energy level and endpoint drop at half the bound): PASS");
}

/// Identical configuration and seed produce byte-identical reports and
/// field files across repeated runs of the binary.
#[test]
fn criterion_8_reports_bytewise_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let args = [
        "g2", "--nx", "63", "--lambda", "auto", "--seed", "12345", "--out",
    ];
    let run = || {
        let status = Command::new(env!("CARGO_BIN_EXE_mixfrac"))
            .args(args)
            .arg(&out_dir)
            .status()
            .expect("binary runs");
        assert!(status.success());
    };
    run();
    let files = ["report.json", "nu.csv", "zeta.csv", "barrier.csv"];
    let first: Vec<Vec<u8>> = files
        .iter()
        .map(|f| fs::read(out_dir.join(f)).unwrap())
        .collect();
    run();
    for (f, before) in files.iter().zip(&first) {
        let after = fs::read(out_dir.join(f)).unwrap();
        assert_eq!(&after, before, "{f} changed between identical runs");
    }
    println!("criterion 8 (byte-identical reports for identical config and seed): PASS");
}

//! One function per subcommand: build the discrete objects from a resolved
//! [`RunConfig`], run the solver, and write the report plus field CSVs into
//! the output directory.

use std::io;
use std::path::{Path, PathBuf};

use mixfrac::operator::CooMatrix;
use mixfrac::{
    calibrate_geometry, energy, gradient, local_eigenvalue_closed_form, noise_fields,
    principal_eigenpair, solve_g1, solve_g2, solve_pure_singular, solve_regularized, weak_residual,
    Domain, EigenPair, Field, MixedOperator, ProblemSpec, SolverError,
};

use crate::config::{LambdaMode, RunConfig};
use crate::report::{
    write_field, write_report, CheckRow, ContinuationRow, EigenReport, G1Report, G2Report, G2Row,
    PureSingularReport, SweepReport, SweepRow, VerifyReport,
};

const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;
const N_TEST_FIELDS: usize = 20;
const SWEEP_MULTIPLIERS: [f64; 7] = [0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0];

/// A failed run: the stage that broke and the message for `failure.json`.
#[derive(Debug)]
pub struct PipelineFailure {
    pub stage: &'static str,
    pub message: String,
}

pub type PipelineResult = Result<PathBuf, PipelineFailure>;

fn fail(stage: &'static str) -> impl Fn(SolverError) -> PipelineFailure {
    move |e| PipelineFailure {
        stage,
        message: e.to_string(),
    }
}

fn fail_io(stage: &'static str) -> impl Fn(io::Error) -> PipelineFailure {
    move |e| PipelineFailure {
        stage,
        message: e.to_string(),
    }
}

/// Dispatch the resolved config to its pipeline.
pub fn run(cfg: RunConfig, dump_matrices: bool) -> PipelineResult {
    match cfg.command.as_str() {
        "eigen" => run_eigen(cfg),
        "pure-singular" => run_pure_singular(cfg),
        "g1" => run_g1(cfg),
        "g2" => run_g2(cfg),
        "sweep-lambda" => run_sweep_lambda(cfg),
        _ => run_verify(cfg, dump_matrices),
    }
}

fn setup(cfg: &RunConfig) -> Result<(Domain, MixedOperator), PipelineFailure> {
    let domain = cfg.domain().map_err(fail("assemble"))?;
    let op = MixedOperator::assemble_with(&domain, cfg.s, cfg.parallelism())
        .map_err(fail("assemble"))?;
    Ok((domain, op))
}

fn eigenpair(op: &MixedOperator) -> Result<EigenPair, PipelineFailure> {
    principal_eigenpair(op, EIGEN_TOL, EIGEN_MAX_ITER).map_err(fail("eigen"))
}

pub fn run_eigen(cfg: RunConfig) -> PipelineResult {
    let (_domain, op) = setup(&cfg)?;
    let eig = eigenpair(&op)?;
    let out = PathBuf::from(&cfg.out);
    write_field(&out, "e1", &eig.e1).map_err(fail_io("report"))?;
    let report = EigenReport {
        lambda1: eig.lambda1,
        lambda2_estimate: eig.lambda2_estimate,
        spectral_gap_ok: eig.gap_ok(),
        iterations: eig.iterations,
        residual: eig.residual,
        e1_min: eig.e1.min(),
        e1_linf: eig.e1.linf(),
        config: cfg,
    };
    write_report(&out, &report).map_err(fail_io("report"))
}

fn continuation_rows(trace: &[mixfrac::ContinuationStep]) -> Vec<ContinuationRow> {
    trace
        .iter()
        .map(|s| ContinuationRow {
            eps: s.eps,
            linf: s.linf,
            h1_diff: s.h1_diff,
            newton_iterations: s.newton_iterations,
        })
        .collect()
}

pub fn run_pure_singular(cfg: RunConfig) -> PipelineResult {
    let (_domain, op) = setup(&cfg)?;
    let sol =
        solve_pure_singular(&op, cfg.gamma, &cfg.schedule(), cfg.tol).map_err(fail("solve"))?;
    let out = PathBuf::from(&cfg.out);
    write_field(&out, "v0", &sol.v0).map_err(fail_io("report"))?;
    let report = PureSingularReport {
        linf: sol.v0.linf(),
        min: sol.v0.min(),
        final_eps: sol.final_eps,
        steps: continuation_rows(&sol.trace),
        reflection_defect: sol.v0.reflection_defect(),
        config: cfg,
    };
    write_report(&out, &report).map_err(fail_io("report"))
}

pub fn run_g1(cfg: RunConfig) -> PipelineResult {
    let (_domain, op) = setup(&cfg)?;
    let eig = eigenpair(&op)?;
    let spec = ProblemSpec::g1(cfg.s, cfg.gamma, cfg.lambda, cfg.h_function());
    let cert = solve_g1(&op, &eig, &spec, &cfg.schedule(), cfg.tol).map_err(fail("solve"))?;
    let weak = weak_residual(&op, &spec, &cert.solution, N_TEST_FIELDS, cfg.seed)
        .map_err(fail("diagnose"))?;
    let out = PathBuf::from(&cfg.out);
    write_field(&out, "solution", &cert.solution).map_err(fail_io("report"))?;
    write_field(&out, "subsolution", &cert.sub).map_err(fail_io("report"))?;
    write_field(&out, "supersolution", &cert.sup).map_err(fail_io("report"))?;
    let report = G1Report {
        lambda1: eig.lambda1,
        a_lambda: cert.a_lambda,
        b_lambda: cert.b_lambda,
        sigma: cert.sigma,
        iterations: cert.iterations,
        residual: cert.residual,
        energy: cert.energy,
        min: cert.solution.min(),
        linf: cert.solution.linf(),
        max_weak_residual: weak.max_weak_residual,
        reflection_defect: cert.solution.reflection_defect(),
        config: cfg,
    };
    write_report(&out, &report).map_err(fail_io("report"))
}

/// Resolve `lambda = auto` to a quarter of the calibrated multiplier bound.
/// The bound does not depend on the multiplier itself, so a placeholder
/// spec with `λ = 1` is sufficient for the calibration.
fn resolve_lambda(
    cfg: &mut RunConfig,
    op: &MixedOperator,
    eig: &EigenPair,
) -> Result<f64, PipelineFailure> {
    let probe = ProblemSpec::g2(cfg.s, cfg.gamma, 1.0, cfg.q).with_r(cfg.r);
    let params =
        calibrate_geometry(op, eig, &probe, cfg.eps0, cfg.seed).map_err(fail("calibrate"))?;
    if cfg.lambda_mode == LambdaMode::Auto {
        cfg.lambda = 0.25 * params.lambda_est;
    }
    Ok(params.lambda_est)
}

fn g2_rows(trace: &[mixfrac::EpsTraceRow]) -> Vec<G2Row> {
    trace
        .iter()
        .map(|r| G2Row {
            eps: r.eps,
            energy_nu: r.energy_nu,
            energy_zeta: r.energy_zeta,
            h1_nu: r.h1_nu,
            h1_zeta: r.h1_zeta,
            gradient_nu: r.gradient_nu,
            gradient_zeta: r.gradient_zeta,
            ball_iterations: r.ball_iterations,
            pass_sweeps: r.pass_sweeps,
        })
        .collect()
}

pub fn run_g2(mut cfg: RunConfig) -> PipelineResult {
    let (_domain, op) = setup(&cfg)?;
    let eig = eigenpair(&op)?;
    let lambda_est = resolve_lambda(&mut cfg, &op, &eig)?;
    let spec = ProblemSpec::g2(cfg.s, cfg.gamma, cfg.lambda, cfg.q).with_r(cfg.r);
    let two = solve_g2(
        &op,
        &eig,
        &spec,
        &cfg.schedule(),
        cfg.seed,
        cfg.tol,
        cfg.n_path,
    )
    .map_err(fail("solve"))?;
    let out = PathBuf::from(&cfg.out);
    write_field(&out, "nu", &two.nu).map_err(fail_io("report"))?;
    write_field(&out, "zeta", &two.zeta).map_err(fail_io("report"))?;
    write_field(&out, "barrier", &two.barrier).map_err(fail_io("report"))?;
    let report = G2Report {
        lambda_est,
        lambda_below_estimate: two.lambda_below_estimate,
        radius: two.params.radius,
        rho: two.params.rho,
        t_scale: two.params.t_scale,
        c_theta: two.params.c_theta,
        theta: two.params.theta,
        lambda1_local: two.params.lambda1_local,
        energy_nu: two.energy_nu,
        energy_zeta: two.energy_zeta,
        distinctness: two.distinctness,
        theta_observed: two.theta_observed,
        barrier_min: two.barrier_min,
        weak_residual_nu: two.weak_residual_nu,
        weak_residual_zeta: two.weak_residual_zeta,
        eps_trace: g2_rows(&two.eps_trace),
        config: cfg,
    };
    write_report(&out, &report).map_err(fail_io("report"))
}

pub fn run_sweep_lambda(mut cfg: RunConfig) -> PipelineResult {
    let (_domain, op) = setup(&cfg)?;
    let eig = eigenpair(&op)?;
    let lambda_est = resolve_lambda(&mut cfg, &op, &eig)?;
    // `auto` sweeps around the calibrated bound itself; an explicit value
    // recenters the grid there.
    let base = if cfg.lambda_mode == LambdaMode::Auto {
        lambda_est
    } else {
        cfg.lambda
    };
    cfg.lambda = base;
    let schedule = cfg.schedule();
    let mut rows = Vec::new();
    let mut empirical: Option<f64> = None;
    for mult in SWEEP_MULTIPLIERS {
        let lambda = mult * base;
        let spec = ProblemSpec::g2(cfg.s, cfg.gamma, lambda, cfg.q).with_r(cfg.r);
        match solve_g2(&op, &eig, &spec, &schedule, cfg.seed, cfg.tol, cfg.n_path) {
            Ok(two) => {
                empirical = Some(empirical.map_or(lambda, |e: f64| e.max(lambda)));
                rows.push(SweepRow {
                    lambda,
                    certified: true,
                    distinctness: Some(two.distinctness),
                    energy_nu: Some(two.energy_nu),
                    energy_zeta: Some(two.energy_zeta),
                    error: None,
                });
            }
            Err(e) => rows.push(SweepRow {
                lambda,
                certified: false,
                distinctness: None,
                energy_nu: None,
                energy_zeta: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let out = PathBuf::from(&cfg.out);
    let report = SweepReport {
        lambda_est,
        rows,
        empirical_lambda: empirical,
        config: cfg,
    };
    write_report(&out, &report).map_err(fail_io("report"))
}

fn check(name: &str, passed: bool, detail: String) -> CheckRow {
    CheckRow {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Self-check battery: operator structure, eigenvalues against the local
/// closed form and a dense solve, the fractional barrier constant, energy
/// gradients against finite differences, and a linear weak residual.
pub fn run_verify(cfg: RunConfig, dump_matrices: bool) -> PipelineResult {
    let (domain, op) = setup(&cfg)?;
    let mut checks = Vec::new();

    let defect = op.symmetry_defect();
    checks.push(check(
        "assembly-symmetry",
        defect <= 1e-12,
        format!("defect {defect:.3e} (bound 1e-12)"),
    ));

    let a = op.system_matrix();
    let n = op.n();
    let mut max_offdiag = f64::NEG_INFINITY;
    let mut min_diag = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                min_diag = min_diag.min(a[(i, j)]);
            } else {
                max_offdiag = max_offdiag.max(a[(i, j)]);
            }
        }
    }
    checks.push(check(
        "m-matrix-signs",
        max_offdiag <= 0.0 && min_diag > 0.0,
        format!("max offdiagonal {max_offdiag:.3e}, min diagonal {min_diag:.3e}"),
    ));

    let local = op.without_fractional();
    let eig_local =
        principal_eigenpair(&local, EIGEN_TOL, EIGEN_MAX_ITER).map_err(fail("eigen"))?;
    let closed = local_eigenvalue_closed_form(&domain);
    let rel = (eig_local.lambda1 - closed).abs() / closed;
    checks.push(check(
        "local-eigenvalue-closed-form",
        rel <= 1e-8,
        format!(
            "iterated {:.12e} vs closed form {closed:.12e} (rel {rel:.3e})",
            eig_local.lambda1
        ),
    ));

    let eig = eigenpair(&op)?;
    checks.push(check(
        "mixed-dominates-local",
        eig.lambda1 >= closed,
        format!("mixed {:.6e} vs local {closed:.6e}", eig.lambda1),
    ));
    checks.push(check(
        "principal-mode-positive",
        eig.e1.min() >= 0.0,
        format!("min value {:.3e}", eig.e1.min()),
    ));
    let norm = (op.mass() * eig.e1.values().norm_squared()).sqrt();
    checks.push(check(
        "principal-mode-normalized",
        (norm - 1.0).abs() <= 1e-10,
        format!("lumped L2 norm {norm:.12}"),
    ));
    checks.push(check(
        "spectral-gap",
        eig.gap_ok(),
        format!(
            "lambda1 {:.6e}, lambda2 estimate {:.6e}",
            eig.lambda1, eig.lambda2_estimate
        ),
    ));

    checks.push(dense_oracle_check(&op, &eig));
    checks.push(barrier_check(&domain, &op));
    checks.push(gradient_fd_check(&domain, &op, &cfg));
    checks.push(linear_weak_residual_check(&domain, &op));

    let out = PathBuf::from(&cfg.out);
    if dump_matrices {
        dump_coo(&out, &op).map_err(fail_io("report"))?;
    }
    let all_passed = checks.iter().all(|c| c.passed);
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.clone())
        .collect();
    let report = VerifyReport {
        checks,
        all_passed,
        config: cfg,
    };
    let path = write_report(&out, &report).map_err(fail_io("report"))?;
    if all_passed {
        Ok(path)
    } else {
        Err(PipelineFailure {
            stage: "verify",
            message: format!("checks failed: {}", failed.join(", ")),
        })
    }
}

fn dense_oracle_check(op: &MixedOperator, eig: &EigenPair) -> CheckRow {
    match mixfrac::dense_eigen_oracle(op) {
        Ok(spectrum) => {
            let rel = (eig.lambda1 - spectrum[0]).abs() / spectrum[0];
            check(
                "dense-eigen-oracle",
                rel <= 1e-8,
                format!(
                    "iterated {:.12e} vs dense {:.12e} (rel {rel:.3e})",
                    eig.lambda1, spectrum[0]
                ),
            )
        }
        Err(SolverError::SizeGuardExceeded { n, guard }) => check(
            "dense-eigen-oracle",
            true,
            format!("skipped: problem size {n} exceeds dense guard {guard}"),
        ),
        Err(e) => check("dense-eigen-oracle", false, e.to_string()),
    }
}

/// Apply the discrete fractional operator to the exact barrier profile
/// `(1 − |ξ|²)₊^s` in coordinates scaled to the unit ball and compare the
/// strong value at an interior probe with `π/sin(πs)` (interval) or
/// `π²/sin(πs)` (square). Anisotropic extents and very coarse grids are
/// skipped: the closed form only covers the isotropic ball.
fn barrier_check(domain: &Domain, op: &MixedOperator) -> CheckRow {
    use std::f64::consts::PI;
    let s = op.s();
    let axes = domain.axes();
    let half: Vec<f64> = axes.iter().map(|ax| 0.5 * ax.length()).collect();
    let center: Vec<f64> = axes.iter().map(|ax| 0.5 * (ax.lo + ax.hi)).collect();
    if axes.iter().any(|ax| ax.n < 31) {
        return check(
            "fractional-barrier-constant",
            true,
            "skipped: grid too coarse to probe the kernel constant".to_string(),
        );
    }
    if domain.dim() == 2 && (half[0] - half[1]).abs() > 1e-12 * half[0].max(half[1]) {
        return check(
            "fractional-barrier-constant",
            true,
            "skipped: anisotropic extents have no closed-form barrier constant".to_string(),
        );
    }
    let scale = half[0];
    let w = Field::from_fn(domain, |x| {
        let mut r2 = 0.0;
        for (k, &c) in center.iter().enumerate() {
            let xi = (x[k] - c) / scale;
            r2 += xi * xi;
        }
        (1.0 - r2).max(0.0).powf(s)
    });
    let y = match op.apply_fractional(&w) {
        Ok(y) => y,
        Err(e) => return check("fractional-barrier-constant", false, e.to_string()),
    };
    // the scaled profile picks up the Jacobian factor scale^{-2s}
    let exact = if domain.dim() == 1 {
        PI / (PI * s).sin()
    } else {
        PI * PI / (PI * s).sin()
    } * scale.powf(-2.0 * s);
    // probe the node nearest the center: strictly inside the inscribed ball
    let idx = nearest_node(domain, &center);
    let strong = y.values()[idx] / (2.0 * domain.cell_measure());
    let rel = (strong - exact).abs() / exact.abs();
    check(
        "fractional-barrier-constant",
        rel <= 5e-2,
        format!("strong value {strong:.6e} vs exact {exact:.6e} (rel {rel:.3e})"),
    )
}

fn nearest_node(domain: &Domain, point: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for i in 0..domain.n_nodes() {
        let x = domain.node_coords(i);
        let d2: f64 = point
            .iter()
            .enumerate()
            .map(|(k, &p)| (x[k] - p) * (x[k] - p))
            .sum();
        if d2 < best.0 {
            best = (d2, i);
        }
    }
    best.1
}

/// Compare `⟨∇I(u), v⟩` with a central finite difference of the energy for
/// seeded strictly positive iterates, across three regularization levels.
fn gradient_fd_check(domain: &Domain, op: &MixedOperator, cfg: &RunConfig) -> CheckRow {
    let spec = ProblemSpec::g2(cfg.s, cfg.gamma, cfg.lambda, cfg.q).with_r(cfg.r);
    let noise = noise_fields(domain, 40, cfg.seed.wrapping_add(17));
    let mut worst = 0.0_f64;
    for pair in noise.chunks_exact(2) {
        let u = Field::from_vector(domain, pair[0].values().map(|t| t.abs() + 0.1))
            .expect("same domain");
        let v = &pair[1];
        let delta = 1e-6 / v.linf().max(1.0);
        for eps in [1.0, 1e-2, 1e-4] {
            let gd = match gradient(op, &spec, eps, &u) {
                Ok(g) => g.values().dot(v.values()),
                Err(e) => return check("gradient-finite-difference", false, e.to_string()),
            };
            let up = Field::from_vector(domain, u.values() + v.values() * delta).unwrap();
            let um = Field::from_vector(domain, u.values() - v.values() * delta).unwrap();
            let fd = match (energy(op, &spec, eps, &up), energy(op, &spec, eps, &um)) {
                (Ok(ep), Ok(em)) => (ep - em) / (2.0 * delta),
                (Err(e), _) | (_, Err(e)) => {
                    return check("gradient-finite-difference", false, e.to_string())
                }
            };
            worst = worst.max((gd - fd).abs() / gd.abs().max(1e-12));
        }
    }
    check(
        "gradient-finite-difference",
        worst <= 1e-6,
        format!("worst relative error {worst:.3e} over 20 directions x 3 regularizations"),
    )
}

/// Solve `Au = M·1` through the Newton driver (one step for a constant
/// right-hand side) and test the weak residual against seeded bumps.
fn linear_weak_residual_check(domain: &Domain, op: &MixedOperator) -> CheckRow {
    let zero = Field::zeros(domain);
    let sol = match solve_regularized(op, |_| 1.0, |_| 0.0, &zero, 1e-12, 50) {
        Ok(s) => s,
        Err(e) => return check("linear-weak-residual", false, e.to_string()),
    };
    let au = match op.apply_mixed(&sol.u) {
        Ok(y) => y,
        Err(e) => return check("linear-weak-residual", false, e.to_string()),
    };
    let meas = op.mass();
    let res = au.values() - Field::constant(domain, meas).values();
    let mut worst = 0.0_f64;
    for phi in mixfrac::bump_fields(domain, N_TEST_FIELDS, 99) {
        let denom = phi.h1_semi();
        if denom > 0.0 {
            worst = worst.max(phi.values().dot(&res).abs() / denom);
        }
    }
    check(
        "linear-weak-residual",
        worst <= 1e-8,
        format!("max normalized weak residual {worst:.3e} over {N_TEST_FIELDS} bump fields"),
    )
}

fn dump_coo(out: &Path, op: &MixedOperator) -> io::Result<()> {
    std::fs::create_dir_all(out)?;
    for (name, which) in [
        ("a_local.coo", CooMatrix::Local),
        ("a_fractional.coo", CooMatrix::Fractional),
    ] {
        let file = std::fs::File::create(out.join(name))?;
        op.write_coo(which, io::BufWriter::new(file))?;
    }
    Ok(())
}

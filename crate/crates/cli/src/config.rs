//! Configuration: command-line flags, optional `key = value` config file,
//! and all-at-once validation into a fully resolved [`RunConfig`] that is
//! echoed verbatim into every report.
//!
//! Precedence: command-line flag > config-file entry > built-in default.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mixfrac::{Domain, EpsSchedule, HFunction, Parallelism};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "mixfrac",
    about = "Solvers for mixed local/nonlocal elliptic equations with singular nonlinearities",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Principal eigenpair of the mixed operator
    Eigen(CommonArgs),
    /// ε-continuation for the parameter-free singular problem
    PureSingular(CommonArgs),
    /// Sub/supersolution sandwich for the weighted singular problem
    G1(CommonArgs),
    /// Ball minimizer plus mountain pass for the singular-plus-power problem
    G2(CommonArgs),
    /// Solve the two-solution problem across a geometric grid of multipliers
    SweepLambda(CommonArgs),
    /// Built-in invariant self-checks of the assembled operators and solvers
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eigen(_) => "eigen",
            Command::PureSingular(_) => "pure-singular",
            Command::G1(_) => "g1",
            Command::G2(_) => "g2",
            Command::SweepLambda(_) => "sweep-lambda",
            Command::Verify(_) => "verify",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Eigen(c)
            | Command::PureSingular(c)
            | Command::G1(c)
            | Command::G2(c)
            | Command::SweepLambda(c) => c,
            Command::Verify(v) => &v.common,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Config file with `key = value` lines; flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spatial dimension (1 or 2)
    #[arg(long)]
    pub dim: Option<usize>,
    /// Left endpoint of the x axis
    #[arg(long, allow_negative_numbers = true)]
    pub xlo: Option<f64>,
    /// Right endpoint of the x axis
    #[arg(long, allow_negative_numbers = true)]
    pub xhi: Option<f64>,
    /// Interior nodes along x
    #[arg(long)]
    pub nx: Option<usize>,
    /// Left endpoint of the y axis (2D)
    #[arg(long, allow_negative_numbers = true)]
    pub ylo: Option<f64>,
    /// Right endpoint of the y axis (2D)
    #[arg(long, allow_negative_numbers = true)]
    pub yhi: Option<f64>,
    /// Interior nodes along y (2D; defaults to nx)
    #[arg(long)]
    pub ny: Option<usize>,
    /// Fractional order in (0, 1)
    #[arg(long)]
    pub s: Option<f64>,
    /// Singularity exponent in (0, 1)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Multiplier on the singular term; a number, or `auto` for a quarter
    /// of the calibrated bound
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Superlinear power (> 1)
    #[arg(long)]
    pub q: Option<f64>,
    /// Embedding exponent (> q + 1; defaults to q + 2)
    #[arg(long)]
    pub r: Option<f64>,
    /// Weight function: one, one-plus-t, or one-plus-log
    #[arg(long)]
    pub h_fn: Option<String>,
    /// Initial regularization
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Geometric decrement of the regularization, in (0, 1)
    #[arg(long)]
    pub eps_ratio: Option<f64>,
    /// Smallest regularization level
    #[arg(long)]
    pub eps_floor: Option<f64>,
    /// Continuation/iteration tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration budget for the inner solvers
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Seed for every randomized component
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of path nodes for the mountain pass
    #[arg(long)]
    pub n_path: Option<usize>,
    /// Disable the data-parallel core
    #[arg(long)]
    pub sequential: bool,
    /// Output directory for report.json and field CSVs
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also dump the assembled matrices in coordinate format
    #[arg(long)]
    pub dump_matrices: bool,
}

/// How the multiplier was specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    Explicit,
    Auto,
}

/// Fully resolved configuration; serialized into every report so a run is
/// reproducible from its output alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub dim: usize,
    pub xlo: f64,
    pub xhi: f64,
    pub nx: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ylo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yhi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    pub s: f64,
    pub gamma: f64,
    /// Resolved multiplier; for `auto` this is filled in by the pipeline
    /// once the calibration is known.
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    pub q: f64,
    pub r: f64,
    pub h_fn: String,
    pub eps0: f64,
    pub eps_ratio: f64,
    pub eps_floor: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub n_path: usize,
    pub sequential: bool,
    pub out: String,
}

/// All validation problems of one resolution attempt.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn parse_file(path: &PathBuf) -> Result<BTreeMap<String, String>, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "{}:{}: expected `key = value`, got `{raw}`",
                path.display(),
                lineno + 1
            ));
        };
        map.insert(
            key.trim().replace('-', "_").to_lowercase(),
            value.trim().to_string(),
        );
    }
    Ok(map)
}

struct Merger<'a> {
    file: BTreeMap<String, String>,
    errors: &'a mut Vec<String>,
}

impl Merger<'_> {
    fn get<T: std::str::FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        if let Some(v) = flag {
            return v;
        }
        if let Some(raw) = self.file.get(key) {
            match raw.parse::<T>() {
                Ok(v) => return v,
                Err(e) => self
                    .errors
                    .push(format!("config key `{key}`: cannot parse `{raw}`: {e}")),
            }
        }
        default
    }

    fn get_opt<T: std::str::FromStr>(&mut self, key: &str, flag: Option<T>) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return flag;
        }
        if let Some(raw) = self.file.get(key) {
            match raw.parse::<T>() {
                Ok(v) => return Some(v),
                Err(e) => self
                    .errors
                    .push(format!("config key `{key}`: cannot parse `{raw}`: {e}")),
            }
        }
        None
    }
}

const KNOWN_KEYS: &[&str] = &[
    "dim",
    "xlo",
    "xhi",
    "nx",
    "ylo",
    "yhi",
    "ny",
    "s",
    "gamma",
    "lambda",
    "q",
    "r",
    "h_fn",
    "eps0",
    "eps_ratio",
    "eps_floor",
    "tol",
    "max_iter",
    "seed",
    "n_path",
    "sequential",
    "out",
];

/// Merge flags, config file, and defaults, then validate every field;
/// failures report all problems at once.
pub fn resolve(command: &str, args: &CommonArgs) -> Result<RunConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let file = match &args.config {
        Some(path) => match parse_file(path) {
            Ok(map) => map,
            Err(e) => {
                return Err(ConfigErrors(vec![e]));
            }
        },
        None => BTreeMap::new(),
    };
    for key in file.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errors.push(format!("config key `{key}` is not recognized"));
        }
    }
    let mut m = Merger {
        file,
        errors: &mut errors,
    };

    let dim = m.get("dim", args.dim, 1);
    let xlo = m.get("xlo", args.xlo, -1.0);
    let xhi = m.get("xhi", args.xhi, 1.0);
    let nx = m.get("nx", args.nx, 127);
    let ylo = m.get_opt("ylo", args.ylo);
    let yhi = m.get_opt("yhi", args.yhi);
    let ny = m.get_opt("ny", args.ny);
    let s = m.get("s", args.s, 0.5);
    let gamma = m.get("gamma", args.gamma, 0.5);
    let lambda_raw = m.get("lambda", args.lambda.clone(), "1".to_string());
    let q = m.get("q", args.q, 2.0);
    let r = m.get_opt("r", args.r);
    let h_fn = m.get("h_fn", args.h_fn.clone(), "one".to_string());
    let eps0 = m.get("eps0", args.eps0, 1.0);
    let eps_ratio = m.get("eps_ratio", args.eps_ratio, 0.5);
    let eps_floor = m.get("eps_floor", args.eps_floor, 1e-8);
    let tol = m.get("tol", args.tol, 1e-9);
    let max_iter = m.get("max_iter", args.max_iter, 200);
    let seed = m.get("seed", args.seed, 12345);
    let n_path = m.get("n_path", args.n_path, 41);
    let sequential = if args.sequential {
        true
    } else {
        m.get("sequential", None::<bool>, false)
    };
    let out = m.get(
        "out",
        args.out.clone().map(|p| p.display().to_string()),
        "out".to_string(),
    );

    // range validation, collecting every violation
    if dim != 1 && dim != 2 {
        errors.push(format!("dim = {dim}: admissible values are 1 and 2"));
    }
    if !(xhi > xlo) || !xlo.is_finite() || !xhi.is_finite() {
        errors.push(format!(
            "x extent [{xlo}, {xhi}] must be finite with xhi > xlo"
        ));
    }
    if nx < 3 {
        errors.push(format!("nx = {nx}: need at least 3 interior nodes"));
    }
    let (ylo, yhi, ny) = if dim == 2 {
        let ylo = ylo.unwrap_or(-1.0);
        let yhi = yhi.unwrap_or(1.0);
        let ny = ny.unwrap_or(nx);
        if !(yhi > ylo) || !ylo.is_finite() || !yhi.is_finite() {
            errors.push(format!(
                "y extent [{ylo}, {yhi}] must be finite with yhi > ylo"
            ));
        }
        if ny < 3 {
            errors.push(format!("ny = {ny}: need at least 3 interior nodes"));
        }
        (Some(ylo), Some(yhi), Some(ny))
    } else {
        (None, None, None)
    };
    if !(s > 0.0 && s < 1.0) {
        errors.push(format!("s = {s}: admissible range is (0, 1)"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        errors.push(format!("gamma = {gamma}: admissible range is (0, 1)"));
    }
    let (lambda, lambda_mode) = match lambda_raw.as_str() {
        "auto" => {
            if !matches!(command, "g2" | "sweep-lambda") {
                errors.push(format!(
                    "lambda = auto is only meaningful for g2 and sweep-lambda, not {command}"
                ));
            }
            (f64::NAN, LambdaMode::Auto)
        }
        other => match other.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => (v, LambdaMode::Explicit),
            Ok(v) => {
                errors.push(format!("lambda = {v}: must be positive and finite"));
                (f64::NAN, LambdaMode::Explicit)
            }
            Err(_) => {
                errors.push(format!("lambda = `{other}`: expected a number or `auto`"));
                (f64::NAN, LambdaMode::Explicit)
            }
        },
    };
    if !(q > 1.0) {
        errors.push(format!("q = {q}: must exceed 1"));
    }
    let r = r.unwrap_or(q + 2.0);
    if !(r > q + 1.0) {
        errors.push(format!("r = {r}: must exceed q + 1 = {}", q + 1.0));
    }
    if h_fn.parse::<HFunction>().is_err() {
        errors.push(format!(
            "h_fn = `{h_fn}`: expected one, one-plus-t, or one-plus-log"
        ));
    }
    if !(eps0 > 0.0 && eps0.is_finite()) {
        errors.push(format!("eps0 = {eps0}: must be positive and finite"));
    }
    if !(eps_ratio > 0.0 && eps_ratio < 1.0) {
        errors.push(format!(
            "eps_ratio = {eps_ratio}: admissible range is (0, 1)"
        ));
    }
    if !(eps_floor > 0.0 && eps_floor <= eps0) {
        errors.push(format!("eps_floor = {eps_floor}: must lie in (0, eps0]"));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        errors.push(format!("tol = {tol}: must be positive and finite"));
    }
    if max_iter == 0 {
        errors.push("max_iter = 0: need at least one iteration".to_string());
    }
    if n_path < 5 {
        errors.push(format!("n_path = {n_path}: need at least 5 path nodes"));
    }

    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(RunConfig {
        command: command.to_string(),
        dim,
        xlo,
        xhi,
        nx,
        ylo,
        yhi,
        ny,
        s,
        gamma,
        lambda,
        lambda_mode,
        q,
        r,
        h_fn,
        eps0,
        eps_ratio,
        eps_floor,
        tol,
        max_iter,
        seed,
        n_path,
        sequential,
        out,
    })
}

impl RunConfig {
    pub fn domain(&self) -> mixfrac::Result<Domain> {
        match self.dim {
            1 => Domain::interval(self.xlo, self.xhi, self.nx),
            _ => Domain::rectangle(
                (self.xlo, self.xhi, self.nx),
                (
                    self.ylo.unwrap_or(-1.0),
                    self.yhi.unwrap_or(1.0),
                    self.ny.unwrap_or(self.nx),
                ),
            ),
        }
    }

    pub fn schedule(&self) -> EpsSchedule {
        EpsSchedule {
            eps0: self.eps0,
            ratio: self.eps_ratio,
            floor: self.eps_floor,
        }
    }

    pub fn parallelism(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::default()
        }
    }

    pub fn h_function(&self) -> HFunction {
        self.h_fn.parse().expect("validated at resolution")
    }
}

//! Deterministic report serialization: one `report.json` per run with a
//! fixed field order and no timestamps, field CSVs with full-precision
//! values, and a uniform failure document.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mixfrac::Field;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Serialize)]
pub struct EigenReport {
    pub config: RunConfig,
    pub lambda1: f64,
    pub lambda2_estimate: f64,
    pub spectral_gap_ok: bool,
    pub iterations: usize,
    pub residual: f64,
    pub e1_min: f64,
    pub e1_linf: f64,
}

#[derive(Serialize)]
pub struct ContinuationRow {
    pub eps: f64,
    pub linf: f64,
    pub h1_diff: Option<f64>,
    pub newton_iterations: usize,
}

#[derive(Serialize)]
pub struct PureSingularReport {
    pub config: RunConfig,
    pub linf: f64,
    pub min: f64,
    pub final_eps: f64,
    pub steps: Vec<ContinuationRow>,
    pub reflection_defect: f64,
}

#[derive(Serialize)]
pub struct G1Report {
    pub config: RunConfig,
    pub lambda1: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub sigma: f64,
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
    pub min: f64,
    pub linf: f64,
    pub max_weak_residual: f64,
    pub reflection_defect: f64,
}

#[derive(Serialize)]
pub struct G2Row {
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

#[derive(Serialize)]
pub struct G2Report {
    pub config: RunConfig,
    pub lambda_est: f64,
    pub lambda_below_estimate: bool,
    pub radius: f64,
    pub rho: f64,
    pub t_scale: f64,
    pub c_theta: f64,
    pub theta: f64,
    pub lambda1_local: f64,
    pub energy_nu: f64,
    pub energy_zeta: f64,
    pub distinctness: f64,
    pub theta_observed: f64,
    pub barrier_min: f64,
    pub weak_residual_nu: f64,
    pub weak_residual_zeta: f64,
    pub eps_trace: Vec<G2Row>,
}

#[derive(Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub certified: bool,
    pub distinctness: Option<f64>,
    pub energy_nu: Option<f64>,
    pub energy_zeta: Option<f64>,
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub lambda_est: f64,
    pub rows: Vec<SweepRow>,
    /// Largest multiplier at which two distinct solutions were certified.
    pub empirical_lambda: Option<f64>,
}

#[derive(Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub checks: Vec<CheckRow>,
    pub all_passed: bool,
}

#[derive(Serialize)]
pub struct FailureReport<'a> {
    pub stage: &'a str,
    pub message: String,
    pub data: &'a RunConfig,
}

/// Write `report.json` into the output directory.
pub fn write_report<T: Serialize>(out_dir: &Path, report: &T) -> io::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Write one field as `<name>.csv` with full-precision values.
pub fn write_field(out_dir: &Path, name: &str, field: &Field) -> io::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{name}.csv"));
    let file = fs::File::create(&path)?;
    field.write_csv(io::BufWriter::new(file))?;
    Ok(path)
}

/// Write `failure.json` describing an aborted run.
pub fn write_failure(out_dir: &Path, failure: &FailureReport) -> io::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("failure.json");
    let mut text = serde_json::to_string_pretty(failure).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

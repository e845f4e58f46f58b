//! Problem data: nonlinearity families, parameter validation, and the
//! ε-regularization schedule shared by the continuation solvers.
//!
//! Three right-hand-side families are supported, all singular at the origin:
//! the parameter-free `t^{−γ}`, the weighted `λ h(t) t^{−γ}`, and the
//! combined `λ t^{−γ} + t^q`. Regularized variants replace `t^{−γ}` with
//! `(t⁺ + ε)^{−γ}` so Newton's method sees a C¹ function on all of ℝ.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SolverError};

/// Built-in bounded weight functions `h(t)` for the weighted singular
/// right-hand side. All are positive and nondecreasing on `t ≥ 0` with
/// `h(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HFunction {
    /// `h(t) = 1`.
    One,
    /// `h(t) = 1 + t`.
    OnePlusT,
    /// `h(t) = 1 + log(1 + t)`.
    OnePlusLog,
}

impl HFunction {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            HFunction::One => 1.0,
            HFunction::OnePlusT => 1.0 + t,
            HFunction::OnePlusLog => 1.0 + (1.0 + t).ln(),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            HFunction::One => 0.0,
            HFunction::OnePlusT => 1.0,
            HFunction::OnePlusLog => 1.0 / (1.0 + t),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HFunction::One => "one",
            HFunction::OnePlusT => "one-plus-t",
            HFunction::OnePlusLog => "one-plus-log",
        }
    }
}

impl fmt::Display for HFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HFunction {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(HFunction::One),
            "one-plus-t" => Ok(HFunction::OnePlusT),
            "one-plus-log" => Ok(HFunction::OnePlusLog),
            other => Err(SolverError::InvalidParameter(format!(
                "unknown weight function `{other}`; expected one, one-plus-t, or one-plus-log"
            ))),
        }
    }
}

/// Which right-hand-side family a [`ProblemSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// `g(t) = t^{−γ}`, parameter-free.
    PureSingular,
    /// `g(t) = λ h(t) t^{−γ}`.
    Singular,
    /// `g(t) = λ t^{−γ} + t^q`.
    SingularPlusPower,
}

/// Parameters of one problem instance. Fields irrelevant to the selected
/// [`Nonlinearity`] keep their defaults and are ignored.
#[derive(Debug, Clone, Copy)]
pub struct ProblemSpec {
    pub kind: Nonlinearity,
    /// Fractional order `s ∈ (0, 1)`.
    pub s: f64,
    /// Singularity exponent `γ ∈ (0, 1)`.
    pub gamma: f64,
    /// Multiplier on the singular part.
    pub lambda: f64,
    /// Superlinear power `q > 1` (combined family only).
    pub q: f64,
    /// Embedding exponent `r > q + 1` used by the geometry calibration.
    pub r: f64,
    /// Weight function (weighted family only).
    pub h_fn: HFunction,
}

impl ProblemSpec {
    pub fn pure_singular(s: f64, gamma: f64) -> Self {
        ProblemSpec {
            kind: Nonlinearity::PureSingular,
            s,
            gamma,
            lambda: 1.0,
            q: 2.0,
            r: 4.0,
            h_fn: HFunction::One,
        }
    }

    pub fn g1(s: f64, gamma: f64, lambda: f64, h_fn: HFunction) -> Self {
        ProblemSpec {
            kind: Nonlinearity::Singular,
            s,
            gamma,
            lambda,
            q: 2.0,
            r: 4.0,
            h_fn,
        }
    }

    /// Combined singular-plus-power instance with the default embedding
    /// exponent `r = q + 2`.
    pub fn g2(s: f64, gamma: f64, lambda: f64, q: f64) -> Self {
        ProblemSpec {
            kind: Nonlinearity::SingularPlusPower,
            s,
            gamma,
            lambda,
            q,
            r: q + 2.0,
            h_fn: HFunction::One,
        }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    /// Validate every parameter range at once; the message lists all
    /// violations.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.s > 0.0 && self.s < 1.0) {
            errors.push(format!("s = {} outside (0, 1)", self.s));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            errors.push(format!("gamma = {} outside (0, 1)", self.gamma));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            errors.push(format!(
                "lambda = {} must be positive and finite",
                self.lambda
            ));
        }
        if self.kind == Nonlinearity::SingularPlusPower {
            if !(self.q > 1.0 && self.q.is_finite()) {
                errors.push(format!("q = {} must exceed 1", self.q));
            }
            if !(self.r > self.q + 1.0 && self.r.is_finite()) {
                errors.push(format!(
                    "r = {} must exceed q + 1 = {}",
                    self.r,
                    self.q + 1.0
                ));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SolverError::InvalidParameter(errors.join("; ")))
        }
    }

    /// Regularized right-hand side `g_ε(t)`; `ε = 0` gives the singular
    /// limit, defined only for `t > 0`.
    pub fn rhs(&self, t: f64, eps: f64) -> f64 {
        let tp = t.max(0.0);
        let sing = (tp + eps).powf(-self.gamma);
        match self.kind {
            Nonlinearity::PureSingular => sing,
            Nonlinearity::Singular => self.lambda * self.h_fn.eval(tp) * sing,
            Nonlinearity::SingularPlusPower => self.lambda * sing + tp.powf(self.q),
        }
    }

    /// Derivative of [`ProblemSpec::rhs`] in `t`; zero on `t ≤ 0` where the
    /// positive-part truncation is flat.
    pub fn rhs_derivative(&self, t: f64, eps: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let sing = (t + eps).powf(-self.gamma);
        let dsing = -self.gamma * (t + eps).powf(-self.gamma - 1.0);
        match self.kind {
            Nonlinearity::PureSingular => dsing,
            Nonlinearity::Singular => {
                self.lambda * (self.h_fn.derivative(t) * sing + self.h_fn.eval(t) * dsing)
            }
            Nonlinearity::SingularPlusPower => self.lambda * dsing + self.q * t.powf(self.q - 1.0),
        }
    }
}

/// Geometric ε-continuation schedule `ε_k = eps0·ratio^k`, stopping at the
/// first value at or below `floor`.
#[derive(Debug, Clone, Copy)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub ratio: f64,
    pub floor: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule {
            eps0: 1.0,
            ratio: 0.5,
            floor: 1e-8,
        }
    }
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            errors.push(format!("eps0 = {} must be positive and finite", self.eps0));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            errors.push(format!("eps_ratio = {} outside (0, 1)", self.ratio));
        }
        if !(self.floor > 0.0 && self.floor <= self.eps0) {
            errors.push(format!(
                "eps_floor = {} must lie in (0, eps0 = {}]",
                self.floor, self.eps0
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SolverError::InvalidParameter(errors.join("; ")))
        }
    }

    /// The full decreasing schedule, inclusive of the first term ≤ `floor`.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut eps = self.eps0;
        loop {
            out.push(eps);
            if eps <= self.floor {
                break;
            }
            eps *= self.ratio;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_defaults_reach_floor() {
        let sched = EpsSchedule::default();
        let vals = sched.values();
        assert_eq!(vals.len(), 28);
        assert_eq!(vals[0], 1.0);
        assert!(*vals.last().unwrap() <= 1e-8);
        for pair in vals.windows(2) {
            assert!(pair[1] < pair[0]);
        }
    }

    #[test]
    fn h_function_roundtrip() {
        for h in [HFunction::One, HFunction::OnePlusT, HFunction::OnePlusLog] {
            assert_eq!(h.name().parse::<HFunction>().unwrap(), h);
        }
        assert!("cubic".parse::<HFunction>().is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let spec = ProblemSpec::g2(1.5, 2.0, -1.0, 0.5);
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("s = 1.5"));
        assert!(err.contains("gamma = 2"));
        assert!(err.contains("lambda = -1"));
        assert!(err.contains("q = 0.5"));
    }

    #[test]
    fn rhs_matches_derivative_by_finite_differences() {
        let spec = ProblemSpec::g2(0.5, 0.5, 2.0, 2.0);
        let eps = 1e-2;
        for &t in &[0.3, 1.0, 2.5] {
            let d = 1e-6;
            let fd = (spec.rhs(t + d, eps) - spec.rhs(t - d, eps)) / (2.0 * d);
            let an = spec.rhs_derivative(t, eps);
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0));
        }
    }
}

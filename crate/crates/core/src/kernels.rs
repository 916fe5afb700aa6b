//! Excitation kernels μ(t).
//!
//! Two decaying families are supported, plus the zero kernel that turns the
//! Hawkes process into a homogeneous Poisson process:
//!
//! ```text
//! Exponential  μ(t) = α·exp(−β t)
//! PowerLaw     μ(t) = k / (c + t)^p
//! Zero         μ(t) = 0
//! ```
//!
//! Every limit result downstream only needs the branching ratio
//! μ̂ = ∫₀^∞ μ(s) ds and the finiteness of the first moment ∫₀^∞ s·μ(s) ds.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    Exponential { alpha: f64, beta: f64 },
    PowerLaw { k: f64, c: f64, p: f64 },
    Zero,
}

/// Stationarity diagnostics for a kernel; callers decide what to do with them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityDiagnostics {
    /// Branching ratio; `+inf` when the integral diverges.
    pub mu_hat: f64,
    pub first_moment_finite: bool,
    pub stationary: bool,
}

impl Kernel {
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        let k = Kernel::Exponential { alpha, beta };
        k.validate()?;
        Ok(k)
    }

    pub fn power_law(k: f64, c: f64, p: f64) -> Result<Self> {
        let kern = Kernel::PowerLaw { k, c, p };
        kern.validate()?;
        Ok(kern)
    }

    /// Structural validity: finite parameters, non-negative amplitudes,
    /// strictly positive decay/offset/exponent.
    pub fn validate(&self) -> Result<()> {
        self.violations().into_iter().next().map_or(Ok(()), |(field, msg)| {
            Err(LabError::Validation(format!("kernel.{field}: {msg}")))
        })
    }

    /// All structural violations as `(field, message)` pairs.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut check = |name: &'static str, v: f64, strict: bool| {
            if !v.is_finite() {
                out.push((name, format!("must be finite, got {v}")));
            } else if strict && v <= 0.0 {
                out.push((name, format!("must be > 0, got {v}")));
            } else if !strict && v < 0.0 {
                out.push((name, format!("must be >= 0, got {v}")));
            }
        };
        match *self {
            Kernel::Exponential { alpha, beta } => {
                check("alpha", alpha, false);
                check("beta", beta, true);
            }
            Kernel::PowerLaw { k, c, p } => {
                check("k", k, false);
                check("c", c, true);
                check("p", p, true);
            }
            Kernel::Zero => {}
        }
        out
    }

    /// μ(dt). Negative elapsed time is a domain error.
    pub fn eval(&self, dt: f64) -> Result<f64> {
        if !(dt >= 0.0) {
            return Err(LabError::Domain(format!(
                "kernel evaluated at negative elapsed time {dt}"
            )));
        }
        Ok(self.eval_unchecked(dt))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, dt: f64) -> f64 {
        match *self {
            Kernel::Exponential { alpha, beta } => alpha * (-beta * dt).exp(),
            Kernel::PowerLaw { k, c, p } => k / (c + dt).powf(p),
            Kernel::Zero => 0.0,
        }
    }

    /// ∫₀^dt μ(s) ds, finite for every valid kernel and finite `dt`.
    #[inline]
    pub(crate) fn integral_to(&self, dt: f64) -> f64 {
        match *self {
            Kernel::Exponential { alpha, beta } => alpha / beta * (-(-beta * dt).exp_m1()),
            Kernel::PowerLaw { k, c, p } => {
                if (p - 1.0).abs() < 1e-12 {
                    k * ((c + dt) / c).ln()
                } else {
                    k / (p - 1.0) * (c.powf(1.0 - p) - (c + dt).powf(1.0 - p))
                }
            }
            Kernel::Zero => 0.0,
        }
    }

    /// Branching ratio μ̂ = ∫₀^∞ μ(s) ds.
    pub fn branching_ratio(&self) -> Result<f64> {
        match *self {
            Kernel::Exponential { alpha, beta } => Ok(alpha / beta),
            Kernel::PowerLaw { k, c, p } => {
                if p <= 1.0 {
                    Err(LabError::Divergent(format!(
                        "power-law kernel integral diverges for p = {p} <= 1"
                    )))
                } else {
                    Ok(k * c.powf(1.0 - p) / (p - 1.0))
                }
            }
            Kernel::Zero => Ok(0.0),
        }
    }

    /// ∫₀^∞ s·μ(s) ds, or `None` when it diverges.
    pub fn first_moment(&self) -> Option<f64> {
        match *self {
            Kernel::Exponential { alpha, beta } => Some(alpha / (beta * beta)),
            Kernel::PowerLaw { k, c, p } => {
                (p > 2.0).then(|| k * c.powf(2.0 - p) / ((p - 1.0) * (p - 2.0)))
            }
            Kernel::Zero => Some(0.0),
        }
    }

    pub fn stationarity(&self) -> StationarityDiagnostics {
        let mu_hat = self.branching_ratio().unwrap_or(f64::INFINITY);
        StationarityDiagnostics {
            mu_hat,
            first_moment_finite: self.first_moment().is_some(),
            stationary: (0.0..1.0).contains(&mu_hat),
        }
    }

    /// Preconditions shared by every LLN/FCLT result: μ̂ < 1 and a finite
    /// first moment.
    pub fn require_fclt_conforming(&self) -> Result<f64> {
        let d = self.stationarity();
        if !d.stationary {
            return Err(LabError::NonStationary(format!(
                "branching ratio {} is not below 1",
                d.mu_hat
            )));
        }
        if !d.first_moment_finite {
            return Err(LabError::FcltPrecondition(
                "kernel first moment is infinite (power law needs p > 2)".into(),
            ));
        }
        Ok(d.mu_hat)
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Kernel::Zero => true,
            Kernel::Exponential { alpha, .. } => alpha == 0.0,
            Kernel::PowerLaw { k, .. } => k == 0.0,
        }
    }
}

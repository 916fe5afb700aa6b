//! Monte Carlo verification of the LLN and FCLT predictions.
//!
//! Paths are simulated independently (path `i` uses the streams of
//! `(seed, i)`), collected in path order, and reduced sequentially, so a
//! report is bit-identical for every worker count.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::exec::Execution;
use crate::hawkes::{simulate_with, Background, HawkesSpec};
use crate::limits::{diffusion_limit, DiffusionLimit, RateBudget};
use crate::price::{terminal_values, PriceModelSpec};
use crate::rng::{splitmix64, PathStreams};
use crate::stats::{ks_test, normal_cdf, Moments};

/// Fewer paths than this are rejected.
pub const MIN_PATHS: usize = 30;
/// Absolute bound on |Z| when the limit variance is zero.
pub const DEGENERATE_Z_TOL: f64 = 1e-9;

/// Pass rule: |empirical − theoretical| ≤ max(se_multiplier·SE, relative·|theoretical|).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub se_multiplier: f64,
    pub relative: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { se_multiplier: 3.0, relative: 0.05 }
    }
}

impl Tolerance {
    pub fn allowed(&self, theoretical: f64, se: f64) -> f64 {
        (self.se_multiplier * se).max(self.relative * theoretical.abs())
    }

    pub fn passes(&self, empirical: f64, theoretical: f64, se: f64) -> bool {
        (empirical - theoretical).abs() <= self.allowed(theoretical, se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub statistic: String,
    pub theoretical: f64,
    pub empirical: f64,
    pub standard_error: f64,
    pub n_paths: usize,
    pub n: f64,
    pub t: f64,
    pub pass: bool,
    pub tolerance: Tolerance,
    /// Mean of N(nt)/n across paths.
    pub mean_scaled_count: f64,
    /// Advisory normality check of Z (FCLT only).
    pub ks_statistic: Option<f64>,
    pub ks_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub report: McReport,
    pub limit: DiffusionLimit,
    /// Per-path statistic: S_{nt}/n for the LLN, Z for the FCLT.
    pub samples: Vec<f64>,
}

/// Parameters shared by the verification runs.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyParams {
    pub n: f64,
    pub t: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub execution: Execution,
    pub tolerance: Tolerance,
    /// Budget for nonlinear event rates.
    pub rate_budget: Option<RateBudget>,
}

impl VerifyParams {
    pub fn new(n: f64, t: f64, n_paths: usize, seed: u64) -> Self {
        VerifyParams {
            n,
            t,
            n_paths,
            seed,
            execution: Execution::default(),
            tolerance: Tolerance::default(),
            rate_budget: None,
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn check(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(LabError::InsufficientData(format!(
                "{} paths requested, at least {MIN_PATHS} required",
                self.n_paths
            )));
        }
        if !(self.n > 0.0) || !(self.t > 0.0) || !(self.n * self.t).is_finite() {
            return Err(LabError::Domain(format!("need n > 0 and t > 0, got n={}, t={}", self.n, self.t)));
        }
        Ok(())
    }
}

/// (S_{nt} − S_0, N(nt)) for every path at every checkpoint in `ts` (scaled by n).
fn simulate_terminals(model: &PriceModelSpec, params: &VerifyParams, ts: &[f64]) -> Result<Vec<Vec<(f64, usize)>>> {
    let pi = model.marks.stationary()?.pi;
    let checkpoints: Vec<f64> = ts.iter().map(|t| params.n * t).collect();
    let horizon = checkpoints.iter().copied().fold(0.0, f64::max);
    params.execution.map_indexed(params.n_paths, |i| {
        let mut s = PathStreams::new(params.seed, i as u64);
        terminal_values(model, &pi, horizon, &checkpoints, &mut s.events, &mut s.regimes, &mut s.marks)
    })
}

fn limit_for(model: &PriceModelSpec, params: &VerifyParams) -> Result<DiffusionLimit> {
    let mut budget = params.rate_budget.unwrap_or_default();
    budget.execution = params.execution;
    diffusion_limit(model, Some(&budget))
}

/// Empirical mean of (S_{nt} − S_0)/n against â*·ρ·t.
pub fn verify_lln(model: &PriceModelSpec, params: &VerifyParams) -> Result<McOutcome> {
    params.check()?;
    let limit = limit_for(model, params)?;
    let terminals = simulate_terminals(model, params, &[params.t])?;
    let samples: Vec<f64> = terminals.iter().map(|v| v[0].0 / params.n).collect();
    let counts: Vec<f64> = terminals.iter().map(|v| v[0].1 as f64 / params.n).collect();
    let m = Moments::of(&samples);
    let se = m.std_error_of_mean();
    let theoretical = limit.lln_drift(params.t);
    let report = McReport {
        statistic: "lln_mean".into(),
        theoretical,
        empirical: m.mean,
        standard_error: se,
        n_paths: params.n_paths,
        n: params.n,
        t: params.t,
        pass: params.tolerance.passes(m.mean, theoretical, se),
        tolerance: params.tolerance,
        mean_scaled_count: Moments::of(&counts).mean,
        ks_statistic: None,
        ks_p_value: None,
    };
    Ok(McOutcome { report, limit, samples })
}

/// Empirical covariance of Z at two grid times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceCheck {
    pub t1: f64,
    pub t2: f64,
    pub theoretical: f64,
    pub empirical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcltGridOutcome {
    pub reports: Vec<McOutcome>,
    /// Advisory only: Cov(Z(s), Z(t)) against σ̂*²·ρ·min(s, t).
    pub covariances: Vec<CovarianceCheck>,
}

/// Var(Z) with Z = (S_{nt} − S_0 − N(nt)·â*)/√n against σ̂*²·ρ·t.
pub fn verify_fclt(model: &PriceModelSpec, params: &VerifyParams) -> Result<McOutcome> {
    let mut grid = verify_fclt_grid(model, params, &[params.t])?;
    Ok(grid.reports.remove(0))
}

/// FCLT check at several times from the same simulated paths.
pub fn verify_fclt_grid(model: &PriceModelSpec, params: &VerifyParams, ts: &[f64]) -> Result<FcltGridOutcome> {
    params.check()?;
    if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0)) {
        return Err(LabError::Domain("FCLT grid times must be > 0".into()));
    }
    let limit = limit_for(model, params)?;
    let terminals = simulate_terminals(model, params, ts)?;
    let root_n = params.n.sqrt();
    let z: Vec<Vec<f64>> = (0..ts.len())
        .map(|j| {
            terminals
                .iter()
                .map(|v| (v[j].0 - v[j].1 as f64 * limit.a_star) / root_n)
                .collect()
        })
        .collect();

    let mut reports = Vec::with_capacity(ts.len());
    for (j, &t) in ts.iter().enumerate() {
        let samples = z[j].clone();
        let counts: Vec<f64> = terminals.iter().map(|v| v[j].1 as f64 / params.n).collect();
        let theoretical = limit.fclt_variance(t);
        let report = if theoretical > 0.0 {
            let m = Moments::of(&samples);
            let empirical = m.variance;
            let se = m.std_error_of_variance();
            let sd = theoretical.sqrt();
            let ks = ks_test(&samples, |x| normal_cdf(x / sd));
            McReport {
                statistic: "fclt_variance".into(),
                theoretical,
                empirical,
                standard_error: se,
                n_paths: params.n_paths,
                n: params.n,
                t,
                pass: params.tolerance.passes(empirical, theoretical, se),
                tolerance: params.tolerance,
                mean_scaled_count: Moments::of(&counts).mean,
                ks_statistic: Some(ks.statistic),
                ks_p_value: Some(ks.p_value),
            }
        } else {
            let worst = samples.iter().fold(0.0f64, |acc, z| acc.max(z.abs()));
            McReport {
                statistic: "fclt_max_abs_z".into(),
                theoretical: 0.0,
                empirical: worst,
                standard_error: 0.0,
                n_paths: params.n_paths,
                n: params.n,
                t,
                pass: worst <= DEGENERATE_Z_TOL,
                tolerance: Tolerance { se_multiplier: 0.0, relative: 0.0 },
                mean_scaled_count: Moments::of(&counts).mean,
                ks_statistic: None,
                ks_p_value: None,
            }
        };
        reports.push(McOutcome { report, limit: limit.clone(), samples });
    }

    let mut covariances = Vec::new();
    for a in 0..ts.len() {
        for b in (a + 1)..ts.len() {
            let (ma, mb) = (Moments::of(&z[a]).mean, Moments::of(&z[b]).mean);
            let cov = z[a].iter().zip(&z[b]).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>()
                / (params.n_paths as f64 - 1.0);
            covariances.push(CovarianceCheck {
                t1: ts[a],
                t2: ts[b],
                theoretical: limit.fclt_variance(ts[a].min(ts[b])),
                empirical: cov,
            });
        }
    }
    Ok(FcltGridOutcome { reports, covariances })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub se: f64,
}

/// Estimate of the stationary mean rate E[N[0,1]].
///
/// Each path contributes `(N(T) − N(burn_in))/(T − burn_in)`. A nonlinear
/// regime-switched spec is handled through its frozen-regime processes,
/// returning `Σ p*_i E[N^i[0,1]]`.
pub fn estimate_mean_rate(
    hawkes: &HawkesSpec,
    horizon: f64,
    burn_in: Option<f64>,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<RateEstimate> {
    hawkes.validate()?;
    hawkes.check_nonlinear_stability()?;
    let burn = burn_in.unwrap_or(0.1 * horizon);
    if !(horizon > 0.0) || !(burn >= 0.0) || burn >= horizon {
        return Err(LabError::Domain(format!("need 0 <= burn_in < horizon, got {burn} and {horizon}")));
    }
    if n_paths < 2 {
        return Err(LabError::InsufficientData("rate estimation needs at least 2 paths".into()));
    }
    if let (Background::RegimeSwitched(r), Some(_)) = (&hawkes.background, &hawkes.nonlinearity) {
        let pstar = r.stationary()?;
        let mut rate = 0.0;
        let mut var = 0.0;
        for (i, p) in pstar.iter().enumerate() {
            let frozen = hawkes.frozen_in_regime(i);
            let sub_seed = splitmix64(seed ^ splitmix64(0xA5A5_0000 + i as u64));
            let est = mean_rate_paths(&frozen, horizon, burn, n_paths, sub_seed, execution)?;
            rate += p * est.rate;
            var += p * p * est.se * est.se;
        }
        return Ok(RateEstimate { rate, se: var.sqrt() });
    }
    mean_rate_paths(hawkes, horizon, burn, n_paths, seed, execution)
}

fn mean_rate_paths(
    hawkes: &HawkesSpec,
    horizon: f64,
    burn: f64,
    n_paths: usize,
    seed: u64,
    execution: Execution,
) -> Result<RateEstimate> {
    let rates = execution.map_indexed(n_paths, |i| {
        let mut s = PathStreams::new(seed, i as u64);
        let path = simulate_with(hawkes, horizon, &mut s.events, &mut s.regimes).map_err(|e| match e {
            LabError::Explosion { events, cap } => LabError::NonStationary(format!(
                "event count {events} exceeded the cap {cap}; the process appears unstable"
            )),
            other => other,
        })?;
        let after = path.events.len() - path.events.count_until(burn);
        Ok(after as f64 / (horizon - burn))
    })?;
    let m = Moments::of(&rates);
    Ok(RateEstimate { rate: m.mean, se: m.std_error_of_mean() })
}

//! Fitting model components from data: maximum likelihood for the
//! exponential-kernel Hawkes process and empirical mark-chain transitions.

mod bfgs;
mod loglik;

pub use bfgs::{minimize, BfgsOptions, BfgsResult};
pub use loglik::{exp_hawkes_loglik, ExpHawkesParams};

use nalgebra::Matrix3;
use serde::Serialize;

use crate::chains::MarkChainSpec;
use crate::error::{LabError, Result};
use loglik::loglik_and_grad;

/// Smallest event count accepted by [`fit_exp_hawkes`].
pub const MIN_FIT_EVENTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: ExpHawkesParams,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Gradient norm in log-parameter space at the returned point.
    pub grad_norm: f64,
    /// Standard errors of (λ, α, β) from the inverse observed information;
    /// `None` when the information matrix is not positive definite.
    pub std_errors: Option<[f64; 3]>,
    pub branching_ratio: f64,
    /// Set when the fitted branching ratio is not below 1.
    pub nonstationary: bool,
}

fn default_starts(n_events: usize, horizon: f64) -> Vec<ExpHawkesParams> {
    let rate = n_events as f64 / horizon;
    [(0.2, 1.0), (0.5, 0.3), (0.8, 3.0)]
        .iter()
        .map(|&(mu_hat, beta_scale)| {
            let beta = beta_scale * rate.max(1e-12);
            ExpHawkesParams { lambda: rate * (1.0 - mu_hat), alpha: mu_hat * beta, beta }
        })
        .collect()
}

/// Maximum-likelihood fit of (λ, α, β) on `(0, horizon]`.
///
/// Optimizes over log-parameters with BFGS from three default starts (plus
/// `init` when given) and keeps the best optimum.
pub fn fit_exp_hawkes(times: &[f64], horizon: f64, init: Option<ExpHawkesParams>) -> Result<FitResult> {
    if times.len() < MIN_FIT_EVENTS {
        return Err(LabError::InsufficientData(format!(
            "{} events; fitting needs at least {MIN_FIT_EVENTS}",
            times.len()
        )));
    }
    crate::hawkes::EventStream { times: times.to_vec(), horizon, regimes: None }.validate()?;
    if !(horizon > *times.last().expect("non-empty")) {
        return Err(LabError::Domain("horizon must exceed the last event time".into()));
    }

    let objective = |theta: &[f64]| {
        let p = ExpHawkesParams { lambda: theta[0].exp(), alpha: theta[1].exp(), beta: theta[2].exp() };
        let (ll, g) = loglik_and_grad(times, horizon, p);
        // chain rule for θ = ln(param)
        (-ll, vec![-g[0] * p.lambda, -g[1] * p.alpha, -g[2] * p.beta])
    };

    let mut starts = default_starts(times.len(), horizon);
    if let Some(p) = init {
        starts.insert(0, p);
    }
    let mut runs: Vec<BfgsResult> = Vec::new();
    for s in starts {
        let x0 = [s.lambda.ln(), s.alpha.ln(), s.beta.ln()];
        if x0.iter().any(|v| !v.is_finite()) {
            continue;
        }
        // log-parameters move by at most a factor e per line search
        runs.push(minimize(objective, &x0, BfgsOptions { max_step: 1.0, ..Default::default() }));
    }
    let lowest = runs
        .iter()
        .map(|r| r.value)
        .fold(f64::INFINITY, f64::min);
    if !lowest.is_finite() {
        return Err(LabError::Numerical("no start produced a finite likelihood".into()));
    }
    // A start that stalled on a flat ridge can undercut a converged optimum by
    // rounding noise alone; prefer converged runs that tie with the lowest value.
    let tie = 1e-9 * (1.0 + lowest.abs());
    let best = runs
        .iter()
        .filter(|r| r.value <= lowest + tie)
        .min_by(|a, b| b.converged.cmp(&a.converged).then(a.value.total_cmp(&b.value)))
        .cloned()
        .expect("at least one run attains the minimum");
    let params = ExpHawkesParams { lambda: best.x[0].exp(), alpha: best.x[1].exp(), beta: best.x[2].exp() };
    let std_errors = standard_errors(times, horizon, params);
    Ok(FitResult {
        params,
        loglik: -best.value,
        converged: best.converged,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        std_errors,
        branching_ratio: params.branching_ratio(),
        nonstationary: params.branching_ratio() >= 1.0,
    })
}

/// √diag of the inverse observed information, with the Hessian taken by
/// central differences of the analytic gradient.
fn standard_errors(times: &[f64], horizon: f64, p: ExpHawkesParams) -> Option<[f64; 3]> {
    let x = [p.lambda, p.alpha, p.beta];
    let grad = |x: [f64; 3]| loglik_and_grad(times, horizon, ExpHawkesParams { lambda: x[0], alpha: x[1], beta: x[2] }).1;
    let mut info = Matrix3::zeros();
    for j in 0..3 {
        let h = 1e-5 * x[j];
        let (mut up, mut dn) = (x, x);
        up[j] += h;
        dn[j] -= h;
        let (gu, gd) = (grad(up), grad(dn));
        for i in 0..3 {
            info[(i, j)] = -(gu[i] - gd[i]) / (2.0 * h);
        }
    }
    let info = 0.5 * (info + info.transpose());
    let chol = info.cholesky()?;
    let cov = chol.inverse();
    let se = [cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt(), cov[(2, 2)].sqrt()];
    se.iter().all(|v| v.is_finite()).then_some(se)
}

/// Empirical transition matrix of a 0-based state sequence over `n_states`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionFit {
    pub p_hat: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
}

pub fn fit_transition_matrix(states: &[usize], n_states: usize) -> Result<TransitionFit> {
    if states.len() < 2 {
        return Err(LabError::InsufficientData("need at least 2 observed states".into()));
    }
    if let Some(&s) = states.iter().find(|&&s| s >= n_states) {
        return Err(LabError::Domain(format!("state {s} outside 0..{n_states}")));
    }
    let mut counts = vec![vec![0u64; n_states]; n_states];
    for w in states.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let mut p_hat = Vec::with_capacity(n_states);
    for (i, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(LabError::Coverage(format!("state {} has no observed transitions", i + 1)));
        }
        p_hat.push(row.iter().map(|&c| c as f64 / total as f64).collect());
    }
    Ok(TransitionFit { p_hat, counts })
}

/// Bucket index of `x` for ascending `edges`: bucket `i` is `[edges[i], edges[i+1])`.
pub fn bucket_of(x: f64, edges: &[f64]) -> Option<usize> {
    if edges.len() < 2 || !(x >= edges[0]) || !(x < edges[edges.len() - 1]) {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// Parse `"-inf,-0.005,0.005,inf"` into strictly increasing edges.
pub fn parse_bucket_edges(spec: &str) -> Result<Vec<f64>> {
    let edges: Vec<f64> = spec
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s {
                "-inf" => Ok(f64::NEG_INFINITY),
                "inf" | "+inf" => Ok(f64::INFINITY),
                _ => s.parse::<f64>().map_err(|_| LabError::Validation(format!("bad bucket edge '{s}'"))),
            }
        })
        .collect::<Result<_>>()?;
    if edges.len() < 3 {
        return Err(LabError::Validation("need at least 3 edges (2 buckets)".into()));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(LabError::Validation("bucket edges must be strictly increasing".into()));
    }
    Ok(edges)
}

/// Mark chain fitted from a price series: consecutive price changes are
/// binned by `edges`; each state's mark is the mean change in its bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkFit {
    pub chain: MarkChainSpec,
    pub counts: Vec<Vec<u64>>,
    pub states: Vec<usize>,
}

pub fn fit_marks_from_prices(prices: &[f64], edges: &[f64]) -> Result<MarkFit> {
    let n = edges.len() - 1;
    let changes: Vec<f64> = prices.windows(2).map(|w| w[1] - w[0]).collect();
    let states: Vec<usize> = changes
        .iter()
        .map(|&d| bucket_of(d, edges).ok_or_else(|| LabError::Coverage(format!("price change {d} falls outside the buckets"))))
        .collect::<Result<_>>()?;
    let fit = fit_transition_matrix(&states, n)?;
    let mut sums = vec![0.0; n];
    let mut hits = vec![0usize; n];
    for (&s, &d) in states.iter().zip(&changes) {
        sums[s] += d;
        hits[s] += 1;
    }
    let marks = sums.iter().zip(&hits).map(|(s, &h)| s / h as f64).collect();
    let chain = MarkChainSpec::new(fit.p_hat, marks)?;
    Ok(MarkFit { chain, counts: fit.counts, states })
}

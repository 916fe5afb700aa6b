//! Markov chains driving the model.
//!
//! * [`MarkChainSpec`]: the discrete-time chain X_k sampled once per event;
//!   the k-th price increment is `a(X_k)`.
//! * [`RegimeSpec`]: the continuous-time chain Y_t selecting the background
//!   intensity `λ_{Y_t}`.
//!
//! States are 0-based in the API. CSV and JSON exports that name states use
//! 1-based labels.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Row sums must match 1 (or 0 for generators) within this.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Linear systems with a larger 2-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkChainSpec {
    #[serde(rename = "P")]
    pub transition: Vec<Vec<f64>>,
    #[serde(rename = "a")]
    pub marks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDist {
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    #[serde(rename = "A")]
    pub generator: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
}

/// One constant piece of a regime path: `state` holds on `[start, next start)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSegment {
    pub start: f64,
    pub state: usize,
}

/// Piecewise-constant realization of Y on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePath {
    pub segments: Vec<RegimeSegment>,
    pub horizon: f64,
}

impl RegimePath {
    pub fn constant(state: usize, horizon: f64) -> Self {
        RegimePath { segments: vec![RegimeSegment { start: 0.0, state }], horizon }
    }

    /// Regime in force at `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        let idx = self.segments.partition_point(|s| s.start <= t);
        self.segments[idx.saturating_sub(1)].state
    }

    /// Jump times in (0, horizon].
    pub fn jump_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().skip(1).map(|s| s.start)
    }

    /// Time spent in each of `n_states` states over `[0, horizon]`.
    pub fn occupation(&self, n_states: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for (i, seg) in self.segments.iter().enumerate() {
            let end = self.segments.get(i + 1).map_or(self.horizon, |s| s.start);
            occ[seg.state] += end - seg.start;
        }
        occ
    }
}

fn square_dims(m: &[Vec<f64>], what: &str) -> Result<usize> {
    let n = m.len();
    if n == 0 {
        return Err(LabError::Validation(format!("{what} is empty")));
    }
    if let Some(i) = m.iter().position(|r| r.len() != n) {
        return Err(LabError::Validation(format!(
            "{what} is not square: row {i} has {} entries, expected {n}",
            m[i].len()
        )));
    }
    Ok(n)
}

fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

/// Strong connectivity of the directed graph with an edge i→j whenever
/// `adj(i, j)` holds.
fn strongly_connected(n: usize, adj: impl Fn(usize, usize) -> bool) -> bool {
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for (j, seen_j) in seen.iter_mut().enumerate() {
                let edge = if forward { adj(i, j) } else { adj(j, i) };
                if edge && !*seen_j {
                    *seen_j = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Solve `x · M = 0` with `Σx = 1` by replacing the last balance equation with
/// the normalization row.
fn solve_left_null(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let mut sys = m.transpose();
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let cond = condition_number(&sys);
    if !(cond <= MAX_CONDITION) {
        return Err(LabError::NotErgodic(format!(
            "stationary system is singular or ill-conditioned (condition number {cond:.3e})"
        )));
    }
    let x = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| LabError::NotErgodic("stationary system is singular".into()))?;
    Ok(x.iter().copied().collect())
}

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Unique stationary distribution of a row-stochastic, irreducible `P`.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<StationaryDist> {
    let n = validate_stochastic(p)?;
    if !strongly_connected(n, |i, j| p[i][j] > 0.0) {
        return Err(LabError::NotErgodic("transition matrix is reducible".into()));
    }
    let mut m = to_dmatrix(p);
    for i in 0..n {
        m[(i, i)] -= 1.0;
    }
    let mut pi = solve_left_null(&m)?;
    // Round-off can leave tiny negatives; the exact solution is positive.
    for v in pi.iter_mut() {
        if *v < 0.0 && *v > -1e-14 {
            *v = 0.0;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    Ok(StationaryDist { pi })
}

fn validate_stochastic(p: &[Vec<f64>]) -> Result<usize> {
    let n = square_dims(p, "transition matrix")?;
    for (i, row) in p.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(LabError::Validation(format!(
                "P[{i}][{j}] = {} is not a probability",
                row[j]
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(LabError::Validation(format!("row {i} of P sums to {s}, not 1")));
        }
    }
    Ok(n)
}

impl StationaryDist {
    /// ‖π·P − π‖∞.
    pub fn residual(&self, p: &[Vec<f64>]) -> f64 {
        let n = self.pi.len();
        (0..n)
            .map(|j| {
                let v: f64 = (0..n).map(|i| self.pi[i] * p[i][j]).sum();
                (v - self.pi[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl MarkChainSpec {
    /// Validated chain with at least two states.
    pub fn new(transition: Vec<Vec<f64>>, marks: Vec<f64>) -> Result<Self> {
        let spec = MarkChainSpec { transition, marks };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = validate_stochastic(&self.transition)?;
        if n < 2 {
            return Err(LabError::Validation("mark chain needs at least 2 states".into()));
        }
        if self.marks.len() != n {
            return Err(LabError::Validation(format!(
                "mark vector has {} entries for {n} states",
                self.marks.len()
            )));
        }
        if let Some(v) = self.marks.iter().find(|v| !v.is_finite()) {
            return Err(LabError::Validation(format!("mark value {v} is not finite")));
        }
        self.stationary().map(|_| ())
    }

    pub fn n_states(&self) -> usize {
        self.marks.len()
    }

    pub fn stationary(&self) -> Result<StationaryDist> {
        stationary_distribution(&self.transition)
    }

    /// Same chain with every mark multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        MarkChainSpec {
            transition: self.transition.clone(),
            marks: self.marks.iter().map(|a| a * c).collect(),
        }
    }
}

/// Two-state ±δ chain.
///
/// State 0 carries `+δ` and state 1 carries `−δ`; `p` is the probability of
/// staying at `+δ` and `p_prime` the probability of staying at `−δ`:
///
/// ```text
/// P = [[p,      1 − p ],
///      [1 − p', p'    ]]
/// ```
pub fn two_state_chain(p: f64, p_prime: f64, delta: f64) -> Result<MarkChainSpec> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(LabError::Validation(format!("tick size must be > 0, got {delta}")));
    }
    for (name, v) in [("p", p), ("p'", p_prime)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(LabError::Validation(format!("{name} = {v} is not a probability")));
        }
    }
    MarkChainSpec::new(vec![vec![p, 1.0 - p], vec![1.0 - p_prime, p_prime]], vec![delta, -delta])
}

#[inline]
fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &w) in row.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    // u landed in the round-off gap above the last cumulative sum
    row.iter().rposition(|&w| w > 0.0).unwrap_or(row.len() - 1)
}

/// Chain path of length `n_steps` started from the stationary distribution.
pub fn simulate_chain<R: Rng + ?Sized>(
    spec: &MarkChainSpec,
    n_steps: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let pi = spec.stationary()?;
    Ok(ChainSampler::new(spec, &pi.pi).take_n(n_steps, None, rng))
}

/// Chain path of length `n_steps` whose first state is `start`.
pub fn simulate_chain_from<R: Rng + ?Sized>(
    spec: &MarkChainSpec,
    n_steps: usize,
    start: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if start >= spec.n_states() {
        return Err(LabError::Domain(format!("start state {start} out of range")));
    }
    let pi = spec.stationary()?;
    Ok(ChainSampler::new(spec, &pi.pi).take_n(n_steps, Some(start), rng))
}

/// Stateful sampler reused by the price simulator and the Monte Carlo oracles.
pub(crate) struct ChainSampler<'a> {
    rows: &'a [Vec<f64>],
    pi: Vec<f64>,
}

impl<'a> ChainSampler<'a> {
    pub(crate) fn new(spec: &'a MarkChainSpec, pi: &[f64]) -> Self {
        ChainSampler { rows: &spec.transition, pi: pi.to_vec() }
    }

    pub(crate) fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_row(&self.pi, rng)
    }

    #[inline]
    pub(crate) fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        sample_row(&self.rows[from], rng)
    }

    pub(crate) fn take_n<R: Rng + ?Sized>(
        &self,
        n: usize,
        start: Option<usize>,
        rng: &mut R,
    ) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let mut s = start.unwrap_or_else(|| self.initial(rng));
        out.push(s);
        for _ in 1..n {
            s = self.step(s, rng);
            out.push(s);
        }
        out
    }
}

impl RegimeSpec {
    pub fn new(generator: Vec<Vec<f64>>, lambdas: Vec<f64>) -> Result<Self> {
        let spec = RegimeSpec { generator, lambdas };
        spec.validate()?;
        Ok(spec)
    }

    /// Single regime with background intensity `lambda`.
    pub fn single(lambda: f64) -> Result<Self> {
        RegimeSpec::new(vec![vec![0.0]], vec![lambda])
    }

    pub fn n_regimes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = square_dims(&self.generator, "generator")?;
        if self.lambdas.len() != n {
            return Err(LabError::Validation(format!(
                "{} regime intensities for {n} regimes",
                self.lambdas.len()
            )));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(LabError::Validation(format!("regime intensity {l} must be > 0")));
        }
        for (i, row) in self.generator.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || (i != j && v < 0.0) {
                    return Err(LabError::Validation(format!("A[{i}][{j}] = {v} is not a valid rate")));
                }
            }
            let s: f64 = row.iter().sum();
            if s.abs() > ROW_SUM_TOL {
                return Err(LabError::Validation(format!("row {i} of A sums to {s}, not 0")));
            }
        }
        self.stationary().map(|_| ())
    }

    /// Stationary regime probabilities p* with p*·A = 0.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        ctmc_stationary(&self.generator)
    }

    /// Exit rate −A[i][i] of regime `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.generator[i][i]
    }
}

/// Stationary distribution of an irreducible CTMC generator.
pub fn ctmc_stationary(a: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = square_dims(a, "generator")?;
    if n == 1 {
        return Ok(vec![1.0]);
    }
    if !strongly_connected(n, |i, j| i != j && a[i][j] > 0.0) {
        return Err(LabError::NotErgodic("generator is reducible".into()));
    }
    let mut p = solve_left_null(&to_dmatrix(a))?;
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v = (*v / s).max(0.0));
    Ok(p)
}

/// ‖p·A‖∞.
pub fn ctmc_residual(p: &[f64], a: &[Vec<f64>]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|j| (0..n).map(|i| p[i] * a[i][j]).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// Regime path on `[0, horizon]` started from p*.
pub fn simulate_regime_path<R: Rng + ?Sized>(
    regime: &RegimeSpec,
    horizon: f64,
    rng: &mut R,
) -> Result<RegimePath> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(LabError::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    let pstar = regime.stationary()?;
    let n = regime.n_regimes();
    let mut state = if n == 1 { 0 } else { sample_row(&pstar, rng) };
    let mut segments = vec![RegimeSegment { start: 0.0, state }];
    let mut t = 0.0;
    loop {
        let rate = regime.exit_rate(state);
        if rate <= 0.0 {
            break;
        }
        let hold: f64 = Exp1.sample(rng);
        t += hold / rate;
        if t > horizon {
            break;
        }
        let weights: Vec<f64> = (0..n)
            .map(|j| if j == state { 0.0 } else { regime.generator[state][j] / rate })
            .collect();
        state = sample_row(&weights, rng);
        segments.push(RegimeSegment { start: t, state });
    }
    Ok(RegimePath { segments, horizon })
}

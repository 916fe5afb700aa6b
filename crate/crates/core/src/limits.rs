//! Closed-form LLN drifts and FCLT volatilities.
//!
//! For every model variant the scaled, centered price
//! `(S_{nt} − N(nt)·â*)/√n` converges to `σ̂*·√ρ·W(t)` and `S_{nt}/n` to
//! `â*·ρ·t`, where
//!
//! * `â*`, `σ̂*²` depend only on the mark chain (mean mark and long-run
//!   variance from the Poisson equation `(P + Π* − I)g = b`);
//! * `ρ` is the long-run event rate: `λ/(1 − μ̂)`, `λ̂/(1 − μ̂)` with
//!   `λ̂ = Σ p*_i λ_i` under regime switching, or a Monte Carlo estimate of
//!   `E[N[0,1]]` (resp. `Σ p*_i E[N^i[0,1]]`) for a nonlinear intensity.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chains::{condition_number, two_state_chain, MarkChainSpec, MAX_CONDITION};
use crate::error::{LabError, Result};
use crate::hawkes::{Background, HawkesSpec};
use crate::mc::{estimate_mean_rate, RateEstimate};
use crate::price::PriceModelSpec;

/// Residual bound on the Poisson-equation solve.
pub const POISSON_RESIDUAL_TOL: f64 = 1e-9;

/// Solution of the Poisson equation behind σ̂*².
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonEqSolution {
    /// Centered marks b(i) = a(i) − â*.
    pub b: Vec<f64>,
    /// g = (P + Π* − I)⁻¹ b.
    pub g: Vec<f64>,
    /// Per-state variance contributions; σ̂*² = Σ π*_i v(i).
    pub v: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkCoefficients {
    pub pi: Vec<f64>,
    pub a_star: f64,
    pub sigma_star_sq: f64,
    pub solution: PoissonEqSolution,
}

/// s* and σ² of the two-state ±δ chain in closed form.
///
/// ```text
/// π* = (1 − p')/(2 − p − p')
/// s* = δ(2π* − 1)
/// σ² = 4δ²[(1 − p' + π*(p' − p))/(p + p' − 2)² − π*(1 − π*)]
/// ```
pub fn chpdo_coefficients(p: f64, p_prime: f64, delta: f64) -> Result<(f64, f64)> {
    two_state_chain(p, p_prime, delta)?;
    let denom = p + p_prime - 2.0;
    let pi = (1.0 - p_prime) / (2.0 - p - p_prime);
    let s_star = delta * (2.0 * pi - 1.0);
    let sigma_sq = 4.0 * delta * delta * ((1.0 - p_prime + pi * (p_prime - p)) / (denom * denom) - pi * (1.0 - pi));
    Ok((s_star, sigma_sq))
}

/// a* and σ*² of a general two-state chain in closed form, with
/// `p = P(0→0)`, `p' = P(1→1)`.
pub fn two_state_coefficients(chain: &MarkChainSpec) -> Result<(f64, f64)> {
    chain.validate()?;
    if chain.n_states() != 2 {
        return Err(LabError::Validation("two-state formula needs exactly 2 states".into()));
    }
    let p = chain.transition[0][0];
    let q = chain.transition[1][1];
    let (a1, a2) = (chain.marks[0], chain.marks[1]);
    let pi1 = (1.0 - q) / (2.0 - p - q);
    let pi2 = 1.0 - pi1;
    let d = p + q - 2.0;
    let m = pi1 * a1 + pi2 * a2;
    let sigma_sq = pi1 * a1 * a1
        + pi2 * a2 * a2
        + m * (-2.0 * a1 * pi1 - 2.0 * a2 * pi2 + m * (pi1 + pi2))
        + (pi1 * (1.0 - p) + pi2 * (1.0 - q)) * (a1 - a2) * (a1 - a2) / (d * d)
        + 2.0 * (a2 - a1) * ((pi2 * a2 * (1.0 - q) - pi1 * a1 * (1.0 - p)) / d + m * (pi1 - p * pi1 - pi2 + q * pi2) / d);
    Ok((m, sigma_sq))
}

/// â*, σ̂*² and the Poisson-equation solution for an n-state chain.
pub fn nstate_coefficients(chain: &MarkChainSpec) -> Result<MarkCoefficients> {
    chain.validate()?;
    let n = chain.n_states();
    let pi = chain.stationary()?.pi;
    let p = &chain.transition;
    let a_star: f64 = pi.iter().zip(&chain.marks).map(|(w, a)| w * a).sum();
    let b: Vec<f64> = chain.marks.iter().map(|a| a - a_star).collect();

    let m = DMatrix::from_fn(n, n, |i, j| p[i][j] + pi[j] - if i == j { 1.0 } else { 0.0 });
    let cond = condition_number(&m);
    if !(cond <= MAX_CONDITION) {
        return Err(LabError::Numerical(format!(
            "P + Π* − I is singular or ill-conditioned (condition number {cond:.3e})"
        )));
    }
    let rhs = DVector::from_column_slice(&b);
    let g = m
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| LabError::Numerical("P + Π* − I is singular".into()))?;
    let residual = (&m * &g - &rhs).amax();
    if residual > POISSON_RESIDUAL_TOL {
        return Err(LabError::Numerical(format!("Poisson equation residual {residual:.3e}")));
    }
    let g: Vec<f64> = g.iter().copied().collect();

    let v: Vec<f64> = (0..n)
        .map(|i| {
            let sq: f64 = (0..n).map(|j| (g[j] - g[i]).powi(2) * p[i][j]).sum();
            let lin: f64 = (0..n).map(|j| (g[j] - g[i]) * p[i][j]).sum();
            b[i] * b[i] + sq - 2.0 * b[i] * lin
        })
        .collect();
    let sigma_star_sq = pi.iter().zip(&v).map(|(w, vi)| w * vi).sum::<f64>().max(0.0);
    Ok(MarkCoefficients {
        pi,
        a_star,
        sigma_star_sq,
        solution: PoissonEqSolution { b, g, v, residual },
    })
}

/// v(1), v(2) written out for two states, with g from an explicit 2×2 solve.
pub fn two_state_v(chain: &MarkChainSpec) -> Result<[f64; 2]> {
    chain.validate()?;
    if chain.n_states() != 2 {
        return Err(LabError::Validation("two-state formula needs exactly 2 states".into()));
    }
    let p12 = chain.transition[0][1];
    let p21 = chain.transition[1][0];
    let pi1 = p21 / (p12 + p21);
    let pi2 = p12 / (p12 + p21);
    let a_star = pi1 * chain.marks[0] + pi2 * chain.marks[1];
    let (b1, b2) = (chain.marks[0] - a_star, chain.marks[1] - a_star);
    // M = P + Π* − I = [[pi1 − p12, p12 + pi2], [p21 + pi1, pi2 − p21]]
    let (m11, m12, m21, m22) = (pi1 - p12, p12 + pi2, p21 + pi1, pi2 - p21);
    let det = m11 * m22 - m12 * m21;
    let g1 = (b1 * m22 - m12 * b2) / det;
    let g2 = (m11 * b2 - m21 * b1) / det;
    let v1 = b1 * b1 + p12 * (g2 - g1).powi(2) - 2.0 * b1 * p12 * (g2 - g1);
    let v2 = b2 * b2 + p21 * (g1 - g2).powi(2) - 2.0 * b2 * p21 * (g1 - g2);
    Ok([v1, v2])
}

/// λ̂ = Σ p*_i λ_i.
pub fn regime_rate(pstar: &[f64], lambdas: &[f64]) -> Result<f64> {
    if pstar.len() != lambdas.len() {
        return Err(LabError::Validation("regime probabilities and intensities differ in length".into()));
    }
    if (pstar.iter().sum::<f64>() - 1.0).abs() > 1e-9 || pstar.iter().any(|p| *p < 0.0) {
        return Err(LabError::Validation("regime probabilities must be a distribution".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(LabError::Validation("regime intensities must be > 0".into()));
    }
    Ok(pstar.iter().zip(lambdas).map(|(p, l)| p * l).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateProvenance {
    ClosedForm,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRate {
    pub value: f64,
    /// Monte Carlo standard error; `None` for closed forms.
    pub se: Option<f64>,
    pub provenance: RateProvenance,
}

/// Monte Carlo settings for nonlinear event rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBudget {
    pub horizon: f64,
    /// Defaults to 10% of the horizon.
    pub burn_in: Option<f64>,
    pub paths: usize,
    pub seed: u64,
    pub execution: crate::exec::Execution,
}

impl Default for RateBudget {
    fn default() -> Self {
        RateBudget { horizon: 2000.0, burn_in: None, paths: 64, seed: 0, execution: Default::default() }
    }
}

/// Long-run events per unit time.
pub fn event_rate(hawkes: &HawkesSpec, budget: Option<&RateBudget>) -> Result<EventRate> {
    hawkes.validate()?;
    let mu_hat = hawkes.kernel.require_fclt_conforming()?;
    if hawkes.nonlinearity.is_none() {
        let base = match &hawkes.background {
            Background::Fixed(l) => *l,
            Background::RegimeSwitched(r) => regime_rate(&r.stationary()?, &r.lambdas)?,
        };
        return Ok(EventRate { value: base / (1.0 - mu_hat), se: None, provenance: RateProvenance::ClosedForm });
    }
    hawkes.check_nonlinear_stability()?;
    let budget = budget.copied().unwrap_or_default();
    let RateEstimate { rate, se } = estimate_mean_rate(
        hawkes,
        budget.horizon,
        budget.burn_in,
        budget.paths,
        budget.seed,
        budget.execution,
    )?;
    Ok(EventRate { value: rate, se: Some(se), provenance: RateProvenance::Estimated })
}

/// Drift and volatility of the diffusion limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionLimit {
    pub a_star: f64,
    pub sigma_star_sq: f64,
    pub event_rate: f64,
    pub rate_se: Option<f64>,
    pub rate_provenance: RateProvenance,
    pub lln_drift_rate: f64,
    pub fclt_vol: f64,
    /// Delta-method standard error of `fclt_vol` when the rate is estimated.
    pub fclt_vol_se: Option<f64>,
}

impl DiffusionLimit {
    pub fn from_parts(a_star: f64, sigma_star_sq: f64, rate: EventRate) -> Self {
        let sigma = sigma_star_sq.sqrt();
        let fclt_vol = (sigma_star_sq * rate.value).sqrt();
        DiffusionLimit {
            a_star,
            sigma_star_sq,
            event_rate: rate.value,
            rate_se: rate.se,
            rate_provenance: rate.provenance,
            lln_drift_rate: a_star * rate.value,
            fclt_vol,
            fclt_vol_se: rate.se.map(|se| sigma / (2.0 * rate.value.sqrt()) * se),
        }
    }

    /// â*·ρ·t.
    pub fn lln_drift(&self, t: f64) -> f64 {
        self.lln_drift_rate * t
    }

    /// Variance of the limiting Gaussian at time t: σ̂*²·ρ·t.
    pub fn fclt_variance(&self, t: f64) -> f64 {
        self.sigma_star_sq * self.event_rate * t
    }
}

pub fn diffusion_limit(model: &PriceModelSpec, budget: Option<&RateBudget>) -> Result<DiffusionLimit> {
    model.validate()?;
    let coeffs = nstate_coefficients(&model.marks)?;
    let rate = event_rate(&model.hawkes, budget)?;
    Ok(DiffusionLimit::from_parts(coeffs.a_star, coeffs.sigma_star_sq, rate))
}

/// Limit of S_{nt}/n.
pub fn lln_drift(model: &PriceModelSpec, t: f64, budget: Option<&RateBudget>) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(LabError::Domain(format!("time must be >= 0, got {t}")));
    }
    Ok(diffusion_limit(model, budget)?.lln_drift(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::RegimeSpec;
    use crate::kernels::Kernel;
    use proptest::prelude::*;

    #[test]
    fn chpdo_examples() {
        let (s, sig) = chpdo_coefficients(0.5, 0.5, 1.0).unwrap();
        assert_eq!(s, 0.0);
        assert!((sig - 1.0).abs() < 1e-15);
        assert!(matches!(chpdo_coefficients(1.0, 1.0, 1.0), Err(LabError::NotErgodic(_))));
    }

    #[test]
    fn iid_rows_reduce_to_stationary_variance() {
        let chain = MarkChainSpec::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![2.0, 0.0]).unwrap();
        let c = nstate_coefficients(&chain).unwrap();
        assert!((c.a_star - 1.0).abs() < 1e-15);
        assert!((c.sigma_star_sq - 1.0).abs() < 1e-12);
        for (g, b) in c.solution.g.iter().zip(&c.solution.b) {
            assert!((g + b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_two_state_matches_chpdo() {
        let c = nstate_coefficients(&two_state_chain(0.5, 0.5, 1.0).unwrap()).unwrap();
        assert!(c.a_star.abs() < 1e-15);
        assert!((c.sigma_star_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_marks_are_degenerate() {
        let chain = MarkChainSpec::new(vec![vec![0.3, 0.7], vec![0.6, 0.4]], vec![0.25, 0.25]).unwrap();
        let hawkes = HawkesSpec::linear(1.0, Kernel::Exponential { alpha: 0.5, beta: 1.0 }).unwrap();
        let model = PriceModelSpec::new(0.0, hawkes, chain).unwrap();
        let lim = diffusion_limit(&model, None).unwrap();
        assert_eq!(lim.sigma_star_sq, 0.0);
        assert_eq!(lim.lln_drift_rate, 0.25 * 2.0);
    }

    #[test]
    fn regime_rate_examples() {
        assert_eq!(regime_rate(&[1.0], &[2.0]).unwrap(), 2.0);
        assert!((regime_rate(&[0.5, 0.3, 0.2], &[1.0, 2.0, 3.0]).unwrap() - 1.7).abs() < 1e-15);
        assert_eq!(regime_rate(&[0.5, 0.5], &[2.0, 2.0]).unwrap(), 2.0);
        assert!(regime_rate(&[0.5, 0.5], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn event_rate_closed_forms() {
        let k = Kernel::Exponential { alpha: 0.5, beta: 1.0 };
        let r = event_rate(&HawkesSpec::linear(1.0, k).unwrap(), None).unwrap();
        assert_eq!(r, EventRate { value: 2.0, se: None, provenance: RateProvenance::ClosedForm });
        let regimes = RegimeSpec::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]], vec![1.0, 3.0]).unwrap();
        let r = event_rate(&HawkesSpec::regime_switched(regimes, k).unwrap(), None).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn event_rate_preconditions() {
        let err = event_rate(&HawkesSpec::linear(1.0, Kernel::Exponential { alpha: 1.0, beta: 1.0 }).unwrap(), None);
        assert!(matches!(err, Err(LabError::NonStationary(_))));
        let err = event_rate(&HawkesSpec::linear(1.0, Kernel::PowerLaw { k: 0.1, c: 1.0, p: 1.5 }).unwrap(), None);
        assert!(matches!(err, Err(LabError::FcltPrecondition(_))));
    }

    #[test]
    fn diffusion_limit_examples() {
        let k = Kernel::Exponential { alpha: 0.5, beta: 1.0 };
        let marks = two_state_chain(0.5, 0.5, 1.0).unwrap();
        let model = PriceModelSpec::new(0.0, HawkesSpec::linear(1.0, k).unwrap(), marks.clone()).unwrap();
        let lim = diffusion_limit(&model, None).unwrap();
        assert!((lim.fclt_vol - 2f64.sqrt()).abs() < 1e-12);
        assert!((lim.fclt_vol - (lim.sigma_star_sq * lim.event_rate).sqrt()).abs() < 1e-12);

        let regimes = RegimeSpec::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]], vec![1.0, 3.0]).unwrap();
        let model = PriceModelSpec::new(0.0, HawkesSpec::regime_switched(regimes, k).unwrap(), marks).unwrap();
        let lim = diffusion_limit(&model, None).unwrap();
        assert!((lim.fclt_vol - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lln_drift_examples() {
        let lim = DiffusionLimit::from_parts(
            0.2,
            1.0,
            EventRate { value: 2.0, se: None, provenance: RateProvenance::ClosedForm },
        );
        assert!((lim.lln_drift(1.0) - 0.4).abs() < 1e-15);
        assert_eq!(lim.lln_drift(0.0), 0.0);
        let k = Kernel::Exponential { alpha: 0.5, beta: 1.0 };
        let model = PriceModelSpec::new(0.0, HawkesSpec::linear(1.0, k).unwrap(), two_state_chain(0.5, 0.5, 1.0).unwrap()).unwrap();
        assert_eq!(lln_drift(&model, 3.0, None).unwrap(), 0.0);
    }

    #[test]
    fn scale_equivariance_exact_for_powers_of_two() {
        let chain = MarkChainSpec::new(
            vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.6, 0.2], vec![0.3, 0.3, 0.4]],
            vec![1.0, 0.0, -1.0],
        )
        .unwrap();
        let base = nstate_coefficients(&chain).unwrap();
        let scaled = nstate_coefficients(&chain.scaled(4.0)).unwrap();
        assert_eq!(scaled.a_star, 4.0 * base.a_star);
        assert_eq!(scaled.sigma_star_sq, 16.0 * base.sigma_star_sq);
    }

    fn ergodic_chain() -> impl Strategy<Value = MarkChainSpec> {
        (2usize..6).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, n), n),
                proptest::collection::vec(-5.0f64..5.0, n),
            )
                .prop_map(|(rows, marks)| {
                    let transition = rows
                        .into_iter()
                        .map(|r| {
                            let s: f64 = r.iter().sum();
                            let mut r: Vec<f64> = r.iter().map(|v| v / s).collect();
                            let rest: f64 = r[1..].iter().sum();
                            r[0] = 1.0 - rest;
                            r
                        })
                        .collect();
                    MarkChainSpec { transition, marks }
                })
        })
    }

    proptest! {
        #[test]
        fn sigma_nonnegative_and_residual_small(chain in ergodic_chain()) {
            let c = nstate_coefficients(&chain).unwrap();
            prop_assert!(c.sigma_star_sq >= 0.0);
            prop_assert!(c.solution.residual < POISSON_RESIDUAL_TOL);
            let weighted: f64 = c.pi.iter().zip(&c.solution.v).map(|(p, v)| p * v).sum();
            prop_assert!((weighted.max(0.0) - c.sigma_star_sq).abs() < 1e-12);
        }

        #[test]
        fn scale_equivariance(chain in ergodic_chain(), c in 0.1f64..10.0) {
            let base = nstate_coefficients(&chain).unwrap();
            let scaled = nstate_coefficients(&chain.scaled(c)).unwrap();
            prop_assert!((scaled.a_star - c * base.a_star).abs() <= 1e-12 * (1.0 + (c * base.a_star).abs()));
            prop_assert!((scaled.sigma_star_sq - c * c * base.sigma_star_sq).abs() <= 1e-10 * (1.0 + c * c * base.sigma_star_sq));
        }

        #[test]
        fn chpdo_matches_nstate(p in 0.0f64..0.999, q in 0.0f64..0.999, delta in 0.001f64..10.0) {
            let (s, sig) = chpdo_coefficients(p, q, delta).unwrap();
            let c = nstate_coefficients(&two_state_chain(p, q, delta).unwrap()).unwrap();
            prop_assert!((s - c.a_star).abs() <= 1e-12 * delta.max(1.0));
            prop_assert!((sig - c.sigma_star_sq).abs() <= 1e-12 * (delta * delta).max(1.0) * 1e2);
        }
    }
}

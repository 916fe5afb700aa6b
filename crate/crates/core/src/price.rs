//! Compound mid-price process S_t = S_0 + Σ_{k ≤ N(t)} a(X_k).
//!
//! Every model variant (two-state ±δ marks, general two-state, n-state,
//! regime-switched and nonlinear intensity) is one [`PriceModelSpec`]: the
//! variant is determined by the mark chain and the Hawkes specification.

use rand::Rng;

use crate::chains::{ChainSampler, MarkChainSpec};
use crate::error::{LabError, Result};
use crate::hawkes::{simulate_with, EventStream, HawkesPath, HawkesSpec};
use crate::rng::PathStreams;
use crate::stats::CompensatedSum;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceModelSpec {
    pub s0: f64,
    pub hawkes: HawkesSpec,
    pub marks: MarkChainSpec,
}

impl PriceModelSpec {
    pub fn new(s0: f64, hawkes: HawkesSpec, marks: MarkChainSpec) -> Result<Self> {
        let m = PriceModelSpec { s0, hawkes, marks };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s0.is_finite() {
            return Err(LabError::Validation(format!("initial price {} is not finite", self.s0)));
        }
        self.hawkes.validate()?;
        self.marks.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    pub s0: f64,
    pub events: EventStream,
    /// Mark-chain state of each event (0-based).
    pub states: Vec<usize>,
    pub increments: Vec<f64>,
    /// S right after each event.
    pub prices: Vec<f64>,
}

impl PricePath {
    /// S_t, right-continuous: the price after the last event at or before `t`.
    pub fn sample_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.events.horizon {
            return Err(LabError::Domain(format!(
                "price requested at {t}, outside [0, {}]",
                self.events.horizon
            )));
        }
        let k = self.events.count_until(t);
        Ok(if k == 0 { self.s0 } else { self.prices[k - 1] })
    }

    pub fn final_price(&self) -> f64 {
        self.prices.last().copied().unwrap_or(self.s0)
    }
}

/// Simulate path 0 of `seed`. Events, regimes and marks use separate streams.
pub fn simulate_price(model: &PriceModelSpec, horizon: f64, seed: u64) -> Result<PricePath> {
    simulate_price_path(model, horizon, seed, 0)
}

/// Simulate path `path_index` of `seed`.
pub fn simulate_price_path(model: &PriceModelSpec, horizon: f64, seed: u64, path_index: u64) -> Result<PricePath> {
    let mut s = PathStreams::new(seed, path_index);
    simulate_price_with(model, horizon, &mut s.events, &mut s.regimes, &mut s.marks)
}

pub fn simulate_price_with<R1: Rng + ?Sized, R2: Rng + ?Sized, R3: Rng + ?Sized>(
    model: &PriceModelSpec,
    horizon: f64,
    event_rng: &mut R1,
    regime_rng: &mut R2,
    mark_rng: &mut R3,
) -> Result<PricePath> {
    let HawkesPath { events, .. } = simulate_with(&model.hawkes, horizon, event_rng, regime_rng)?;
    let pi = model.marks.stationary()?;
    let states = ChainSampler::new(&model.marks, &pi.pi).take_n(events.len(), None, mark_rng);
    Ok(assemble(model, events, states))
}

/// Combine an event stream and a mark-state sequence of the same length.
pub fn assemble(model: &PriceModelSpec, events: EventStream, states: Vec<usize>) -> PricePath {
    debug_assert_eq!(events.len(), states.len());
    let increments: Vec<f64> = states.iter().map(|&s| model.marks.marks[s]).collect();
    let mut acc = CompensatedSum::new(model.s0);
    let prices = increments
        .iter()
        .map(|&x| {
            acc.add(x);
            acc.value()
        })
        .collect();
    PricePath { s0: model.s0, events, states, increments, prices }
}

/// Price change over `(0, t]` and N(t), without storing the path.
///
/// Used by the Monte Carlo harness; consumes the streams exactly like
/// [`simulate_price_with`].
pub(crate) fn terminal_values<R1: Rng + ?Sized, R2: Rng + ?Sized, R3: Rng + ?Sized>(
    model: &PriceModelSpec,
    pi: &[f64],
    horizon: f64,
    checkpoints: &[f64],
    event_rng: &mut R1,
    regime_rng: &mut R2,
    mark_rng: &mut R3,
) -> Result<Vec<(f64, usize)>> {
    let HawkesPath { events, .. } = simulate_with(&model.hawkes, horizon, event_rng, regime_rng)?;
    let sampler = ChainSampler::new(&model.marks, pi);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut sum = CompensatedSum::default();
    let mut k = 0usize;
    let mut state = None;
    for &c in checkpoints {
        while k < events.times.len() && events.times[k] <= c {
            let s = match state {
                None => sampler.initial(mark_rng),
                Some(prev) => sampler.step(prev, mark_rng),
            };
            state = Some(s);
            sum.add(model.marks.marks[s]);
            k += 1;
        }
        out.push((sum.value(), k));
    }
    Ok(out)
}

//! Ogata thinning.
//!
//! Between events and regime jumps the excitation of both kernel families is
//! non-increasing and h is non-decreasing, so the intensity just after the
//! current time bounds the intensity until the next event or regime jump.
//! Candidates are drawn from a Poisson process at that bound and accepted
//! with probability `λ(s)/bound`. Regime jumps are refresh points where the
//! bound is recomputed.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::spec::{Background, HawkesSpec, POWER_LAW_TRUNCATION};
use crate::chains::{simulate_regime_path, RegimePath};
use crate::error::{LabError, Result};
use crate::kernels::Kernel;
use crate::rng::PathStreams;

/// Event times of one path on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStream {
    pub times: Vec<f64>,
    pub horizon: f64,
    /// Regime of Y at each event, when the background is regime-switched.
    pub regimes: Option<Vec<usize>>,
}

impl EventStream {
    /// Validated stream: strictly increasing positive times, none past `horizon`.
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        let s = EventStream { times, horizon, regimes: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(LabError::Validation(format!("invalid horizon {}", self.horizon)));
        }
        if let Some(&t) = self.times.first() {
            if !(t >= 0.0) {
                return Err(LabError::Validation(format!("event time {t} is negative")));
            }
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(LabError::Validation(format!(
                "event times not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(&last) = self.times.last() {
            if last > self.horizon {
                return Err(LabError::Validation(format!(
                    "event at {last} lies beyond the horizon {}",
                    self.horizon
                )));
            }
        }
        if let Some(r) = &self.regimes {
            if r.len() != self.times.len() {
                return Err(LabError::Validation("regime labels do not match event count".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// N(t): events in `(0, t]`.
    pub fn count_until(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }
}

/// Simulated events together with the regime path that drove them.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesPath {
    pub events: EventStream,
    pub regime_path: Option<RegimePath>,
}

/// Running excitation Σ μ(t − t_i) over accepted events.
enum Excitation {
    Exponential { alpha: f64, beta: f64, level: f64, at: f64 },
    PowerLaw { kernel: Kernel, history: Vec<f64>, start: usize, drop_below: Option<f64> },
    Zero,
}

impl Excitation {
    fn new(spec: &HawkesSpec) -> Self {
        match spec.kernel {
            Kernel::Exponential { alpha, beta } => Excitation::Exponential { alpha, beta, level: 0.0, at: 0.0 },
            k @ Kernel::PowerLaw { .. } => Excitation::PowerLaw {
                kernel: k,
                history: Vec::new(),
                start: 0,
                drop_below: spec
                    .truncate_power_law
                    .then(|| POWER_LAW_TRUNCATION * spec.min_background()),
            },
            Kernel::Zero => Excitation::Zero,
        }
    }

    /// Excitation at `t`; `t` never decreases across calls.
    #[inline]
    fn at(&mut self, t: f64) -> f64 {
        match self {
            Excitation::Exponential { beta, level, at, .. } => {
                if t != *at {
                    *level *= (-*beta * (t - *at)).exp();
                    *at = t;
                }
                *level
            }
            Excitation::PowerLaw { kernel, history, start, drop_below } => {
                if let Some(eps) = *drop_below {
                    while *start < history.len() && kernel.eval_unchecked(t - history[*start]) < eps {
                        *start += 1;
                    }
                }
                history[*start..].iter().map(|&ti| kernel.eval_unchecked(t - ti)).sum()
            }
            Excitation::Zero => 0.0,
        }
    }

    #[inline]
    fn add_event(&mut self, t: f64) {
        match self {
            Excitation::Exponential { alpha, .. } => {
                let a = *alpha;
                let lvl = self.at(t);
                if let Excitation::Exponential { level, .. } = self {
                    *level = lvl + a;
                }
            }
            Excitation::PowerLaw { history, .. } => history.push(t),
            Excitation::Zero => {}
        }
    }
}

/// Simulate path 0 of `seed` on `(0, horizon]`.
pub fn simulate(spec: &HawkesSpec, horizon: f64, seed: u64) -> Result<HawkesPath> {
    let mut streams = PathStreams::new(seed, 0);
    simulate_with(spec, horizon, &mut streams.events, &mut streams.regimes)
}

/// Simulate with explicit event and regime generators.
pub fn simulate_with<R: Rng + ?Sized, Q: Rng + ?Sized>(
    spec: &HawkesSpec,
    horizon: f64,
    event_rng: &mut R,
    regime_rng: &mut Q,
) -> Result<HawkesPath> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(LabError::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    let regime_path = match &spec.background {
        Background::Fixed(_) => None,
        Background::RegimeSwitched(r) => Some(simulate_regime_path(r, horizon, regime_rng)?),
    };
    let events = thin(spec, horizon, regime_path.as_ref(), event_rng)?;
    Ok(HawkesPath { events, regime_path })
}

/// Thinning on a given regime path (or none for a fixed background).
pub fn simulate_on_regime_path<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    horizon: f64,
    regime_path: Option<&RegimePath>,
    rng: &mut R,
) -> Result<EventStream> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(LabError::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    spec.check_regime_path(regime_path)?;
    thin(spec, horizon, regime_path, rng)
}

fn thin<R: Rng + ?Sized>(
    spec: &HawkesSpec,
    horizon: f64,
    regime_path: Option<&RegimePath>,
    rng: &mut R,
) -> Result<EventStream> {
    let segments = regime_path.map(|p| p.segments.as_slice()).unwrap_or(&[]);
    let mut seg = 0usize;
    let mut state = segments.first().map_or(0, |s| s.state);
    let mut base = spec.background_level(state);
    let mut refresh = segments.get(1).map_or(horizon, |s| s.start.min(horizon));

    let mut excitation = Excitation::new(spec);
    let mut times = Vec::new();
    let mut labels = regime_path.map(|_| Vec::new());
    let mut t = 0.0f64;

    loop {
        let bound = spec.link(base + excitation.at(t));
        let candidate = if bound > 0.0 {
            let w: f64 = Exp1.sample(rng);
            t + w / bound
        } else {
            f64::INFINITY
        };
        if candidate >= refresh {
            if refresh >= horizon {
                break;
            }
            t = refresh;
            seg += 1;
            state = segments[seg].state;
            base = spec.background_level(state);
            refresh = segments.get(seg + 1).map_or(horizon, |s| s.start.min(horizon));
            continue;
        }
        t = candidate;
        let intensity = spec.link(base + excitation.at(t));
        let u: f64 = rng.random();
        if u * bound <= intensity {
            times.push(t);
            if let Some(l) = labels.as_mut() {
                l.push(state);
            }
            excitation.add_event(t);
            if times.len() > spec.max_events {
                return Err(LabError::Explosion { events: times.len(), cap: spec.max_events });
            }
        }
    }
    Ok(EventStream { times, horizon, regimes: labels })
}

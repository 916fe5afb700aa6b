use serde::{Deserialize, Serialize};

use crate::chains::{RegimePath, RegimeSpec};
use crate::error::{LabError, Result};
use crate::kernels::Kernel;

/// Default cap on events per simulated path.
pub const DEFAULT_MAX_EVENTS: usize = 10_000_000;

/// Relative threshold (times the smallest background intensity) below which
/// a past power-law event is dropped when truncation is enabled.
pub const POWER_LAW_TRUNCATION: f64 = 1e-12;

/// Background intensity: a constant λ or ⟨λ, Y_t⟩ for a regime chain Y.
#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    Fixed(f64),
    RegimeSwitched(RegimeSpec),
}

/// Link function h applied to `background + excitation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Identity,
    /// `h(x) = min(max(x, 0), cap)`
    Saturating { cap: f64 },
    /// `h(x) = cap·(1 − exp(−slope·max(x, 0)))`
    ScaledSoft { cap: f64, slope: f64 },
}

impl Nonlinearity {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Identity => x,
            Nonlinearity::Saturating { cap } => x.max(0.0).min(cap),
            Nonlinearity::ScaledSoft { cap, slope } => cap * (-(-slope * x.max(0.0)).exp_m1()),
        }
    }

    /// Smallest valid Lipschitz constant.
    pub fn exact_lipschitz(&self) -> f64 {
        match *self {
            Nonlinearity::Identity | Nonlinearity::Saturating { .. } => 1.0,
            Nonlinearity::ScaledSoft { cap, slope } => cap * slope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearitySpec {
    pub kind: Nonlinearity,
    /// Declared Lipschitz constant of h.
    pub lip: f64,
}

impl NonlinearitySpec {
    /// `lip` defaults to the exact constant of the chosen family.
    pub fn new(kind: Nonlinearity, lip: Option<f64>) -> Result<Self> {
        let spec = NonlinearitySpec { kind, lip: lip.unwrap_or_else(|| kind.exact_lipschitz()) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity() -> Self {
        NonlinearitySpec { kind: Nonlinearity::Identity, lip: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            Nonlinearity::Identity => {}
            Nonlinearity::Saturating { cap } => {
                if !(cap > 0.0) || cap.is_nan() {
                    return Err(LabError::Validation(format!("saturation cap must be > 0, got {cap}")));
                }
            }
            Nonlinearity::ScaledSoft { cap, slope } => {
                if !(cap > 0.0 && cap.is_finite()) || !(slope > 0.0 && slope.is_finite()) {
                    return Err(LabError::Validation(format!(
                        "scaled-soft h needs cap > 0 and slope > 0, got cap={cap}, slope={slope}"
                    )));
                }
            }
        }
        if !(self.lip > 0.0) || !self.lip.is_finite() {
            return Err(LabError::Validation(format!("Lipschitz constant must be > 0, got {}", self.lip)));
        }
        let observed = self.grid_lipschitz();
        if observed > self.lip * (1.0 + 1e-9) {
            return Err(LabError::Validation(format!(
                "declared Lipschitz constant {} is below the observed slope {observed}",
                self.lip
            )));
        }
        Ok(())
    }

    /// Largest difference quotient of h over a grid on `[0, x_max]` (the
    /// range intensities live in), plus a check that h is non-negative and
    /// non-decreasing there.
    fn grid_lipschitz(&self) -> f64 {
        let x_max = match self.kind {
            Nonlinearity::Identity => 100.0,
            Nonlinearity::Saturating { cap } => 2.0 * cap.min(1e6),
            Nonlinearity::ScaledSoft { slope, .. } => 20.0 / slope,
        };
        let n = 4000;
        let step = x_max / n as f64;
        let mut worst = 0.0f64;
        let mut prev = self.kind.apply(0.0);
        if prev < 0.0 {
            return f64::INFINITY;
        }
        for i in 1..=n {
            let x = i as f64 * step;
            let v = self.kind.apply(x);
            if v < 0.0 || v < prev {
                return f64::INFINITY;
            }
            worst = worst.max((v - prev) / step);
            prev = v;
        }
        worst
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.kind.apply(x)
    }
}

/// Full point-process specification.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesSpec {
    pub background: Background,
    pub kernel: Kernel,
    /// `None` is the linear process; `Some(Identity)` is numerically the same
    /// process but is treated as nonlinear by the limit theory.
    pub nonlinearity: Option<NonlinearitySpec>,
    pub max_events: usize,
    /// Drop power-law history whose remaining contribution is negligible.
    pub truncate_power_law: bool,
}

impl HawkesSpec {
    pub fn linear(lambda: f64, kernel: Kernel) -> Result<Self> {
        let spec = HawkesSpec {
            background: Background::Fixed(lambda),
            kernel,
            nonlinearity: None,
            max_events: DEFAULT_MAX_EVENTS,
            truncate_power_law: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn regime_switched(regimes: RegimeSpec, kernel: Kernel) -> Result<Self> {
        let spec = HawkesSpec {
            background: Background::RegimeSwitched(regimes),
            kernel,
            nonlinearity: None,
            max_events: DEFAULT_MAX_EVENTS,
            truncate_power_law: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_nonlinearity(mut self, h: NonlinearitySpec) -> Result<Self> {
        self.nonlinearity = Some(h);
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_events(mut self, cap: usize) -> Self {
        self.max_events = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.background {
            Background::Fixed(l) => {
                if !(*l > 0.0) || !l.is_finite() {
                    return Err(LabError::Validation(format!("background intensity must be > 0, got {l}")));
                }
            }
            Background::RegimeSwitched(r) => r.validate()?,
        }
        self.kernel.validate()?;
        if let Some(h) = &self.nonlinearity {
            h.validate()?;
        }
        if self.max_events == 0 {
            return Err(LabError::Validation("max_events must be positive".into()));
        }
        Ok(())
    }

    pub fn is_regime_switched(&self) -> bool {
        matches!(self.background, Background::RegimeSwitched(_))
    }

    /// Background level for regime `state` (ignored for a fixed background).
    #[inline]
    pub fn background_level(&self, state: usize) -> f64 {
        match &self.background {
            Background::Fixed(l) => *l,
            Background::RegimeSwitched(r) => r.lambdas[state],
        }
    }

    pub(crate) fn min_background(&self) -> f64 {
        match &self.background {
            Background::Fixed(l) => *l,
            Background::RegimeSwitched(r) => r.lambdas.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    #[inline]
    pub fn link(&self, x: f64) -> f64 {
        match &self.nonlinearity {
            Some(h) => h.apply(x),
            None => x,
        }
    }

    /// Whether the intensity is an affine function of the excitation, so the
    /// compensator has a closed form.
    pub fn has_linear_intensity(&self) -> bool {
        matches!(
            self.nonlinearity,
            None | Some(NonlinearitySpec { kind: Nonlinearity::Identity, .. })
        )
    }

    /// Stability of the nonlinear process: lip(h)·μ̂ < 1.
    pub fn check_nonlinear_stability(&self) -> Result<f64> {
        let lip = self.nonlinearity.map_or(1.0, |h| h.lip);
        let mu_hat = self.kernel.branching_ratio().map_err(|e| LabError::NonStationary(e.to_string()))?;
        let product = lip * mu_hat;
        if product < 1.0 {
            Ok(product)
        } else {
            Err(LabError::NonStationary(format!(
                "lip(h)·μ̂ = {lip}·{mu_hat} = {product} is not below 1"
            )))
        }
    }

    /// Fixed-background copy pinned to regime `state`.
    pub fn frozen_in_regime(&self, state: usize) -> HawkesSpec {
        HawkesSpec { background: Background::Fixed(self.background_level(state)), ..self.clone() }
    }

    pub(crate) fn check_regime_path(&self, regime_path: Option<&RegimePath>) -> Result<()> {
        match (&self.background, regime_path) {
            (Background::Fixed(_), None) => Ok(()),
            (Background::RegimeSwitched(r), Some(p)) => {
                if p.segments.iter().any(|s| s.state >= r.n_regimes()) {
                    Err(LabError::Configuration("regime path visits an unknown regime".into()))
                } else {
                    Ok(())
                }
            }
            (Background::RegimeSwitched(_), None) => Err(LabError::Configuration(
                "regime-switched background requires a regime path".into(),
            )),
            (Background::Fixed(_), Some(_)) => Err(LabError::Configuration(
                "a regime path was supplied for a fixed background".into(),
            )),
        }
    }
}

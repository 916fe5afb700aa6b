//! Intensity, compensator and time-rescaled residuals.

use super::simulate::EventStream;
use super::spec::{Background, HawkesSpec};
use crate::chains::RegimePath;
use crate::error::{LabError, Result};
use crate::kernels::Kernel;
use crate::quadrature::integrate;

/// Relative tolerance of the quadrature fallback.
pub const QUADRATURE_REL_TOL: f64 = 1e-11;

fn background_at(spec: &HawkesSpec, regime_path: Option<&RegimePath>, t: f64) -> f64 {
    match (&spec.background, regime_path) {
        (Background::Fixed(l), _) => *l,
        (Background::RegimeSwitched(r), Some(p)) => r.lambdas[p.state_at(t)],
        (Background::RegimeSwitched(_), None) => unreachable!("checked by caller"),
    }
}

/// λ(t) = h(background(t) + Σ_{t_i < t} μ(t − t_i)).
pub fn intensity_at(
    spec: &HawkesSpec,
    history: &EventStream,
    regime_path: Option<&RegimePath>,
    t: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(LabError::Domain(format!("intensity requested at negative time {t}")));
    }
    spec.check_regime_path(regime_path)?;
    Ok(intensity_unchecked(spec, &history.times, regime_path, t))
}

#[inline]
fn intensity_unchecked(spec: &HawkesSpec, times: &[f64], regime_path: Option<&RegimePath>, t: f64) -> f64 {
    let past = times.partition_point(|&s| s < t);
    let excitation: f64 = times[..past].iter().map(|&s| spec.kernel.eval_unchecked(t - s)).sum();
    spec.link(background_at(spec, regime_path, t) + excitation)
}

/// ∫₀ᵗ background(s) ds.
fn background_integral(spec: &HawkesSpec, regime_path: Option<&RegimePath>, t: f64) -> f64 {
    match (&spec.background, regime_path) {
        (Background::Fixed(l), _) => l * t,
        (Background::RegimeSwitched(r), Some(p)) => {
            let mut acc = 0.0;
            for (i, seg) in p.segments.iter().enumerate() {
                if seg.start >= t {
                    break;
                }
                let end = p.segments.get(i + 1).map_or(t, |s| s.start.min(t));
                acc += r.lambdas[seg.state] * (end - seg.start);
            }
            acc
        }
        (Background::RegimeSwitched(_), None) => unreachable!("checked by caller"),
    }
}

fn check_time(t: f64, history: &EventStream) -> Result<()> {
    if !(t >= 0.0) || t > history.horizon {
        return Err(LabError::Domain(format!(
            "compensator requested at {t}, outside [0, {}]",
            history.horizon
        )));
    }
    Ok(())
}

/// Λ(t) = ∫₀ᵗ λ(s) ds.
///
/// Closed form whenever the intensity is affine in the excitation; adaptive
/// quadrature of [`intensity_at`] otherwise.
pub fn compensator(
    spec: &HawkesSpec,
    history: &EventStream,
    regime_path: Option<&RegimePath>,
    t: f64,
) -> Result<f64> {
    check_time(t, history)?;
    spec.check_regime_path(regime_path)?;
    if spec.has_linear_intensity() {
        Ok(closed_form(spec, &history.times, regime_path, t))
    } else {
        quadrature_between(spec, &history.times, regime_path, 0.0, t)
    }
}

/// Λ(t) by adaptive quadrature regardless of the kernel; the cross-check for
/// the closed form.
pub fn compensator_by_quadrature(
    spec: &HawkesSpec,
    history: &EventStream,
    regime_path: Option<&RegimePath>,
    t: f64,
) -> Result<f64> {
    check_time(t, history)?;
    spec.check_regime_path(regime_path)?;
    quadrature_between(spec, &history.times, regime_path, 0.0, t)
}

fn closed_form(spec: &HawkesSpec, times: &[f64], regime_path: Option<&RegimePath>, t: f64) -> f64 {
    let past = times.partition_point(|&s| s < t);
    let excitation: f64 = times[..past].iter().map(|&s| spec.kernel.integral_to(t - s)).sum();
    background_integral(spec, regime_path, t) + excitation
}

/// ∫ₐᵇ λ(s) ds, split at events and regime jumps so every piece is smooth.
fn quadrature_between(
    spec: &HawkesSpec,
    times: &[f64],
    regime_path: Option<&RegimePath>,
    a: f64,
    b: f64,
) -> Result<f64> {
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(times.iter().copied().filter(|&s| s > a && s < b));
    if let Some(p) = regime_path {
        cuts.extend(p.jump_times().filter(|&s| s > a && s < b));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = 0.5 * (lo + hi);
        let past = times.partition_point(|&s| s < mid);
        let state_level = background_at(spec, regime_path, mid);
        let hist = &times[..past];
        let f = |s: f64| {
            let exc: f64 = hist.iter().map(|&ti| spec.kernel.eval_unchecked(s - ti)).sum();
            spec.link(state_level + exc)
        };
        total += integrate(f, lo, hi, QUADRATURE_REL_TOL, 1e-300)?;
    }
    Ok(total)
}

/// Residuals r_i = Λ(t_i) − Λ(t_{i−1}) with t_0 = 0.
///
/// Under the true model these are i.i.d. Exponential(1).
pub fn time_rescale(
    events: &EventStream,
    spec: &HawkesSpec,
    regime_path: Option<&RegimePath>,
) -> Result<Vec<f64>> {
    events.validate()?;
    spec.check_regime_path(regime_path)?;
    let times = &events.times;
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if !spec.has_linear_intensity() {
        let mut out = Vec::with_capacity(times.len());
        let mut prev = 0.0;
        for &t in times {
            out.push(quadrature_between(spec, times, regime_path, prev, t)?);
            prev = t;
        }
        return Ok(out);
    }
    match spec.kernel {
        Kernel::Exponential { alpha, beta } => {
            // excitation level just after the previous event
            let mut level = 0.0;
            let mut prev = 0.0;
            let mut prev_base = 0.0;
            let mut out = Vec::with_capacity(times.len());
            for &t in times {
                let base = background_integral(spec, regime_path, t);
                let decay = (-beta * (t - prev)).exp();
                out.push(base - prev_base + level / beta * (1.0 - decay));
                level = level * decay + alpha;
                prev = t;
                prev_base = base;
            }
            Ok(out)
        }
        _ => {
            let mut out = Vec::with_capacity(times.len());
            let mut prev = 0.0;
            for &t in times {
                let cur = closed_form(spec, times, regime_path, t);
                out.push(cur - prev);
                prev = cur;
            }
            Ok(out)
        }
    }
}

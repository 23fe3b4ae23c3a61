//! Credible intervals and interval-overlap decisions.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{inv_logit, normal_quantile};

/// Fewest samples accepted by the interval estimators.
pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PosteriorError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    InsufficientSamples(usize),
    #[error("mass must lie in (0, 1), got {0}")]
    InvalidMass(f64),
    #[error("intervals have different mass ({0} vs {1})")]
    MassMismatch(f64, f64),
    #[error("samples contain non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub mass: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

fn sorted(samples: &[f64], mass: f64) -> Result<Vec<f64>, PosteriorError> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(PosteriorError::InvalidMass(mass));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(PosteriorError::InsufficientSamples(samples.len()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(PosteriorError::NonFinite);
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Number of points a window of `mass` must cover out of `n`. The small
/// offset keeps products like `0.9 * 100` from rounding up past the
/// intended integer.
fn window_len(mass: f64, n: usize) -> usize {
    let w = libm::ceil(mass * n as f64 - 1e-9) as usize;
    w.clamp(1, n)
}

/// Narrowest window of `ceil(mass * N)` consecutive sorted samples; ties go
/// to the lowest start.
pub fn hpdi(samples: &[f64], mass: f64) -> Result<Interval, PosteriorError> {
    let v = sorted(samples, mass)?;
    Ok(hpdi_sorted(&v, mass))
}

pub(crate) fn hpdi_sorted(v: &[f64], mass: f64) -> Interval {
    let w = window_len(mass, v.len());
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for i in 0..=v.len() - w {
        let width = v[i + w - 1] - v[i];
        if width < best_width {
            best_width = width;
            best = i;
        }
    }
    Interval {
        low: v[best],
        high: v[best + w - 1],
        mass,
    }
}

/// Linear-interpolation quantile of sorted data (`(n-1)p` positions).
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Equal-tailed interval.
pub fn quantile_interval(samples: &[f64], mass: f64) -> Result<Interval, PosteriorError> {
    let v = sorted(samples, mass)?;
    let tail = (1.0 - mass) / 2.0;
    Ok(Interval {
        low: quantile_sorted(&v, tail),
        high: quantile_sorted(&v, 1.0 - tail),
        mass,
    })
}

/// `|a ∩ b| / min(width(a), width(b))`. A zero-width interval counts as
/// fully overlapping when its point lies inside the other interval.
pub fn overlap_fraction(a: &Interval, b: &Interval) -> Result<f64, PosteriorError> {
    if (a.mass - b.mass).abs() > 1e-12 {
        return Err(PosteriorError::MassMismatch(a.mass, b.mass));
    }
    let (narrow, wide) = if a.width() <= b.width() { (a, b) } else { (b, a) };
    if narrow.width() == 0.0 {
        return Ok(if wide.contains(narrow.low) { 1.0 } else { 0.0 });
    }
    let inter = (a.high.min(b.high) - a.low.max(b.low)).max(0.0);
    Ok((inter / narrow.width()).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Equivalent,
    Inconclusive,
    Different,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Equivalent => "equivalent",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Different => "different",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapDecision {
    pub verdict: Verdict,
    pub overlap_fraction: f64,
}

pub const DEFAULT_EQUIVALENCE: f64 = 0.99;

/// Verdict from an overlap fraction: none is different, at least
/// `threshold` is equivalent, anything between is inconclusive.
pub fn verdict_for(fraction: f64, threshold: f64) -> Verdict {
    if fraction <= 0.0 {
        Verdict::Different
    } else if fraction >= threshold {
        Verdict::Equivalent
    } else {
        Verdict::Inconclusive
    }
}

pub fn compare_intervals(a: &Interval, b: &Interval, threshold: f64) -> Result<OverlapDecision, PosteriorError> {
    let f = overlap_fraction(a, b)?;
    Ok(OverlapDecision {
        verdict: verdict_for(f, threshold),
        overlap_fraction: f,
    })
}

pub fn to_probability_scale(samples: &[f64]) -> Vec<f64> {
    samples.iter().map(|&x| inv_logit(x)).collect()
}

/// Fraction of samples strictly above `threshold`.
pub fn threshold_exceedance(samples: &[f64], threshold: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|&&x| x > threshold).count() as f64 / samples.len() as f64
}

/// True when the HPDI is much wider than a normal distribution with the
/// same interquartile range would give, a hint of several modes.
pub fn multimodal_hint(samples: &[f64], mass: f64) -> Result<bool, PosteriorError> {
    let v = sorted(samples, mass)?;
    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
    let z = normal_quantile(0.5 + mass / 2.0).map_err(|_| PosteriorError::InvalidMass(mass))?;
    let expected = 2.0 * z * iqr / 1.349;
    Ok(hpdi_sorted(&v, mass).width() > 1.5 * expected)
}

//! Convergence diagnostics and posterior summaries.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{constrain, ParameterLayout};
use crate::posterior::{hpdi, PosteriorError};
use crate::sampler::Draws;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("need at least 4 draws per chain and equal chain lengths")]
    InsufficientDraws,
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("no draws")]
    Empty,
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Density(#[from] crate::density::DensityError),
}

fn check_chains<C: AsRef<[f64]>>(chains: &[C]) -> Result<usize, DiagnosticsError> {
    let n = chains.first().map_or(0, |c| c.as_ref().len());
    if n < 4 || chains.iter().any(|c| c.as_ref().len() != n) {
        return Err(DiagnosticsError::InsufficientDraws);
    }
    Ok(n)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split-R̂: each chain is halved (dropping the middle draw of odd-length
/// chains) and the potential scale reduction is computed on the halves.
/// `None` when the within-chain variance is zero.
pub fn split_rhat<C: AsRef<[f64]>>(chains: &[C]) -> Result<Option<f64>, DiagnosticsError> {
    let n = check_chains(chains)?;
    let half = n / 2;
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c = c.as_ref();
        halves.push(&c[..half]);
        halves.push(&c[n - half..]);
    }
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| sample_var(h)).sum::<f64>() / halves.len() as f64;
    let b = half as f64 * sample_var(&means);
    if !(w > 0.0) || !w.is_finite() {
        return Ok(None);
    }
    let nf = half as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok(Some(libm::sqrt(var_plus / w)))
}

fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64
}

/// Effective sample size across chains with Geyer's initial monotone
/// sequence truncation. Autocovariances are computed directly, one lag at
/// a time, only as far as the truncation needs. The estimate can exceed
/// the draw count for antithetic chains; the integrated autocorrelation
/// time is floored at `1 / log10(total)` so it never turns negative.
/// `None` when the within-chain variance is zero.
pub fn ess<C: AsRef<[f64]>>(chains: &[C]) -> Result<Option<f64>, DiagnosticsError> {
    let n = check_chains(chains)?;
    let m = chains.len();
    let chains: Vec<&[f64]> = chains.iter().map(|c| c.as_ref()).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov_mean = |lag: usize| -> f64 {
        chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, lag)).sum::<f64>() / m as f64
    };
    let nf = n as f64;
    let mean_var = acov_mean(0) * nf / (nf - 1.0);
    if !(mean_var > 0.0) || !mean_var.is_finite() {
        return Ok(None);
    }
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_var(&means);
    }
    let rho = |lag: usize| 1.0 - (mean_var - acov_mean(lag)) / var_plus;

    let mut rho_hat = vec![0.0; n + 1];
    rho_hat[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[1] = odd;
    let mut s = 1;
    while s + 4 < n && even + odd > 0.0 {
        even = rho(s + 1);
        odd = rho(s + 2);
        if even + odd >= 0.0 {
            rho_hat[s + 1] = even;
            rho_hat[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_hat[max_s] > 0.0 {
        rho_hat[max_s + 1] = rho_hat[max_s];
    }
    let mut t = 1;
    while t + 3 <= max_s {
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t] {
            rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2.0;
            rho_hat[t + 2] = rho_hat[t + 1];
        }
        t += 2;
    }
    let total = m as f64 * nf;
    let tau = -1.0 + 2.0 * rho_hat[..max_s].iter().sum::<f64>() + rho_hat[max_s + 1];
    let tau = tau.max(1.0 / libm::log10(total));
    Ok(Some(total / tau))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceCounts {
    pub per_chain: Vec<usize>,
    pub total: usize,
}

pub fn divergence_count(draws: &Draws) -> DivergenceCounts {
    let per_chain: Vec<usize> = draws
        .chains
        .iter()
        .map(|c| c.stats.iter().filter(|s| s.divergent).count())
        .collect();
    let total = per_chain.iter().sum();
    DivergenceCounts { per_chain, total }
}

/// Constrained series of one named quantity, one vector per chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSeries {
    pub name: String,
    pub chains: Vec<Vec<f64>>,
}

impl ParamSeries {
    pub fn pooled(&self) -> Vec<f64> {
        self.chains.concat()
    }
}

/// Layout scalars followed by derived effects (see
/// [`ParameterLayout::derived_names`]).
pub fn all_series(draws: &Draws, layout: &ParameterLayout) -> Result<Vec<ParamSeries>, DiagnosticsError> {
    let mut out: Vec<ParamSeries> = draws
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| ParamSeries {
            name: name.clone(),
            chains: draws.series(i),
        })
        .collect();
    let derived_names = layout.derived_names();
    let mut derived: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(draws.samples); draws.n_chains()]; derived_names.len()];
    for c in 0..draws.n_chains() {
        for t in 0..draws.samples {
            let values = constrain(layout, draws.position(c, t))?.derived(layout);
            for (j, v) in values.into_iter().enumerate() {
                derived[j][c].push(v);
            }
        }
    }
    out.extend(
        derived_names
            .into_iter()
            .zip(derived)
            .map(|(name, chains)| ParamSeries { name, chains }),
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    pub hpdi_low: f64,
    pub hpdi_high: f64,
    pub n_eff: Option<f64>,
    pub r_hat: Option<f64>,
    pub divergences: usize,
}

/// Summary of one series; R̂ and ESS are `None` when undefined.
pub fn summarize(series: &ParamSeries, mass: f64, divergences: usize) -> Result<SummaryRow, DiagnosticsError> {
    let pooled = series.pooled();
    if pooled.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let interval = hpdi(&pooled, mass)?;
    let enough = series.chains.first().is_some_and(|c| c.len() >= 4);
    let (n_eff, r_hat) = if enough {
        (ess(&series.chains)?, split_rhat(&series.chains)?)
    } else {
        (None, None)
    };
    Ok(SummaryRow {
        parameter: series.name.clone(),
        mean: mean(&pooled),
        sd: if pooled.len() > 1 { libm::sqrt(sample_var(&pooled)) } else { 0.0 },
        hpdi_low: interval.low,
        hpdi_high: interval.high,
        n_eff,
        r_hat,
        divergences,
    })
}

/// One row per layout scalar and per derived effect, in that order.
pub fn summary_table(draws: &Draws, layout: &ParameterLayout, mass: f64) -> Result<Vec<SummaryRow>, DiagnosticsError> {
    if draws.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    let divergences = divergence_count(draws).total;
    all_series(draws, layout)?
        .iter()
        .map(|s| summarize(s, mass, divergences))
        .collect()
}

/// Post-warmup sequence of `parameter` per chain; derived names are
/// accepted too.
pub fn trace_series(draws: &Draws, layout: &ParameterLayout, parameter: &str) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    if let Some(i) = draws.param_index(parameter) {
        return Ok(draws.series(i));
    }
    let j = layout
        .derived_names()
        .iter()
        .position(|n| n == parameter)
        .ok_or_else(|| DiagnosticsError::UnknownParameter(parameter.into()))?;
    let mut out = vec![Vec::with_capacity(draws.samples); draws.n_chains()];
    for (c, chain) in out.iter_mut().enumerate() {
        for t in 0..draws.samples {
            chain.push(constrain(layout, draws.position(c, t))?.derived(layout)[j]);
        }
    }
    Ok(out)
}

/// Pass/fail thresholds for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcThresholds {
    pub max_rhat: f64,
    pub max_divergences: usize,
    pub min_ess: f64,
}

impl Default for QcThresholds {
    fn default() -> Self {
        Self {
            max_rhat: 1.01,
            max_divergences: 0,
            min_ess: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub passed: bool,
    pub divergences: DivergenceCounts,
    pub max_rhat: Option<f64>,
    pub min_ess: Option<f64>,
    pub failures: Vec<String>,
}

/// Checks every summary row against `thresholds`. Rows whose statistic is
/// undefined (constant draws) are skipped.
pub fn quality_check(draws: &Draws, rows: &[SummaryRow], thresholds: &QcThresholds) -> QcReport {
    let divergences = divergence_count(draws);
    let max_rhat = rows.iter().filter_map(|r| r.r_hat).reduce(f64::max);
    let min_ess = rows.iter().filter_map(|r| r.n_eff).reduce(f64::min);
    let mut failures = Vec::new();
    if divergences.total > thresholds.max_divergences {
        failures.push(alloc::format!(
            "{} divergent transitions (allowed {})",
            divergences.total,
            thresholds.max_divergences
        ));
    }
    for r in rows {
        if let Some(rh) = r.r_hat {
            if rh > thresholds.max_rhat {
                failures.push(alloc::format!("{}: r_hat {:.4} > {}", r.parameter, rh, thresholds.max_rhat));
            }
        }
        if let Some(n) = r.n_eff {
            if n < thresholds.min_ess {
                failures.push(alloc::format!("{}: n_eff {:.0} < {}", r.parameter, n, thresholds.min_ess));
            }
        }
    }
    QcReport {
        passed: failures.is_empty(),
        divergences,
        max_rhat,
        min_ess,
        failures,
    }
}

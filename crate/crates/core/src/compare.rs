//! WAIC and model ranking.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CellTable;
use crate::density::{constrain, pointwise_log_lik, pointwise_trial_log_lik, DensityError, ParameterLayout};
use crate::modelspec::LikelihoodFamily;
use crate::sampler::Draws;
use crate::special::log_sum_exp;

/// Fewer draws than this trigger a warning.
pub const RECOMMENDED_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("log-likelihood matrix has non-finite entries")]
    NonFinite,
    #[error("matrix shape {draws}x{cells} does not match {len} values")]
    Shape { draws: usize, cells: usize, len: usize },
    #[error("matrix needs at least one draw and one observation")]
    Empty,
    #[error("observations differ between models {0} and {1}")]
    Misaligned(String, String),
    #[error("need at least 2 models to compare, got {0}")]
    TooFewModels(usize),
    #[error("per-trial pointwise log-likelihood is only defined for binomial models")]
    TrialsNeedBinomial,
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Pointwise log-likelihoods, draws × observations, row-major. Optional
/// weights make one column stand for several identical observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikMatrix {
    pub model: String,
    pub cell_ids: Vec<String>,
    pub draws: usize,
    pub values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl LogLikMatrix {
    pub fn new(model: impl Into<String>, cell_ids: Vec<String>, draws: usize, values: Vec<f64>) -> Self {
        Self {
            model: model.into(),
            cell_ids,
            draws,
            values,
            weights: None,
        }
    }

    pub fn cells(&self) -> usize {
        self.cell_ids.len()
    }

    /// Pointwise log-likelihood per cell over every post-warmup draw.
    pub fn from_draws(layout: &ParameterLayout, draws: &Draws, cells: &CellTable) -> Result<Self, CompareError> {
        let mut values = Vec::with_capacity(draws.n_chains() * draws.samples * cells.len());
        for c in 0..draws.n_chains() {
            for t in 0..draws.samples {
                let draw = constrain(layout, draws.position(c, t))?;
                values.extend(pointwise_log_lik(layout, &draw, cells)?);
            }
        }
        Ok(Self::new(
            layout.model_name.clone(),
            cells.cell_ids(),
            draws.n_chains() * draws.samples,
            values,
        ))
    }

    /// One weighted column per cell outcome (successes, failures) so that
    /// every Bernoulli trial counts as an observation.
    pub fn from_draws_per_trial(
        layout: &ParameterLayout,
        draws: &Draws,
        cells: &CellTable,
    ) -> Result<Self, CompareError> {
        if layout.family != LikelihoodFamily::BinomialLogit {
            return Err(CompareError::TrialsNeedBinomial);
        }
        let mut ids = Vec::new();
        for (i, cell) in cells.cells.iter().enumerate() {
            let id = cells.cell_id(i);
            if cell.k > 0 {
                ids.push(format!("{id}|success"));
            }
            if cell.n > cell.k {
                ids.push(format!("{id}|failure"));
            }
        }
        let mut values = Vec::new();
        let mut weights = None;
        for c in 0..draws.n_chains() {
            for t in 0..draws.samples {
                let draw = constrain(layout, draws.position(c, t))?;
                let (v, w) = pointwise_trial_log_lik(layout, &draw, cells)?;
                values.extend(v);
                weights.get_or_insert(w);
            }
        }
        Ok(Self {
            model: layout.model_name.clone(),
            cell_ids: ids,
            draws: draws.n_chains() * draws.samples,
            values,
            weights,
        })
    }

    fn check(&self) -> Result<(), CompareError> {
        let cells = self.cells();
        if self.draws == 0 || cells == 0 {
            return Err(CompareError::Empty);
        }
        if self.values.len() != self.draws * cells || self.weights.as_ref().is_some_and(|w| w.len() != cells) {
            return Err(CompareError::Shape {
                draws: self.draws,
                cells,
                len: self.values.len(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(CompareError::NonFinite);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub model: String,
    pub elpd_waic: f64,
    pub p_waic: f64,
    pub lppd: f64,
    /// `-2 * elpd_waic`.
    pub waic_deviance: f64,
    pub se: f64,
    /// Per-column `lppd_i - p_waic_i` (unweighted).
    pub pointwise: Vec<f64>,
    pub cell_ids: Vec<String>,
    pub weights: Option<Vec<f64>>,
    pub n_draws: usize,
    pub warning: Option<String>,
}

impl WaicResult {
    /// Number of observations, counting weights.
    pub fn n_obs(&self) -> f64 {
        match &self.weights {
            Some(w) => w.iter().sum(),
            None => self.pointwise.len() as f64,
        }
    }
}

/// `sqrt(N * var(x))` with the sample variance of the (weighted) values.
fn se_of(x: &[f64], weights: Option<&[f64]>) -> f64 {
    let (n, sum) = match weights {
        Some(w) => (w.iter().sum::<f64>(), x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()),
        None => (x.len() as f64, x.iter().sum::<f64>()),
    };
    if n < 2.0 {
        return 0.0;
    }
    let mean = sum / n;
    let ss = match weights {
        Some(w) => x.iter().zip(w).map(|(a, b)| b * (a - mean) * (a - mean)).sum::<f64>(),
        None => x.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>(),
    };
    libm::sqrt(n * ss / (n - 1.0))
}

pub fn waic(m: &LogLikMatrix) -> Result<WaicResult, CompareError> {
    m.check()?;
    let (s, n) = (m.draws, m.cells());
    let ln_s = libm::log(s as f64);
    let mut column = Vec::with_capacity(s);
    let mut pointwise = Vec::with_capacity(n);
    let mut lppd_i = Vec::with_capacity(n);
    let mut p_i = Vec::with_capacity(n);
    for i in 0..n {
        column.clear();
        column.extend((0..s).map(|d| m.values[d * n + i]));
        let lppd = log_sum_exp(&column) - ln_s;
        let mean = column.iter().sum::<f64>() / s as f64;
        let var = if s > 1 {
            column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s as f64 - 1.0)
        } else {
            0.0
        };
        lppd_i.push(lppd);
        p_i.push(var);
        pointwise.push(lppd - var);
    }
    let weighted_sum = |x: &[f64]| match &m.weights {
        Some(w) => x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>(),
        None => x.iter().sum::<f64>(),
    };
    let lppd = weighted_sum(&lppd_i);
    let p_waic = weighted_sum(&p_i);
    let elpd = lppd - p_waic;
    Ok(WaicResult {
        model: m.model.clone(),
        elpd_waic: elpd,
        p_waic,
        lppd,
        waic_deviance: -2.0 * elpd,
        se: se_of(&pointwise, m.weights.as_deref()),
        pointwise,
        cell_ids: m.cell_ids.clone(),
        weights: m.weights.clone(),
        n_draws: s,
        warning: (s < RECOMMENDED_DRAWS)
            .then(|| format!("only {s} draws; at least {RECOMMENDED_DRAWS} are recommended")),
    })
}

/// `elpd_a - elpd_b` and its standard error.
pub fn waic_diff(a: &WaicResult, b: &WaicResult) -> Result<(f64, f64), CompareError> {
    if a.cell_ids != b.cell_ids || a.weights != b.weights {
        return Err(CompareError::Misaligned(a.model.clone(), b.model.clone()));
    }
    let d: Vec<f64> = a.pointwise.iter().zip(&b.pointwise).map(|(x, y)| x - y).collect();
    let delta = match &a.weights {
        Some(w) => d.iter().zip(w).map(|(x, y)| x * y).sum(),
        None => d.iter().sum(),
    };
    Ok((delta, se_of(&d, a.weights.as_deref())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub model: String,
    pub elpd_waic: f64,
    pub p_waic: f64,
    pub se: f64,
    pub waic_deviance: f64,
    /// `elpd_best - elpd_this` (zero for the best model).
    pub delta_vs_best: f64,
    pub se_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDelta {
    pub better: String,
    pub worse: String,
    pub delta: f64,
    pub se: f64,
    /// `|delta| <= 2 * se`.
    pub indistinct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// Indices into the input, best first.
    pub order: Vec<usize>,
    pub entries: Vec<RankEntry>,
    /// Every pair in ranked order.
    pub pairs: Vec<PairwiseDelta>,
}

/// Sorts by descending elpd (ties keep input order).
pub fn rank_models(results: &[WaicResult]) -> Result<Ranking, CompareError> {
    if results.len() < 2 {
        return Err(CompareError::TooFewModels(results.len()));
    }
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[b].elpd_waic.total_cmp(&results[a].elpd_waic));
    let best = &results[order[0]];
    let mut entries = Vec::with_capacity(results.len());
    for &i in &order {
        let r = &results[i];
        let (delta, se) = waic_diff(best, r)?;
        entries.push(RankEntry {
            model: r.model.clone(),
            elpd_waic: r.elpd_waic,
            p_waic: r.p_waic,
            se: r.se,
            waic_deviance: r.waic_deviance,
            delta_vs_best: delta,
            se_delta: se,
        });
    }
    let mut pairs = Vec::new();
    for (x, &i) in order.iter().enumerate() {
        for &j in &order[x + 1..] {
            let (delta, se) = waic_diff(&results[i], &results[j])?;
            pairs.push(PairwiseDelta {
                better: results[i].model.clone(),
                worse: results[j].model.clone(),
                delta,
                se,
                indistinct: delta.abs() <= 2.0 * se,
            });
        }
    }
    Ok(Ranking { order, entries, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn constant_matrix() {
        let m = LogLikMatrix::new("m", ids(3), 4, vec![-0.7; 12]);
        let w = waic(&m).unwrap();
        assert!((w.lppd - 3.0 * -0.7).abs() < 1e-15);
        assert_eq!(w.p_waic, 0.0);
        assert_eq!(w.elpd_waic, w.lppd);
        assert_eq!(w.waic_deviance, -2.0 * w.elpd_waic);
        assert!(w.warning.is_some());
    }

    #[test]
    fn bad_input() {
        let m = LogLikMatrix::new("m", ids(2), 2, vec![0.0, f64::NAN, 0.0, 0.0]);
        assert_eq!(waic(&m), Err(CompareError::NonFinite));
        let m = LogLikMatrix::new("m", ids(2), 2, vec![0.0; 3]);
        assert!(matches!(waic(&m), Err(CompareError::Shape { .. })));
    }

    #[test]
    fn identical_models_are_indistinct() {
        let m = LogLikMatrix::new("a", ids(2), 3, vec![-1.0, -2.0, -1.5, -2.5, -0.5, -1.0]);
        let a = waic(&m).unwrap();
        let mut b = a.clone();
        b.model = "b".into();
        assert_eq!(waic_diff(&a, &b).unwrap(), (0.0, 0.0));
        assert_eq!(rank_models(core::slice::from_ref(&a)), Err(CompareError::TooFewModels(1)));
        let r = rank_models(&[a, b]).unwrap();
        assert!(r.pairs[0].indistinct);
    }

    #[test]
    fn ranking_order() {
        let mk = |name: &str, elpd: f64| {
            let mut w = waic(&LogLikMatrix::new(name, ids(1), 1, vec![elpd])).unwrap();
            w.model = name.into();
            w
        };
        let r = rank_models(&[mk("a", -100.0), mk("b", -150.0), mk("c", -90.0)]).unwrap();
        assert_eq!(r.order, [2, 0, 1]);
        assert_eq!(r.entries[1].delta_vs_best, 10.0);
    }
}

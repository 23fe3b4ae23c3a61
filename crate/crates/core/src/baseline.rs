//! Conventional statistics for side-by-side contrast: empirical means with
//! standard errors and Student t-tests.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::reg_incomplete_beta;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("empty sample")]
    Empty,
    #[error("each group needs at least 2 observations")]
    TooFew,
    #[error("both groups have zero variance")]
    ZeroVariance,
    #[error("paired differences have zero variance")]
    ZeroDifferenceVariance,
    #[error("paired samples have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),
}

/// Sample mean and standard error (`sd / sqrt(n)`, `n - 1` denominator);
/// the error is `None` for a single observation.
pub fn mean_sem(samples: &[f64]) -> Result<(f64, Option<f64>), BaselineError> {
    if samples.is_empty() {
        return Err(BaselineError::Empty);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return Ok((mean, None));
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, Some(libm::sqrt(var / n))))
}

/// `P(T <= t)` for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64, BaselineError> {
    if !(df > 0.0) {
        return Err(BaselineError::InvalidDf(df));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    let tail = 0.5 * two_sided_p(t, df);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// `P(|T| >= |t|)`.
fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    reg_incomplete_beta(x, df / 2.0, 0.5).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TTestMethod {
    IndependentWelch,
    IndependentPooled,
    Paired,
}

impl TTestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TTestMethod::IndependentWelch => "independent-welch",
            TTestMethod::IndependentPooled => "independent-pooled",
            TTestMethod::Paired => "paired",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variance {
    Welch,
    Pooled,
}

/// How a paired test treats samples of different lengths. Padding the
/// shorter sample is deliberately not offered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "policy")]
pub enum ImbalancePolicy {
    Error,
    /// Draw the shorter length from the longer sample without replacement,
    /// keeping the original order.
    Subsample { seed: u64 },
    /// Keep the leading elements of the longer sample.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub method: TTestMethod,
    pub imbalance_policy: Option<ImbalancePolicy>,
}

fn moments(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (n, mean, var)
}

/// Two-sample t-test; positive `t` means `mean(x) > mean(y)`.
pub fn t_test_independent(x: &[f64], y: &[f64], variance: Variance) -> Result<TTestResult, BaselineError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(BaselineError::TooFew);
    }
    let (nx, mx, vx) = moments(x);
    let (ny, my, vy) = moments(y);
    if vx == 0.0 && vy == 0.0 {
        return Err(BaselineError::ZeroVariance);
    }
    let (t, df, method) = match variance {
        Variance::Welch => {
            let (ax, ay) = (vx / nx, vy / ny);
            let t = (mx - my) / libm::sqrt(ax + ay);
            let df = (ax + ay) * (ax + ay) / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0));
            (t, df, TTestMethod::IndependentWelch)
        }
        Variance::Pooled => {
            let df = nx + ny - 2.0;
            let sp2 = ((nx - 1.0) * vx + (ny - 1.0) * vy) / df;
            let t = (mx - my) / libm::sqrt(sp2 * (1.0 / nx + 1.0 / ny));
            (t, df, TTestMethod::IndependentPooled)
        }
    };
    Ok(TTestResult {
        t,
        df,
        p: two_sided_p(t, df),
        method,
        imbalance_policy: None,
    })
}

fn subsample(longer: &[f64], len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, longer.len(), len).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| longer[i]).collect()
}

/// One-sample t-test on `x - y` after reconciling lengths with `policy`.
pub fn t_test_paired(x: &[f64], y: &[f64], policy: ImbalancePolicy) -> Result<TTestResult, BaselineError> {
    let (x, y): (Vec<f64>, Vec<f64>) = if x.len() == y.len() {
        (x.to_vec(), y.to_vec())
    } else {
        let n = x.len().min(y.len());
        match policy {
            ImbalancePolicy::Error => return Err(BaselineError::LengthMismatch(x.len(), y.len())),
            ImbalancePolicy::Truncate => (x[..n].to_vec(), y[..n].to_vec()),
            ImbalancePolicy::Subsample { seed } => {
                if x.len() > y.len() {
                    (subsample(x, n, seed), y.to_vec())
                } else {
                    (x.to_vec(), subsample(y, n, seed))
                }
            }
        }
    };
    if x.len() < 2 {
        return Err(BaselineError::TooFew);
    }
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    let (n, mean, var) = moments(&d);
    if var == 0.0 {
        return Err(BaselineError::ZeroDifferenceVariance);
    }
    let t = mean / libm::sqrt(var / n);
    let df = n - 1.0;
    Ok(TTestResult {
        t,
        df,
        p: two_sided_p(t, df),
        method: TTestMethod::Paired,
        imbalance_policy: Some(policy),
    })
}

//! Declarative hierarchical GLM descriptions and the builtin models.
//!
//! A model is a list of *levels* (group effects on the logit scale), an
//! optional list of *slopes* (group-indexed coefficients multiplying a
//! covariate) and a likelihood. The linear predictor of a cell is the sum of
//! the `predictor_terms`, each resolved at the cell's factor labels.
//!
//! Every level has a mean and an optional scale. With a scale, the level's
//! value is `mean + sigma * z` (non-centered) or is drawn directly from
//! `Normal(mean, sigma)` (centered). Without one it equals its mean.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CellTable;

mod config;
pub use config::{parse_model_config, render_model_config};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("unknown builtin model {0:?}")]
    UnknownBuiltin(String),
    #[error("duplicate component name {0:?}")]
    DuplicateName(String),
    #[error("level {level:?} names unknown parent {parent:?}")]
    UnknownParent { level: String, parent: String },
    #[error("cycle in level parents through {0:?}")]
    Cycle(String),
    #[error("level {level:?} parent {parent:?} must be declared earlier")]
    ParentOrder { level: String, parent: String },
    #[error("{0}")]
    InvalidPrior(String),
    #[error("betabinomial likelihood requires a positive-support dispersion prior")]
    MissingDispersion,
    #[error("binomial likelihood takes no dispersion prior")]
    UnexpectedDispersion,
    #[error("predictor term {0:?} is not a declared level or slope")]
    UnknownTerm(String),
    #[error("predictor has no level term")]
    NoLevelTerm,
    #[error("{component:?}: {message}")]
    Structure { component: String, message: String },
    #[error("model does not validate against the data: {0}")]
    Validation(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Prior family with strictly positive scale/shape/rate parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorSpec {
    Normal { mu: f64, sd: f64 },
    HalfNormal { sd: f64 },
    /// Shape–rate parameterization: mean `shape / rate`.
    Gamma { shape: f64, rate: f64 },
}

impl PriorSpec {
    pub fn normal(mu: f64, sd: f64) -> Self {
        Self::Normal { mu, sd }
    }

    pub fn half_normal(sd: f64) -> Self {
        Self::HalfNormal { sd }
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        Self::Gamma { shape, rate }
    }

    pub fn positive_support(&self) -> bool {
        !matches!(self, Self::Normal { .. })
    }

    pub fn check(&self) -> Result<(), SpecError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            Self::Normal { mu, sd } => mu.is_finite() && ok(sd),
            Self::HalfNormal { sd } => ok(sd),
            Self::Gamma { shape, rate } => ok(shape) && ok(rate),
        };
        if valid {
            Ok(())
        } else {
            Err(SpecError::InvalidPrior(alloc::format!("invalid prior parameters in {self}")))
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Normal { mu, sd } => write!(f, "Normal({mu:?}, {sd:?})"),
            Self::HalfNormal { sd } => write!(f, "HalfNormal({sd:?})"),
            Self::Gamma { shape, rate } => write!(f, "Gamma({shape:?}, {rate:?})"),
        }
    }
}

/// Location of a level or slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanSpec {
    /// The parent level's value at the projected index.
    Parent,
    /// A fixed location (e.g. centered task deviations).
    Constant { value: f64 },
    /// A free location parameter with a Normal prior. When the level has a
    /// parent, the prior is centered at `parent value + mu`.
    Prior {
        prior: PriorSpec,
        /// One location per level element instead of a single shared one.
        #[serde(default)]
        per_element: bool,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
    /// Factors whose observed label combinations index this level.
    #[serde(default)]
    pub indexed_by: Vec<String>,
    pub mean: MeanSpec,
    #[serde(default)]
    pub sigma_prior: Option<PriorSpec>,
    #[serde(default = "default_true")]
    pub noncentered: bool,
}

impl LevelSpec {
    pub fn new(name: &str, indexed_by: &[&str], mean: MeanSpec, sigma: Option<PriorSpec>) -> Self {
        Self {
            name: name.to_string(),
            parent: None,
            indexed_by: indexed_by.iter().map(|s| s.to_string()).collect(),
            mean,
            sigma_prior: sigma,
            noncentered: true,
        }
    }

    pub fn with_parent(mut self, parent: &str) -> Self {
        self.parent = Some(parent.to_string());
        self
    }
}

/// Group-indexed coefficient on a numeric covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSpec {
    pub name: String,
    pub covariate: String,
    #[serde(default)]
    pub indexed_by: Vec<String>,
    pub mean: MeanSpec,
    #[serde(default)]
    pub sigma_prior: Option<PriorSpec>,
    #[serde(default = "default_true")]
    pub noncentered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodFamily {
    BinomialLogit,
    BetabinomialLogit,
}

impl LikelihoodFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BinomialLogit => "binomial-logit",
            Self::BetabinomialLogit => "betabinomial-logit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodSpec {
    pub family: LikelihoodFamily,
    /// Prior on φ; `α = p·φ`, `β = (1 − p)·φ`.
    #[serde(default)]
    pub dispersion_prior: Option<PriorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub likelihood: LikelihoodSpec,
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub slopes: Vec<SlopeSpec>,
    pub predictor_terms: Vec<String>,
}

/// Names accepted by [`builtin_spec`].
pub const BUILTIN_NAMES: [&str; 5] = [
    "use_case1",
    "use_case2",
    "reasoning_binomial",
    "reasoning_betabinomial",
    "null_binomial",
];

impl ModelSpec {
    pub fn level(&self, name: &str) -> Option<&LevelSpec> {
        self.levels.iter().find(|l| l.name == name)
    }

    pub fn slope(&self, name: &str) -> Option<&SlopeSpec> {
        self.slopes.iter().find(|s| s.name == name)
    }

    /// Factor names the model indexes by, in first-use order.
    pub fn factors(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let all = self
            .levels
            .iter()
            .flat_map(|l| l.indexed_by.iter())
            .chain(self.slopes.iter().flat_map(|s| s.indexed_by.iter()));
        for f in all {
            if !out.contains(f) {
                out.push(f.clone());
            }
        }
        out
    }

    pub fn covariates(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.slopes {
            if !out.contains(&s.covariate) {
                out.push(s.covariate.clone());
            }
        }
        out
    }

    /// Structural checks independent of any data.
    pub fn check(&self) -> Result<(), SpecError> {
        let mut names: Vec<&str> = Vec::new();
        for name in self
            .levels
            .iter()
            .map(|l| l.name.as_str())
            .chain(self.slopes.iter().map(|s| s.name.as_str()))
        {
            if names.contains(&name) {
                return Err(SpecError::DuplicateName(name.to_string()));
            }
            names.push(name);
        }

        for (i, level) in self.levels.iter().enumerate() {
            check_component(&level.name, &level.mean, level.sigma_prior.as_ref(), level.parent.is_some())?;
            let Some(parent) = &level.parent else { continue };
            let Some(p) = self.levels.iter().position(|l| &l.name == parent) else {
                return Err(SpecError::UnknownParent {
                    level: level.name.clone(),
                    parent: parent.clone(),
                });
            };
            // Walk the parent chain; revisiting the start is a cycle.
            let mut cursor = Some(p);
            let mut steps = 0;
            while let Some(c) = cursor {
                if c == i {
                    return Err(SpecError::Cycle(level.name.clone()));
                }
                steps += 1;
                if steps > self.levels.len() {
                    break;
                }
                cursor = self.levels[c]
                    .parent
                    .as_ref()
                    .and_then(|pn| self.levels.iter().position(|l| &l.name == pn));
            }
            if p > i {
                return Err(SpecError::ParentOrder {
                    level: level.name.clone(),
                    parent: parent.clone(),
                });
            }
            let parent_spec = &self.levels[p];
            if let Some(f) = parent_spec.indexed_by.iter().find(|f| !level.indexed_by.contains(f)) {
                return Err(SpecError::Structure {
                    component: level.name.clone(),
                    message: alloc::format!("parent factor {f:?} missing from indexed_by"),
                });
            }
            if let MeanSpec::Prior { per_element: false, .. } = level.mean {
                if !parent_spec.indexed_by.is_empty() {
                    return Err(SpecError::Structure {
                        component: level.name.clone(),
                        message: "a shared location prior needs a scalar parent".to_string(),
                    });
                }
            }
        }
        for slope in &self.slopes {
            check_component(&slope.name, &slope.mean, slope.sigma_prior.as_ref(), false)?;
        }

        match (self.likelihood.family, &self.likelihood.dispersion_prior) {
            (LikelihoodFamily::BetabinomialLogit, None) => return Err(SpecError::MissingDispersion),
            (LikelihoodFamily::BetabinomialLogit, Some(p)) => {
                p.check()?;
                if !p.positive_support() {
                    return Err(SpecError::MissingDispersion);
                }
            }
            (LikelihoodFamily::BinomialLogit, Some(_)) => return Err(SpecError::UnexpectedDispersion),
            (LikelihoodFamily::BinomialLogit, None) => {}
        }

        let mut has_level = false;
        for term in &self.predictor_terms {
            if self.level(term).is_some() {
                has_level = true;
            } else if self.slope(term).is_none() {
                return Err(SpecError::UnknownTerm(term.clone()));
            }
        }
        if !has_level {
            return Err(SpecError::NoLevelTerm);
        }
        Ok(())
    }
}

fn check_component(
    name: &str,
    mean: &MeanSpec,
    sigma: Option<&PriorSpec>,
    has_parent: bool,
) -> Result<(), SpecError> {
    let structure = |message: &str| SpecError::Structure {
        component: name.to_string(),
        message: message.to_string(),
    };
    match mean {
        MeanSpec::Parent if !has_parent => return Err(structure("mean = parent without a parent")),
        MeanSpec::Constant { value } if !value.is_finite() => {
            return Err(structure("non-finite constant mean"))
        }
        MeanSpec::Prior { prior, .. } => {
            prior.check()?;
            if prior.positive_support() {
                return Err(structure("location prior must be Normal"));
            }
        }
        _ => {}
    }
    if let Some(s) = sigma {
        s.check()?;
        if !s.positive_support() {
            return Err(structure("scale prior must be HalfNormal or Gamma"));
        }
    }
    Ok(())
}

/// Builtin models, looked up by name.
pub fn builtin_spec(name: &str) -> Result<ModelSpec, SpecError> {
    let normal01 = MeanSpec::Prior {
        prior: PriorSpec::normal(0.0, 1.0),
        per_element: false,
    };
    let hn = |sd| Some(PriorSpec::half_normal(sd));
    let binomial = LikelihoodSpec {
        family: LikelihoodFamily::BinomialLogit,
        dispersion_prior: None,
    };
    let terms = |t: &[&str]| t.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let spec = match name {
        "use_case1" => ModelSpec {
            name: name.to_string(),
            likelihood: binomial,
            levels: vec![
                LevelSpec::new("overall", &[], normal01, hn(0.5)),
                LevelSpec::new("domain", &["domain"], MeanSpec::Parent, hn(0.1)).with_parent("overall"),
            ],
            slopes: Vec::new(),
            predictor_terms: terms(&["domain"]),
        },
        "use_case2" => ModelSpec {
            name: name.to_string(),
            likelihood: binomial,
            levels: vec![
                LevelSpec::new("overall", &[], normal01, None),
                LevelSpec::new("model", &["model"], MeanSpec::Parent, hn(0.1)).with_parent("overall"),
                LevelSpec::new("domain", &["model", "domain"], MeanSpec::Parent, hn(0.1))
                    .with_parent("model"),
                LevelSpec::new(
                    "subdomain",
                    &["model", "domain", "subdomain"],
                    MeanSpec::Parent,
                    hn(0.1),
                )
                .with_parent("domain"),
            ],
            slopes: Vec::new(),
            predictor_terms: terms(&["subdomain"]),
        },
        "reasoning_binomial" | "reasoning_betabinomial" | "null_binomial" => {
            let null = name == "null_binomial";
            let likelihood = if name == "reasoning_betabinomial" {
                LikelihoodSpec {
                    family: LikelihoodFamily::BetabinomialLogit,
                    dispersion_prior: Some(PriorSpec::gamma(1.0, 0.1)),
                }
            } else {
                binomial
            };
            let slopes = if null {
                Vec::new()
            } else {
                vec![SlopeSpec {
                    name: "reasoning".to_string(),
                    covariate: "reasoning_effort".to_string(),
                    indexed_by: terms(&["model", "difficulty"]),
                    mean: MeanSpec::Prior {
                        prior: PriorSpec::normal(0.0, 1.0),
                        per_element: true,
                    },
                    sigma_prior: hn(0.1),
                    noncentered: true,
                }]
            };
            ModelSpec {
                name: name.to_string(),
                likelihood,
                levels: vec![
                    LevelSpec::new("overall", &[], normal01, hn(1.0)),
                    LevelSpec::new("model", &["model"], normal01, hn(if null { 1.0 } else { 0.5 }))
                        .with_parent("overall"),
                    LevelSpec::new("difficulty", &["difficulty"], normal01, hn(0.1)),
                    LevelSpec::new("task", &["task"], MeanSpec::Constant { value: 0.0 }, hn(0.5)),
                ],
                slopes,
                predictor_terms: if null {
                    terms(&["model", "difficulty", "task"])
                } else {
                    terms(&["model", "difficulty", "reasoning", "task"])
                },
            }
        }
        other => return Err(SpecError::UnknownBuiltin(other.to_string())),
    };
    debug_assert!(spec.check().is_ok());
    Ok(spec)
}

/// Outcome of pairing a model with a cell table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    /// Distinct level count per factor used by the model.
    pub factor_levels: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks that every factor and covariate the model needs exists in `cells`.
pub fn validate_spec(spec: &ModelSpec, cells: &CellTable) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = spec.check() {
        report.errors.push(e.to_string());
    }
    for factor in spec.factors() {
        match cells.factor_position(&factor) {
            Some(i) => {
                let count = cells.factors[i].len();
                if count == 1 {
                    report
                        .warnings
                        .push(alloc::format!("factor {factor} has a single level (degenerate pooling)"));
                }
                report.factor_levels.push((factor, count));
            }
            None => report.errors.push(alloc::format!("factor {factor} absent")),
        }
    }
    for covariate in spec.covariates() {
        if cells.covariate_position(&covariate).is_none() {
            report.errors.push(alloc::format!("covariate {covariate} absent"));
        }
    }
    if cells.is_empty() {
        report.warnings.push("cell table is empty; likelihood is vacuous".to_string());
    }
    report
}

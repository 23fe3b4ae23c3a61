//! Synthetic evaluation logs with known latent effects.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EvalRecord, ReasoningEffort};
use crate::special::{inv_logit, logit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid generator: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, GeneratorError> {
    Err(GeneratorError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainTruth {
    pub name: String,
    /// Success probability on the logit scale.
    pub logit: f64,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaComponent {
    pub weight: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTruth {
    pub name: String,
    pub intercept: f64,
    /// Reasoning models are run at all four effort levels, others at `none` only.
    #[serde(default)]
    pub reasoning: bool,
    /// Logit change per effort step, one value per difficulty level.
    #[serde(default)]
    pub slopes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyTruth {
    pub name: String,
    pub tasks: u32,
    pub effect: f64,
}

/// Shape and truth of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// One model answering independent Bernoulli items per domain.
    Domains { model: String, domains: Vec<DomainTruth> },
    /// model > domain > subdomain hierarchy with normal effects on the logit scale.
    Nested {
        models: u32,
        domains: u32,
        subdomains: u32,
        n: u32,
        overall: f64,
        sigma_model: f64,
        sigma_domain: f64,
        sigma_subdomain: f64,
    },
    /// Tasks of graded difficulty repeated per model and effort level. Task
    /// base rates come from a Beta mixture; `dispersion` adds a per-cell
    /// Beta draw with that precision.
    Reasoning {
        models: Vec<ModelTruth>,
        difficulties: Vec<DifficultyTruth>,
        repeats: u32,
        task_mixture: Vec<BetaComponent>,
        #[serde(default)]
        dispersion: Option<f64>,
    },
    /// Per-task success probability drawn from `Beta(alpha, beta)`.
    BimodalTasks {
        model: String,
        tasks: u32,
        repeats: u32,
        alpha: f64,
        beta: f64,
    },
}

/// Latent values used to generate a dataset, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub kind: String,
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
}

impl GeneratorSpec {
    /// Two domains at success rates of about 0.47 and 0.84 with 1257 and 6768 items.
    pub fn two_domains() -> Self {
        GeneratorSpec::Domains {
            model: "llm".to_string(),
            domains: alloc::vec![
                DomainTruth {
                    name: "domain1".to_string(),
                    logit: logit(0.47),
                    n: 1257,
                },
                DomainTruth {
                    name: "domain2".to_string(),
                    logit: logit(0.84),
                    n: 6768,
                },
            ],
        }
    }

    /// 165 tasks over three difficulty levels, 10 repeats, two reasoning and
    /// two non-reasoning models, bimodal task rates and extra per-cell spread.
    pub fn gaia_shaped() -> Self {
        let reasoning = |name: &str, intercept| ModelTruth {
            name: name.to_string(),
            intercept,
            reasoning: true,
            slopes: alloc::vec![0.8, 0.8, 0.3],
        };
        let plain = |name: &str, intercept| ModelTruth {
            name: name.to_string(),
            intercept,
            reasoning: false,
            slopes: Vec::new(),
        };
        let level = |name: &str, tasks, effect| DifficultyTruth {
            name: name.to_string(),
            tasks,
            effect,
        };
        GeneratorSpec::Reasoning {
            models: alloc::vec![
                reasoning("r1", -1.0),
                reasoning("r2", -1.5),
                plain("b1", 0.0),
                plain("b2", -0.5),
            ],
            difficulties: alloc::vec![level("1", 53, 0.5), level("2", 86, 0.0), level("3", 26, -0.5)],
            repeats: 10,
            task_mixture: alloc::vec![
                BetaComponent {
                    weight: 0.5,
                    alpha: 1.0,
                    beta: 6.0,
                },
                BetaComponent {
                    weight: 0.5,
                    alpha: 6.0,
                    beta: 1.0,
                },
            ],
            dispersion: Some(3.0),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorSpec::Domains { .. } => "domains",
            GeneratorSpec::Nested { .. } => "nested",
            GeneratorSpec::Reasoning { .. } => "reasoning",
            GeneratorSpec::BimodalTasks { .. } => "bimodal_tasks",
        }
    }

    pub fn check(&self) -> Result<(), GeneratorError> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                invalid(format!("{what} must be finite"))
            }
        };
        let positive = |x: f64, what: &str| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                invalid(format!("{what} must be positive"))
            }
        };
        match self {
            GeneratorSpec::Domains { domains, .. } => {
                if domains.is_empty() {
                    return invalid("no domains");
                }
                for d in domains {
                    finite(d.logit, "domain logit")?;
                    if d.n == 0 {
                        return invalid(format!("domain {} has n = 0", d.name));
                    }
                }
            }
            GeneratorSpec::Nested {
                models,
                domains,
                subdomains,
                n,
                overall,
                sigma_model,
                sigma_domain,
                sigma_subdomain,
            } => {
                if *models == 0 || *domains == 0 || *subdomains == 0 || *n == 0 {
                    return invalid("counts must be positive");
                }
                finite(*overall, "overall")?;
                for s in [sigma_model, sigma_domain, sigma_subdomain] {
                    if !(s.is_finite() && *s >= 0.0) {
                        return invalid("scales must be non-negative");
                    }
                }
            }
            GeneratorSpec::Reasoning {
                models,
                difficulties,
                repeats,
                task_mixture,
                dispersion,
            } => {
                if models.is_empty() || difficulties.is_empty() || *repeats == 0 {
                    return invalid("need models, difficulty levels and repeats");
                }
                for m in models {
                    finite(m.intercept, "intercept")?;
                    if m.reasoning && m.slopes.len() != difficulties.len() {
                        return invalid(format!(
                            "model {} needs {} slopes, got {}",
                            m.name,
                            difficulties.len(),
                            m.slopes.len()
                        ));
                    }
                    for &s in &m.slopes {
                        finite(s, "slope")?;
                    }
                }
                for d in difficulties {
                    finite(d.effect, "difficulty effect")?;
                }
                if task_mixture.is_empty() {
                    return invalid("empty task mixture");
                }
                for c in task_mixture {
                    positive(c.weight, "mixture weight")?;
                    positive(c.alpha, "mixture alpha")?;
                    positive(c.beta, "mixture beta")?;
                }
                if let Some(phi) = dispersion {
                    positive(*phi, "dispersion")?;
                }
            }
            GeneratorSpec::BimodalTasks {
                tasks,
                repeats,
                alpha,
                beta,
                ..
            } => {
                if *tasks == 0 || *repeats == 0 {
                    return invalid("counts must be positive");
                }
                positive(*alpha, "alpha")?;
                positive(*beta, "beta")?;
            }
        }
        Ok(())
    }
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> u8 {
    u8::from(rng.random::<f64>() < p)
}

fn beta_draw(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    let d = Beta::new(a, b).expect("positive beta parameters");
    d.sample(rng)
}

/// Rates are kept off 0 and 1 so their logits stay finite.
fn clamp_rate(p: f64) -> f64 {
    p.clamp(1e-3, 1.0 - 1e-3)
}

/// Writes `k` successes out of `n` as individual repeat records.
fn push_repeats(out: &mut Vec<EvalRecord>, template: &EvalRecord, k: u64, n: u32) {
    for r in 0..n {
        let mut rec = template.clone();
        rec.repeat = r + 1;
        rec.score = u8::from(u64::from(r) < k);
        out.push(rec);
    }
}

/// Generates records and the truth behind them; identical seeds give
/// identical output.
pub fn simulate(spec: &GeneratorSpec, seed: u64) -> Result<(Vec<EvalRecord>, Truth), GeneratorError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = BTreeMap::new();
    let mut records = Vec::new();
    match spec {
        GeneratorSpec::Domains { model, domains } => {
            for d in domains {
                let p = inv_logit(d.logit);
                values.insert(format!("logit[{}]", d.name), d.logit);
                values.insert(format!("p[{}]", d.name), p);
                for i in 0..d.n {
                    let mut rec = EvalRecord::new(model.clone(), bernoulli(&mut rng, p));
                    rec.domain = Some(d.name.clone());
                    rec.task = Some(format!("{}-{}", d.name, i + 1));
                    records.push(rec);
                }
            }
        }
        GeneratorSpec::Nested {
            models,
            domains,
            subdomains,
            n,
            overall,
            sigma_model,
            sigma_domain,
            sigma_subdomain,
        } => {
            let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
            values.insert("overall".to_string(), *overall);
            for m in 1..=*models {
                let em = overall + sigma_model * std_normal.sample(&mut rng);
                values.insert(format!("model[m{m}]"), em);
                for d in 1..=*domains {
                    let ed = em + sigma_domain * std_normal.sample(&mut rng);
                    values.insert(format!("domain[m{m},d{d}]"), ed);
                    for s in 1..=*subdomains {
                        let es = ed + sigma_subdomain * std_normal.sample(&mut rng);
                        values.insert(format!("subdomain[m{m},d{d},s{s}]"), es);
                        let p = inv_logit(es);
                        for i in 0..*n {
                            let mut rec = EvalRecord::new(format!("m{m}"), bernoulli(&mut rng, p));
                            rec.domain = Some(format!("d{d}"));
                            rec.subdomain = Some(format!("s{s}"));
                            rec.task = Some(format!("d{d}s{s}-{}", i + 1));
                            records.push(rec);
                        }
                    }
                }
            }
        }
        GeneratorSpec::Reasoning {
            models,
            difficulties,
            repeats,
            task_mixture,
            dispersion,
        } => {
            let total_weight: f64 = task_mixture.iter().map(|c| c.weight).sum();
            let mut tasks = Vec::new();
            for (di, d) in difficulties.iter().enumerate() {
                values.insert(format!("difficulty[{}]", d.name), d.effect);
                for _ in 0..d.tasks {
                    let mut u = rng.random::<f64>() * total_weight;
                    let mut comp = &task_mixture[task_mixture.len() - 1];
                    for c in task_mixture {
                        if u < c.weight {
                            comp = c;
                            break;
                        }
                        u -= c.weight;
                    }
                    let rate = clamp_rate(beta_draw(&mut rng, comp.alpha, comp.beta));
                    let name = format!("t{:03}", tasks.len() + 1);
                    values.insert(format!("task[{name}]"), logit(rate));
                    tasks.push((name, di, logit(rate)));
                }
            }
            for m in models {
                values.insert(format!("model[{}]", m.name), m.intercept);
                for (di, d) in difficulties.iter().enumerate() {
                    let slope = if m.reasoning { m.slopes[di] } else { 0.0 };
                    values.insert(format!("reasoning[{},{}]", m.name, d.name), slope);
                }
                let efforts: &[ReasoningEffort] = if m.reasoning {
                    &ReasoningEffort::ALL
                } else {
                    &ReasoningEffort::ALL[..1]
                };
                for &effort in efforts {
                    for (task, di, task_logit) in &tasks {
                        let d = &difficulties[*di];
                        let slope = if m.reasoning { m.slopes[*di] } else { 0.0 };
                        let eta = m.intercept + d.effect + task_logit + slope * f64::from(effort.code());
                        let mut p = inv_logit(eta);
                        if let Some(phi) = dispersion {
                            p = clamp_rate(beta_draw(&mut rng, p * phi, (1.0 - p) * phi));
                            values.insert(format!("theta[{},{},{}]", m.name, task, effort), p);
                        }
                        let k = Binomial::new(u64::from(*repeats), p)
                            .expect("valid binomial")
                            .sample(&mut rng);
                        let mut rec = EvalRecord::new(m.name.clone(), 0);
                        rec.task = Some(task.clone());
                        rec.difficulty = Some(d.name.clone());
                        rec.reasoning_effort = Some(effort);
                        push_repeats(&mut records, &rec, k, *repeats);
                    }
                }
            }
            if let Some(phi) = dispersion {
                values.insert("phi".to_string(), *phi);
            }
        }
        GeneratorSpec::BimodalTasks {
            model,
            tasks,
            repeats,
            alpha,
            beta,
        } => {
            for t in 1..=*tasks {
                let p = beta_draw(&mut rng, *alpha, *beta);
                let name = format!("t{t:03}");
                values.insert(format!("p[{name}]"), p);
                let k = Binomial::new(u64::from(*repeats), p)
                    .expect("valid binomial")
                    .sample(&mut rng);
                let mut rec = EvalRecord::new(model.clone(), 0);
                rec.task = Some(name);
                push_repeats(&mut records, &rec, k, *repeats);
            }
        }
    }
    Ok((
        records,
        Truth {
            kind: spec.kind().to_string(),
            seed,
            values,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::aggregate_cells;

    #[test]
    fn two_domains_proportions() {
        let (recs, truth) = simulate(&GeneratorSpec::two_domains(), 1).unwrap();
        assert_eq!(recs.len(), 1257 + 6768);
        let cells = aggregate_cells(&recs, &["domain"], &[]).unwrap();
        for (c, want) in cells.cells.iter().zip([0.47, 0.84]) {
            let p = c.k as f64 / c.n as f64;
            assert!((p - want).abs() < 0.02, "{p} vs {want}");
        }
        assert!((truth.values["p[domain1]"] - 0.47).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = GeneratorSpec::gaia_shaped();
        let a = simulate(&spec, 3).unwrap();
        let b = simulate(&spec, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate(&spec, 4).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn gaia_shape() {
        let (recs, _) = simulate(&GeneratorSpec::gaia_shaped(), 0).unwrap();
        // 2 reasoning models x 4 efforts + 2 plain models, 165 tasks, 10 repeats
        assert_eq!(recs.len(), 10 * 165 * 10);
        let cells = aggregate_cells(&recs, &["model", "task", "reasoning_effort"], &[]).unwrap();
        assert_eq!(cells.len(), 1650);
        assert!(cells.cells.iter().all(|c| c.n == 10));
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = GeneratorSpec::BimodalTasks {
            model: "m".into(),
            tasks: 5,
            repeats: 2,
            alpha: -1.0,
            beta: 0.2,
        };
        assert!(simulate(&bad, 0).is_err());
        let mut g = GeneratorSpec::gaia_shaped();
        if let GeneratorSpec::Reasoning { models, .. } = &mut g {
            models[0].slopes.pop();
        }
        assert!(g.check().is_err());
    }
}

//! Text form of a [`ModelSpec`].
//!
//! ```text
//! # comments run to the end of the line
//! model use_case1
//! likelihood binomial-logit          # or betabinomial-logit
//! dispersion Gamma(1, 0.1)           # betabinomial only
//!
//! level overall {
//!   mean Normal(0, 1)
//!   sigma HalfNormal(0.5)
//! }
//! level domain {
//!   parent overall
//!   by domain
//!   mean parent                      # parent | constant <x> | <Normal prior> [per-element]
//!   sigma HalfNormal(0.1)            # omit for a level without spread
//!   centered                         # default is non-centered
//! }
//! slope reasoning {
//!   covariate reasoning_effort
//!   by model, difficulty
//!   mean Normal(0, 1) per-element
//!   sigma HalfNormal(0.1)
//! }
//! predictor overall + domain
//! ```
//!
//! Priors are `Normal(mu, sd)`, `HalfNormal(sd)` and `Gamma(shape, rate)`;
//! a Gamma may instead be written `Gamma(shape, scale = s)` or
//! `Gamma(shape, rate = r)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{LevelSpec, LikelihoodFamily, LikelihoodSpec, MeanSpec, ModelSpec, PriorSpec, SlopeSpec, SpecError};

fn err(line: usize, message: impl Into<String>) -> SpecError {
    SpecError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_number(line: usize, text: &str) -> Result<f64, SpecError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| err(line, format!("expected a number, found {:?}", text.trim())))
}

/// `Family(args)` with an optional trailing word.
fn parse_prior(line: usize, text: &str) -> Result<(PriorSpec, String), SpecError> {
    let text = text.trim();
    let open = text.find('(').ok_or_else(|| err(line, format!("expected a prior, found {text:?}")))?;
    let close = text.find(')').ok_or_else(|| err(line, "missing ')'"))?;
    let family = text[..open].trim();
    let args: Vec<&str> = text[open + 1..close].split(',').map(str::trim).collect();
    let rest = text[close + 1..].trim().to_string();
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(err(line, format!("{family} takes {n} argument(s), got {}", args.len())))
        }
    };
    let prior = match family {
        "Normal" => {
            arity(2)?;
            PriorSpec::normal(parse_number(line, args[0])?, parse_number(line, args[1])?)
        }
        "HalfNormal" => {
            arity(1)?;
            PriorSpec::half_normal(parse_number(line, args[0])?)
        }
        "Gamma" => {
            arity(2)?;
            let shape = parse_number(line, args[0])?;
            let rate = match args[1].split_once('=') {
                None => parse_number(line, args[1])?,
                Some((key, v)) => match key.trim() {
                    "rate" => parse_number(line, v)?,
                    "scale" => 1.0 / parse_number(line, v)?,
                    other => return Err(err(line, format!("unknown Gamma parameter {other:?}"))),
                },
            };
            PriorSpec::gamma(shape, rate)
        }
        other => return Err(err(line, format!("unknown prior family {other:?}"))),
    };
    Ok((prior, rest))
}

fn parse_mean(line: usize, text: &str) -> Result<MeanSpec, SpecError> {
    let text = text.trim();
    if text == "parent" {
        return Ok(MeanSpec::Parent);
    }
    if let Some(v) = text.strip_prefix("constant") {
        return Ok(MeanSpec::Constant {
            value: parse_number(line, v)?,
        });
    }
    let (prior, rest) = parse_prior(line, text)?;
    let per_element = match rest.as_str() {
        "" => false,
        "per-element" => true,
        other => return Err(err(line, format!("unexpected {other:?} after mean prior"))),
    };
    Ok(MeanSpec::Prior { prior, per_element })
}

fn parse_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Default)]
struct Block {
    kind: &'static str,
    name: String,
    start: usize,
    parent: Option<String>,
    by: Vec<String>,
    covariate: Option<String>,
    mean: Option<MeanSpec>,
    sigma: Option<PriorSpec>,
    centered: bool,
}

impl Block {
    fn finish(self, levels: &mut Vec<LevelSpec>, slopes: &mut Vec<SlopeSpec>) -> Result<(), SpecError> {
        let mean = self
            .mean
            .ok_or_else(|| err(self.start, format!("{} {:?} has no mean", self.kind, self.name)))?;
        if self.kind == "level" {
            if self.covariate.is_some() {
                return Err(err(self.start, "levels take no covariate"));
            }
            levels.push(LevelSpec {
                name: self.name,
                parent: self.parent,
                indexed_by: self.by,
                mean,
                sigma_prior: self.sigma,
                noncentered: !self.centered,
            });
        } else {
            if self.parent.is_some() {
                return Err(err(self.start, "slopes take no parent"));
            }
            let covariate = self
                .covariate
                .ok_or_else(|| err(self.start, format!("slope {:?} has no covariate", self.name)))?;
            slopes.push(SlopeSpec {
                name: self.name,
                covariate,
                indexed_by: self.by,
                mean,
                sigma_prior: self.sigma,
                noncentered: !self.centered,
            });
        }
        Ok(())
    }
}

/// Parses the text form and checks the result.
pub fn parse_model_config(text: &str) -> Result<ModelSpec, SpecError> {
    let mut name = None;
    let mut family = None;
    let mut dispersion = None;
    let mut levels = Vec::new();
    let mut slopes = Vec::new();
    let mut predictor = None;
    let mut block: Option<Block> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = match content.split_once(char::is_whitespace) {
            Some((k, v)) => (k, v.trim()),
            None => (content, ""),
        };

        if let Some(b) = block.as_mut() {
            match key {
                "}" => {
                    let done = block.take().expect("open block");
                    done.finish(&mut levels, &mut slopes)?;
                }
                "parent" => b.parent = Some(value.to_string()),
                "by" => b.by = parse_list(value),
                "covariate" => b.covariate = Some(value.to_string()),
                "mean" => b.mean = Some(parse_mean(line, value)?),
                "sigma" => {
                    let (p, rest) = parse_prior(line, value)?;
                    if !rest.is_empty() {
                        return Err(err(line, format!("unexpected {rest:?} after sigma prior")));
                    }
                    b.sigma = Some(p);
                }
                "centered" => b.centered = true,
                other => return Err(err(line, format!("unknown key {other:?} in {}", b.kind))),
            }
            continue;
        }

        match key {
            "model" => name = Some(value.to_string()),
            "likelihood" => {
                family = Some(match value {
                    "binomial-logit" => LikelihoodFamily::BinomialLogit,
                    "betabinomial-logit" => LikelihoodFamily::BetabinomialLogit,
                    other => return Err(err(line, format!("unknown likelihood family {other:?}"))),
                })
            }
            "dispersion" => {
                let (p, rest) = parse_prior(line, value)?;
                if !rest.is_empty() {
                    return Err(err(line, format!("unexpected {rest:?} after dispersion prior")));
                }
                dispersion = Some(p);
            }
            "level" | "slope" => {
                let header = value
                    .strip_suffix('{')
                    .ok_or_else(|| err(line, format!("expected '{{' after {key} name")))?
                    .trim();
                if header.is_empty() || header.contains(char::is_whitespace) {
                    return Err(err(line, format!("invalid {key} name {header:?}")));
                }
                block = Some(Block {
                    kind: if key == "level" { "level" } else { "slope" },
                    name: header.to_string(),
                    start: line,
                    ..Block::default()
                });
            }
            "predictor" => {
                predictor = Some(
                    value
                        .split('+')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect::<Vec<_>>(),
                )
            }
            other => return Err(err(line, format!("unknown key {other:?}"))),
        }
    }
    if let Some(b) = block {
        return Err(err(b.start, format!("{} {:?} is not closed", b.kind, b.name)));
    }
    let last = text.lines().count();
    let spec = ModelSpec {
        name: name.ok_or_else(|| err(last, "missing 'model'"))?,
        likelihood: LikelihoodSpec {
            family: family.ok_or_else(|| err(last, "missing 'likelihood'"))?,
            dispersion_prior: dispersion,
        },
        levels,
        slopes,
        predictor_terms: predictor.ok_or_else(|| err(last, "missing 'predictor'"))?,
    };
    spec.check()?;
    Ok(spec)
}

fn write_mean(out: &mut String, mean: &MeanSpec) {
    match mean {
        MeanSpec::Parent => out.push_str("  mean parent\n"),
        MeanSpec::Constant { value } => {
            let _ = writeln!(out, "  mean constant {value:?}");
        }
        MeanSpec::Prior { prior, per_element } => {
            let _ = writeln!(out, "  mean {prior}{}", if *per_element { " per-element" } else { "" });
        }
    }
}

fn write_common(out: &mut String, by: &[String], mean: &MeanSpec, sigma: Option<&PriorSpec>, noncentered: bool) {
    if !by.is_empty() {
        let _ = writeln!(out, "  by {}", by.join(", "));
    }
    write_mean(out, mean);
    if let Some(s) = sigma {
        let _ = writeln!(out, "  sigma {s}");
    }
    if !noncentered {
        out.push_str("  centered\n");
    }
}

/// Text form accepted by [`parse_model_config`].
pub fn render_model_config(spec: &ModelSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {}", spec.name);
    let _ = writeln!(out, "likelihood {}", spec.likelihood.family.as_str());
    if let Some(d) = &spec.likelihood.dispersion_prior {
        let _ = writeln!(out, "dispersion {d}");
    }
    for l in &spec.levels {
        let _ = writeln!(out, "\nlevel {} {{", l.name);
        if let Some(p) = &l.parent {
            let _ = writeln!(out, "  parent {p}");
        }
        write_common(&mut out, &l.indexed_by, &l.mean, l.sigma_prior.as_ref(), l.noncentered);
        out.push_str("}\n");
    }
    for s in &spec.slopes {
        let _ = writeln!(out, "\nslope {} {{", s.name);
        let _ = writeln!(out, "  covariate {}", s.covariate);
        write_common(&mut out, &s.indexed_by, &s.mean, s.sigma_prior.as_ref(), s.noncentered);
        out.push_str("}\n");
    }
    let _ = writeln!(out, "\npredictor {}", spec.predictor_terms.join(" + "));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelspec::{builtin_spec, BUILTIN_NAMES};

    const USE_CASE1: &str = "
model use_case1
likelihood binomial-logit
level overall {
  mean Normal(0, 1)
  sigma HalfNormal(0.5)
}
level domain {
  parent overall   # nested under the grand mean
  by domain
  mean parent
  sigma HalfNormal(0.1)
}
predictor domain
";

    #[test]
    fn hand_written_use_case1_equals_builtin() {
        assert_eq!(parse_model_config(USE_CASE1).unwrap(), builtin_spec("use_case1").unwrap());
    }

    #[test]
    fn builtins_round_trip() {
        for name in BUILTIN_NAMES {
            let spec = builtin_spec(name).unwrap();
            assert_eq!(parse_model_config(&render_model_config(&spec)).unwrap(), spec, "{name}");
        }
    }

    #[test]
    fn gamma_scale_knob() {
        let text = USE_CASE1
            .replace("binomial-logit", "betabinomial-logit")
            .replace("likelihood betabinomial-logit", "likelihood betabinomial-logit\ndispersion Gamma(1, scale = 10)");
        let spec = parse_model_config(&text).unwrap();
        assert_eq!(spec.likelihood.dispersion_prior, Some(PriorSpec::gamma(1.0, 0.1)));
    }

    #[test]
    fn errors() {
        let self_parent = USE_CASE1.replace("parent overall", "parent domain");
        assert_eq!(parse_model_config(&self_parent), Err(SpecError::Cycle("domain".into())));
        let bb = USE_CASE1.replace("binomial-logit", "betabinomial-logit");
        assert_eq!(parse_model_config(&bb), Err(SpecError::MissingDispersion));
        let family = USE_CASE1.replace("binomial-logit", "poisson-log");
        assert!(matches!(parse_model_config(&family), Err(SpecError::Parse { line: 3, .. })));
        let unclosed = USE_CASE1.trim_end().trim_end_matches("predictor domain").trim_end().trim_end_matches('}');
        assert!(matches!(parse_model_config(unclosed), Err(SpecError::Parse { .. })));
        assert!(parse_model_config(&USE_CASE1.replace("HalfNormal(0.5)", "Cauchy(0, 1)")).is_err());
    }
}

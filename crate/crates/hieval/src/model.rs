//! Resolving `--model` references.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hieval_core::modelspec::{builtin_spec, parse_model_config, BUILTIN_NAMES};
use hieval_core::ModelSpec;

/// `builtin:<name>`, a `.json` model file, or a model config file.
pub fn resolve_model(reference: &str) -> Result<ModelSpec> {
    if let Some(name) = reference.strip_prefix("builtin:") {
        return builtin_spec(name).with_context(|| format!("builtins are {}", BUILTIN_NAMES.join(", ")));
    }
    let path = Path::new(reference);
    if !path.exists() {
        if BUILTIN_NAMES.contains(&reference) {
            bail!("no file {reference:?}; did you mean builtin:{reference}?");
        }
        bail!("model file {reference:?} not found");
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: ModelSpec = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        parse_model_config(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    spec.check().with_context(|| format!("checking {}", path.display()))?;
    Ok(spec)
}

/// Cell grouping used when none is given: every factor the model indexes by,
/// then its covariates (which must be constant within a cell).
pub fn default_group_by(spec: &ModelSpec) -> Vec<String> {
    let mut out = spec.factors();
    for c in spec.covariates() {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

//! One module per subcommand, plus the fit directory they share.

pub mod compare;
pub mod fit;
pub mod prior_check;
pub mod report;
pub mod simulate;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hieval_core::dataset::{aggregate_cells, first_repeat_filter, CellTable, EvalRecord};
use hieval_core::density::{build_layout, ParameterLayout};
use hieval_core::diagnostics::QcThresholds;
use hieval_core::modelspec::validate_spec;
use hieval_core::sampler::{Draws, SamplerConfig};
use hieval_core::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::cli::DataArgs;
use crate::error::{Classify, CliError, CliResult};
use crate::io;
use crate::model::default_group_by;

pub const MANIFEST: &str = "manifest.json";
pub const MODEL: &str = "model.json";
pub const CELLS_JSON: &str = "cells.json";
pub const CELLS_CSV: &str = "cells.csv";
pub const DRAWS: &str = "draws.csv";
pub const SUMMARY: &str = "summary.csv";
pub const DIAGNOSTICS: &str = "diagnostics.json";

/// Everything needed to repeat a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub model_ref: String,
    pub model_name: String,
    pub data: PathBuf,
    pub data_sha256: String,
    pub data_format: String,
    pub group_by: Vec<String>,
    pub first_repeat: bool,
    pub sampler: SamplerConfig,
    pub mass: f64,
    pub thresholds: QcThresholds,
    pub outputs: Vec<String>,
}

/// Records, their digest and the cell table the model sees.
pub struct Prepared {
    pub format: io::RecordFormat,
    pub records: Vec<EvalRecord>,
    pub sha256: String,
    pub group_by: Vec<String>,
    pub cells: CellTable,
    pub layout: ParameterLayout,
}

pub fn prepare(data: &DataArgs, spec: &ModelSpec) -> CliResult<Prepared> {
    let bytes = fs::read(&data.data)
        .with_context(|| format!("reading {}", data.data.display()))
        .input()?;
    let text = String::from_utf8(bytes.clone())
        .with_context(|| format!("{} is not UTF-8", data.data.display()))
        .input()?;
    let format = data.format.unwrap_or_else(|| io::RecordFormat::from_path(&data.data));
    let mut records = io::parse_records(&text, format)
        .with_context(|| format!("loading {}", data.data.display()))
        .input()?;
    if data.first_repeat {
        records = first_repeat_filter(&records);
    }
    if records.is_empty() {
        return Err(CliError::input(anyhow::anyhow!("{} holds no records", data.data.display())));
    }
    let group_by = if data.group_by.is_empty() {
        default_group_by(spec)
    } else {
        data.group_by.clone()
    };
    let keys: Vec<&str> = group_by.iter().map(String::as_str).collect();
    let covariates = spec.covariates();
    let cov: Vec<&str> = covariates.iter().map(String::as_str).collect();
    let cells = aggregate_cells(&records, &keys, &cov).input()?;
    let report = validate_spec(spec, &cells);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.is_ok() {
        return Err(CliError::input(anyhow::anyhow!(
            "model {} does not fit the data: {}",
            spec.name,
            report.errors.join("; ")
        )));
    }
    let layout = build_layout(spec, &cells).input()?;
    Ok(Prepared {
        format,
        records,
        sha256: io::sha256_hex(&bytes),
        group_by,
        cells,
        layout,
    })
}

/// A completed fit read back from its directory.
pub struct FitDir {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub spec: ModelSpec,
    pub cells: CellTable,
    pub layout: ParameterLayout,
    pub draws: Draws,
}

impl FitDir {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let need = |name: &str| -> CliResult<PathBuf> {
            let p = dir.join(name);
            if !p.exists() {
                return Err(CliError::input(anyhow::anyhow!(
                    "{} is missing {name}; is it a fit directory?",
                    dir.display()
                )));
            }
            Ok(p)
        };
        let manifest: RunManifest = io::read_json(&need(MANIFEST)?).input()?;
        let spec: ModelSpec = io::read_json(&need(MODEL)?).input()?;
        let cells: CellTable = io::read_json(&need(CELLS_JSON)?).input()?;
        let layout = build_layout(&spec, &cells).input()?;
        let draws = io::read_draws_csv(&need(DRAWS)?, &layout).input()?;
        if draws.is_empty() {
            return Err(CliError::input(anyhow::anyhow!("{} holds no draws", dir.display())));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            spec,
            cells,
            layout,
            draws,
        })
    }

    /// The fit's records, checked against the recorded digest.
    pub fn records(&self) -> anyhow::Result<Vec<EvalRecord>> {
        let m = &self.manifest;
        let bytes = fs::read(&m.data).with_context(|| format!("reading {}", m.data.display()))?;
        if io::sha256_hex(&bytes) != m.data_sha256 {
            bail!("{} changed since the fit", m.data.display());
        }
        let text = String::from_utf8(bytes)?;
        let mut records = io::parse_records(&text, m.data_format.parse()?)?;
        if m.first_repeat {
            records = first_repeat_filter(&records);
        }
        Ok(records)
    }
}

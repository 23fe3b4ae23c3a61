//! Scored evaluation records and their aggregation into binomial cells.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("factor {0} absent on record {1}")]
    MissingFactor(String, usize),
    #[error("covariate {name} varies within cell {cell}")]
    CovariateVaries { name: String, cell: String },
    #[error("covariate {name} missing or non-numeric on record {record}")]
    BadCovariate { name: String, record: usize },
    #[error("unknown reasoning effort level {0:?} (expected none, low, intermediate or high)")]
    UnknownEffort(String),
    #[error("duplicate group_by factor {0}")]
    DuplicateFactor(String),
}

/// Ordinal reasoning-effort level, coded 0..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    None,
    Low,
    Intermediate,
    High,
}

impl ReasoningEffort {
    pub const ALL: [ReasoningEffort; 4] = [Self::None, Self::Low, Self::Intermediate, Self::High];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Low => "low",
            Self::Intermediate => "intermediate",
            Self::High => "high",
        }
    }
}

impl fmt::Display for ReasoningEffort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReasoningEffort {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| DatasetError::UnknownEffort(s.to_string()))
    }
}

/// One scored repeat of one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: String,
    pub domain: Option<String>,
    pub subdomain: Option<String>,
    pub task: Option<String>,
    pub repeat: u32,
    pub difficulty: Option<String>,
    pub reasoning_effort: Option<ReasoningEffort>,
    /// 0 or 1.
    pub score: u8,
    /// Columns beyond the known schema, kept verbatim.
    pub extra: BTreeMap<String, String>,
}

impl EvalRecord {
    pub fn new(model: impl Into<String>, score: u8) -> Self {
        Self {
            model: model.into(),
            domain: None,
            subdomain: None,
            task: None,
            repeat: 1,
            difficulty: None,
            reasoning_effort: None,
            score,
            extra: BTreeMap::new(),
        }
    }

    /// Label of the named factor on this record, if present.
    pub fn factor(&self, name: &str) -> Option<String> {
        match name {
            "model" => Some(self.model.clone()),
            "domain" => self.domain.clone(),
            "subdomain" => self.subdomain.clone(),
            "task" => self.task.clone(),
            "difficulty" => self.difficulty.clone(),
            "reasoning_effort" => self.reasoning_effort.map(|e| e.as_str().to_string()),
            other => self.extra.get(other).filter(|v| !v.is_empty()).cloned(),
        }
    }

    /// Numeric covariate value. `reasoning_effort` maps to its ordinal code;
    /// other names are parsed from the extra columns.
    pub fn covariate(&self, name: &str) -> Option<f64> {
        match name {
            "reasoning_effort" => self.reasoning_effort.map(|e| f64::from(e.code())),
            "repeat" => Some(f64::from(self.repeat)),
            other => self.extra.get(other).and_then(|v| v.trim().parse().ok()),
        }
    }
}

/// Keeps only the first repeat of every item, preserving order.
pub fn first_repeat_filter(records: &[EvalRecord]) -> Vec<EvalRecord> {
    records.iter().filter(|r| r.repeat == 1).cloned().collect()
}

/// Distinct labels of one factor in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "FactorLevels", into = "FactorLevels")]
pub struct FactorIndex {
    pub name: String,
    pub levels: Vec<String>,
    codes: BTreeMap<String, u32>,
}

#[derive(Clone, Serialize, Deserialize)]
struct FactorLevels {
    name: String,
    levels: Vec<String>,
}

impl From<FactorLevels> for FactorIndex {
    fn from(f: FactorLevels) -> Self {
        FactorIndex::from_levels(f.name, f.levels)
    }
}

impl From<FactorIndex> for FactorLevels {
    fn from(f: FactorIndex) -> Self {
        FactorLevels {
            name: f.name,
            levels: f.levels,
        }
    }
}

impl FactorIndex {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            levels: Vec::new(),
            codes: BTreeMap::new(),
        }
    }

    /// Rebuilds an index from an explicit level order.
    pub fn from_levels(name: impl Into<String>, levels: Vec<String>) -> Self {
        let mut index = Self::new(name);
        for level in levels {
            index.encode(&level);
        }
        index
    }

    /// Code of `label`, assigning the next free code on first sight.
    pub fn encode(&mut self, label: &str) -> u32 {
        if let Some(&c) = self.codes.get(label) {
            return c;
        }
        let c = self.levels.len() as u32;
        self.levels.push(label.to_string());
        self.codes.insert(label.to_string(), c);
        c
    }

    pub fn code(&self, label: &str) -> Option<u32> {
        self.codes.get(label).copied()
    }

    pub fn label(&self, code: u32) -> Option<&str> {
        self.levels.get(code as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// One binomial cell: `k` successes in `n` trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub codes: Vec<u32>,
    pub k: u64,
    pub n: u64,
    pub covariates: Vec<f64>,
}

/// Aggregated observations, cells sorted lexicographically by factor codes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CellTable {
    pub factors: Vec<FactorIndex>,
    pub covariate_names: Vec<String>,
    pub cells: Vec<Cell>,
}

impl CellTable {
    pub fn factor_position(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn covariate_position(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_trials(&self) -> u64 {
        self.cells.iter().map(|c| c.n).sum()
    }

    pub fn total_successes(&self) -> u64 {
        self.cells.iter().map(|c| c.k).sum()
    }

    /// Labels of cell `i`, one per factor.
    pub fn labels(&self, i: usize) -> Vec<&str> {
        self.cells[i]
            .codes
            .iter()
            .zip(&self.factors)
            .map(|(&c, f)| f.label(c).unwrap_or("?"))
            .collect()
    }

    /// Stable identity string of cell `i`, e.g. `model=A|domain=d1`.
    pub fn cell_id(&self, i: usize) -> String {
        let mut id = String::new();
        for (j, (label, factor)) in self.labels(i).into_iter().zip(&self.factors).enumerate() {
            if j > 0 {
                id.push('|');
            }
            id.push_str(&factor.name);
            id.push('=');
            id.push_str(label);
        }
        id
    }

    pub fn cell_ids(&self) -> Vec<String> {
        (0..self.cells.len()).map(|i| self.cell_id(i)).collect()
    }

    /// Sorts cells lexicographically by code tuple.
    pub fn sort_canonical(&mut self) {
        self.cells.sort_by(|a, b| a.codes.cmp(&b.codes));
    }
}

/// Groups records into cells keyed by `group_by` factors.
pub fn aggregate_cells(
    records: &[EvalRecord],
    group_by: &[&str],
    covariate_names: &[&str],
) -> Result<CellTable, DatasetError> {
    for (i, name) in group_by.iter().enumerate() {
        if group_by[..i].contains(name) {
            return Err(DatasetError::DuplicateFactor(name.to_string()));
        }
    }
    let mut factors: Vec<FactorIndex> = group_by.iter().map(|&n| FactorIndex::new(n)).collect();
    let mut by_key: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut cells: Vec<Cell> = Vec::new();

    for (r, record) in records.iter().enumerate() {
        let mut codes = Vec::with_capacity(group_by.len());
        for (factor, &name) in factors.iter_mut().zip(group_by) {
            let label = record
                .factor(name)
                .ok_or_else(|| DatasetError::MissingFactor(name.to_string(), r))?;
            codes.push(factor.encode(&label));
        }
        let covariates = covariate_names
            .iter()
            .map(|&name| {
                record.covariate(name).ok_or_else(|| DatasetError::BadCovariate {
                    name: name.to_string(),
                    record: r,
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        match by_key.get(&codes) {
            Some(&i) => {
                let cell = &mut cells[i];
                if let Some(j) = cell
                    .covariates
                    .iter()
                    .zip(&covariates)
                    .position(|(a, b)| a.to_bits() != b.to_bits())
                {
                    let mut table = CellTable {
                        factors: factors.clone(),
                        covariate_names: Vec::new(),
                        cells: Vec::new(),
                    };
                    table.cells.push(cell.clone());
                    return Err(DatasetError::CovariateVaries {
                        name: covariate_names[j].to_string(),
                        cell: table.cell_id(0),
                    });
                }
                cell.n += 1;
                cell.k += u64::from(record.score);
            }
            None => {
                by_key.insert(codes.clone(), cells.len());
                cells.push(Cell {
                    codes,
                    k: u64::from(record.score),
                    n: 1,
                    covariates,
                });
            }
        }
    }

    let mut table = CellTable {
        factors,
        covariate_names: covariate_names.iter().map(|s| s.to_string()).collect(),
        cells,
    };
    table.sort_canonical();
    Ok(table)
}

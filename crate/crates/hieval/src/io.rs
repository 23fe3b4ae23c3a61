//! Record ingestion and the CSV/JSON artifacts written by the commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hieval_core::dataset::{CellTable, EvalRecord, ReasoningEffort};
use hieval_core::density::ParameterLayout;
use hieval_core::diagnostics::SummaryRow;
use hieval_core::sampler::{ChainDraws, Draws, TransitionStats};
use serde_json::Value;

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_atomic(path, &csv_bytes(&header, rows)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

impl RecordFormat {
    /// `.jsonl` and `.ndjson` files are JSON lines, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => RecordFormat::Jsonl,
            _ => RecordFormat::Csv,
        }
    }
}

impl FromStr for RecordFormat {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(RecordFormat::Csv),
            "jsonl" => Ok(RecordFormat::Jsonl),
            other => bail!("unknown record format {other:?} (expected csv or jsonl)"),
        }
    }
}

const KNOWN: [&str; 8] = [
    "model",
    "domain",
    "subdomain",
    "task",
    "repeat",
    "difficulty",
    "reasoning_effort",
    "score",
];

fn opt(v: &str) -> Option<String> {
    let v = v.trim();
    (!v.is_empty()).then(|| v.to_string())
}

fn record_from_fields(fields: &BTreeMap<String, String>, line: u64) -> Result<EvalRecord> {
    let model = fields
        .get("model")
        .and_then(|m| opt(m))
        .ok_or_else(|| anyhow!("missing model at line {line}"))?;
    let score = match fields.get("score").map(|s| s.trim()) {
        Some("0") | Some("false") => 0,
        Some("1") | Some("true") => 1,
        Some(_) => bail!("non-binary score at line {line}"),
        None => bail!("missing score at line {line}"),
    };
    let mut rec = EvalRecord::new(model, score);
    rec.domain = fields.get("domain").and_then(|v| opt(v));
    rec.subdomain = fields.get("subdomain").and_then(|v| opt(v));
    rec.task = fields.get("task").and_then(|v| opt(v));
    rec.difficulty = fields.get("difficulty").and_then(|v| opt(v));
    if let Some(r) = fields.get("repeat").and_then(|v| opt(v)) {
        rec.repeat = r
            .parse::<u32>()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| anyhow!("repeat must be an integer >= 1 at line {line}, got {r:?}"))?;
    }
    if let Some(e) = fields.get("reasoning_effort").and_then(|v| opt(v)) {
        rec.reasoning_effort = Some(ReasoningEffort::from_str(&e).map_err(|err| anyhow!("{err} at line {line}"))?);
    }
    for (k, v) in fields {
        if !KNOWN.contains(&k.as_str()) {
            rec.extra.insert(k.clone(), v.clone());
        }
    }
    Ok(rec)
}

fn parse_csv_records(text: &str) -> Result<Vec<EvalRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    for required in ["model", "score"] {
        if !headers.iter().any(|h| h == required) {
            bail!("missing required column {required:?}");
        }
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.context("unparsable row")?;
        let line = row.position().map_or(0, |p| p.line());
        let fields: BTreeMap<String, String> =
            headers.iter().cloned().zip(row.iter().map(String::from)).collect();
        out.push(record_from_fields(&fields, line)?);
    }
    Ok(out)
}

fn json_scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Bool(b) => Some(if *b { "1" } else { "0" }.to_string()),
        Value::Number(n) => Some(n.to_string()),
        other => Some(other.to_string()),
    }
}

fn parse_jsonl_records(text: &str) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).with_context(|| format!("unparsable row at line {line}"))?;
        let Value::Object(map) = value else {
            bail!("line {line} is not a JSON object");
        };
        for required in ["model", "score"] {
            if !map.contains_key(required) {
                bail!("missing required key {required:?} at line {line}");
            }
        }
        let fields: BTreeMap<String, String> =
            map.iter().filter_map(|(k, v)| json_scalar(v).map(|s| (k.clone(), s))).collect();
        out.push(record_from_fields(&fields, line)?);
    }
    Ok(out)
}

pub fn parse_records(text: &str, format: RecordFormat) -> Result<Vec<EvalRecord>> {
    match format {
        RecordFormat::Csv => parse_csv_records(text),
        RecordFormat::Jsonl => parse_jsonl_records(text),
    }
}

/// Reads scored records; row order is preserved.
pub fn load_records(path: &Path, format: Option<RecordFormat>) -> Result<Vec<EvalRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let format = format.unwrap_or_else(|| RecordFormat::from_path(path));
    parse_records(&text, format).with_context(|| format!("loading {}", path.display()))
}

pub fn records_csv(records: &[EvalRecord]) -> Result<Vec<u8>> {
    let extra: BTreeSet<&String> = records.iter().flat_map(|r| r.extra.keys()).collect();
    let mut header: Vec<String> = KNOWN.iter().map(|s| s.to_string()).collect();
    header.extend(extra.iter().map(|s| s.to_string()));
    let rows = records.iter().map(|r| {
        let mut row = vec![
            r.model.clone(),
            r.domain.clone().unwrap_or_default(),
            r.subdomain.clone().unwrap_or_default(),
            r.task.clone().unwrap_or_default(),
            r.repeat.to_string(),
            r.difficulty.clone().unwrap_or_default(),
            r.reasoning_effort.map(|e| e.to_string()).unwrap_or_default(),
            r.score.to_string(),
        ];
        row.extend(extra.iter().map(|k| r.extra.get(*k).cloned().unwrap_or_default()));
        row
    });
    csv_bytes(&header, rows)
}

/// Canonical cell export: factor labels, `k`, `n`, then covariates.
pub fn write_cells_csv(path: &Path, cells: &CellTable) -> Result<()> {
    let mut header: Vec<&str> = cells.factors.iter().map(|f| f.name.as_str()).collect();
    header.extend(["k", "n"]);
    header.extend(cells.covariate_names.iter().map(String::as_str));
    let rows = (0..cells.len()).map(|i| {
        let c = &cells.cells[i];
        let mut row: Vec<String> = cells.labels(i).into_iter().map(String::from).collect();
        row.push(c.k.to_string());
        row.push(c.n.to_string());
        row.extend(c.covariates.iter().map(|&v| num(v)));
        row
    });
    write_csv(path, &header, rows)
}

const STAT_COLUMNS: [&str; 8] = [
    "chain",
    "draw",
    "divergent",
    "tree_depth",
    "n_leapfrog",
    "step_size",
    "accept_stat",
    "energy",
];

/// Post-warmup draws on the constrained scale with per-transition statistics.
pub fn write_draws_csv(path: &Path, draws: &Draws) -> Result<()> {
    let mut header: Vec<&str> = STAT_COLUMNS.to_vec();
    header.extend(draws.names.iter().map(String::as_str));
    let mut rows = Vec::with_capacity(draws.n_chains() * draws.samples);
    for (c, chain) in draws.chains.iter().enumerate() {
        for t in 0..draws.samples {
            let s = &chain.stats[t];
            let mut row = vec![
                c.to_string(),
                t.to_string(),
                u8::from(s.divergent).to_string(),
                s.tree_depth.to_string(),
                s.n_leapfrog.to_string(),
                num(s.step_size),
                num(s.accept_stat),
                num(s.energy),
            ];
            row.extend(draws.constrained_row(c, t).iter().map(|&v| num(v)));
            rows.push(row);
        }
    }
    write_csv(path, &header, rows)
}

/// Reads draws written by [`write_draws_csv`] for `layout`.
pub fn read_draws_csv(path: &Path, layout: &ParameterLayout) -> Result<Draws> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let names = layout.scalar_names();
    if headers.len() != STAT_COLUMNS.len() + names.len()
        || headers[..STAT_COLUMNS.len()] != STAT_COLUMNS
        || headers[STAT_COLUMNS.len()..] != names[..]
    {
        bail!("{} does not match the model's parameters", path.display());
    }
    let mut chains: Vec<ChainDraws> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|_| anyhow!("bad number {:?} at line {line}", &row[i]))
        };
        let chain: usize = row[0].parse().map_err(|_| anyhow!("bad chain at line {line}"))?;
        if chain > chains.len() {
            bail!("chains out of order at line {line}");
        }
        if chain == chains.len() {
            chains.push(ChainDraws {
                positions: Vec::new(),
                stats: Vec::new(),
                step_size: field(5)?,
                inv_metric: Vec::new(),
                warmup_divergences: 0,
            });
        }
        let stats = TransitionStats {
            divergent: &row[2] == "1",
            tree_depth: row[3].parse().map_err(|_| anyhow!("bad tree_depth at line {line}"))?,
            n_leapfrog: row[4].parse().map_err(|_| anyhow!("bad n_leapfrog at line {line}"))?,
            step_size: field(5)?,
            accept_stat: field(6)?,
            energy: field(7)?,
        };
        let values = (STAT_COLUMNS.len()..headers.len()).map(field).collect::<Result<Vec<f64>>>()?;
        let c = &mut chains[chain];
        c.positions.extend(layout.unconstrain_values(&values));
        c.stats.push(stats);
    }
    if chains.is_empty() {
        bail!("{} holds no draws", path.display());
    }
    let samples = chains[0].stats.len();
    if chains.iter().any(|c| c.stats.len() != samples) {
        bail!("chains in {} have different lengths", path.display());
    }
    Ok(Draws::from_layout(layout, chains))
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

pub const SUMMARY_COLUMNS: [&str; 7] = ["parameter", "mean", "sd", "hpdi_low", "hpdi_high", "n_eff", "r_hat"];

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_csv(
        path,
        &SUMMARY_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.parameter.clone(),
                num(r.mean),
                num(r.sd),
                num(r.hpdi_low),
                num(r.hpdi_high),
                opt_num(r.n_eff),
                opt_num(r.r_hat),
            ]
        }),
    )
}

/// Summary rows keyed by parameter name, `NA` read as missing.
pub fn read_summary_csv(path: &Path) -> Result<Vec<(String, [Option<f64>; 6])>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if headers != SUMMARY_COLUMNS {
        bail!("{} has unexpected columns", path.display());
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let mut vals = [None; 6];
        for (j, v) in vals.iter_mut().enumerate() {
            let s = &row[j + 1];
            *v = if s == "NA" { None } else { Some(s.parse()?) };
        }
        out.push((row[0].to_string(), vals));
    }
    Ok(out)
}

/// SHA-256 of a byte string as lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_csv() {
        let recs = parse_records("model,score\nA,1\nA,0\n", RecordFormat::Csv).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs.iter().map(|r| r.score).collect::<Vec<_>>(), [1, 0]);
    }

    #[test]
    fn non_binary_score_reports_line() {
        let err = parse_records("model,score\nA,1\nA,2\n", RecordFormat::Csv).unwrap_err();
        assert_eq!(err.to_string(), "non-binary score at line 3");
    }

    #[test]
    fn missing_score_column() {
        let err = parse_records("model,domain\nA,x\n", RecordFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("score"), "{err}");
    }

    #[test]
    fn jsonl_effort_and_extras() {
        let text = "{\"model\":\"A\",\"score\":1,\"reasoning_effort\":\"high\",\"seed\":7}\n\n{\"model\":\"B\",\"score\":false}\n";
        let recs = parse_records(text, RecordFormat::Jsonl).unwrap();
        assert_eq!(recs[0].reasoning_effort, Some(ReasoningEffort::High));
        assert_eq!(recs[0].extra["seed"], "7");
        assert_eq!(recs[1].score, 0);
        assert!(parse_records("{\"model\":\"A\"}\n", RecordFormat::Jsonl).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_unknown_columns() {
        let text = "model,score,domain,temperature\nA,1,math,0.5\nB,0,,0.7\n";
        let recs = parse_records(text, RecordFormat::Csv).unwrap();
        assert_eq!(recs[1].domain, None);
        let again = parse_records(std::str::from_utf8(&records_csv(&recs).unwrap()).unwrap(), RecordFormat::Csv).unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}

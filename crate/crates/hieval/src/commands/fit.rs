//! `hieval fit`.

use hieval_core::diagnostics::{quality_check, summary_table, QcReport};
use serde::Serialize;

use super::*;
use crate::cli::FitArgs;
use crate::model::resolve_model;
use crate::runner::{run_parallel, thread_count};
use crate::VERSION;

#[derive(Serialize)]
struct DiagnosticsFile<'a> {
    banner: &'static str,
    #[serde(flatten)]
    report: &'a QcReport,
    thresholds: QcThresholds,
    step_size: Vec<f64>,
    warmup_divergences: Vec<usize>,
    mean_tree_depth: Vec<f64>,
}

pub fn run(args: &FitArgs) -> CliResult<()> {
    let spec = resolve_model(&args.model).input()?;
    let prepared = prepare(&args.data, &spec)?;
    let config = args.sampler.config();
    config.validate().input()?;
    if !(args.mass > 0.0 && args.mass < 1.0) {
        return Err(CliError::input(anyhow::anyhow!("--mass must lie in (0, 1)")));
    }
    let thresholds = args.thresholds();
    eprintln!(
        "fitting {} ({} parameters) to {} cells, {} chains x ({} warmup + {} samples)",
        spec.name,
        prepared.layout.total_dim,
        prepared.cells.len(),
        config.chains,
        config.warmup,
        config.samples
    );
    let draws = run_parallel(&prepared.layout, Some(&prepared.cells), &config, thread_count(config.chains)).numeric()?;
    let rows = summary_table(&draws, &prepared.layout, args.mass).numeric()?;
    let qc = quality_check(&draws, &rows, &thresholds);

    let out = &args.out;
    let outputs = [MANIFEST, MODEL, CELLS_JSON, CELLS_CSV, DRAWS, SUMMARY, DIAGNOSTICS];
    let manifest = RunManifest {
        tool: "hieval".into(),
        version: VERSION.into(),
        model_ref: args.model.clone(),
        model_name: spec.name.clone(),
        data: args.data.data.clone(),
        data_sha256: prepared.sha256.clone(),
        data_format: match prepared.format {
            io::RecordFormat::Csv => "csv".into(),
            io::RecordFormat::Jsonl => "jsonl".into(),
        },
        group_by: prepared.group_by.clone(),
        first_repeat: args.data.first_repeat,
        sampler: config.clone(),
        mass: args.mass,
        thresholds,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    let write = || -> anyhow::Result<()> {
        io::write_json(&out.join(MODEL), &spec)?;
        io::write_json(&out.join(CELLS_JSON), &prepared.cells)?;
        io::write_cells_csv(&out.join(CELLS_CSV), &prepared.cells)?;
        io::write_draws_csv(&out.join(DRAWS), &draws)?;
        io::write_summary_csv(&out.join(SUMMARY), &rows)?;
        let depth = |c: &hieval_core::sampler::ChainDraws| {
            c.stats.iter().map(|s| s.tree_depth as f64).sum::<f64>() / c.stats.len().max(1) as f64
        };
        io::write_json(
            &out.join(DIAGNOSTICS),
            &DiagnosticsFile {
                banner: if qc.passed { "PASS" } else { "FAIL" },
                report: &qc,
                thresholds,
                step_size: draws.chains.iter().map(|c| c.step_size).collect(),
                warmup_divergences: draws.chains.iter().map(|c| c.warmup_divergences).collect(),
                mean_tree_depth: draws.chains.iter().map(depth).collect(),
            },
        )?;
        io::write_json(&out.join(MANIFEST), &manifest)
    };
    write().context("writing fit outputs").input()?;

    let fmt = |v: Option<f64>, p: usize| v.map_or("NA".to_string(), |v| format!("{v:.p$}"));
    println!(
        "{}: max r_hat {}, min n_eff {}, divergences {}",
        if qc.passed { "PASS" } else { "FAIL" },
        fmt(qc.max_rhat, 4),
        fmt(qc.min_ess, 0),
        qc.divergences.total
    );
    for f in &qc.failures {
        println!("  {f}");
    }
    if qc.passed {
        Ok(())
    } else {
        Err(CliError::diagnostics(anyhow::anyhow!(
            "{} quality check(s) failed; outputs written to {}",
            qc.failures.len(),
            out.display()
        )))
    }
}

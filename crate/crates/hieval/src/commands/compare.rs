//! `hieval compare`.

use hieval_core::compare::{rank_models, waic, CompareError, LogLikMatrix, WaicResult};

use super::*;
use crate::cli::CompareArgs;
use crate::svg::{waic_bars, WaicBar};

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const WAIC_SVG: &str = "waic.svg";

fn waic_of(fit: &FitDir, per_trial: bool) -> CliResult<WaicResult> {
    let m = if per_trial {
        LogLikMatrix::from_draws_per_trial(&fit.layout, &fit.draws, &fit.cells)
    } else {
        LogLikMatrix::from_draws(&fit.layout, &fit.draws, &fit.cells)
    };
    let m = m.map_err(|e| match e {
        CompareError::TrialsNeedBinomial => CliError::input(e),
        e => CliError::numeric(e),
    })?;
    let mut w = waic(&m).numeric()?;
    if let Some(warning) = &w.warning {
        eprintln!("warning: {}: {warning}", fit.dir.display());
    }
    // Several fits of one builtin would otherwise share a label.
    w.model = fit
        .dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .filter(|n| !n.is_empty() && *n != fit.spec.name)
        .map_or_else(|| fit.spec.name.clone(), |dir| format!("{} ({dir})", fit.spec.name));
    Ok(w)
}

pub fn run(args: &CompareArgs) -> CliResult<()> {
    if args.fits.len() < 2 {
        return Err(CliError::input(CompareError::TooFewModels(args.fits.len())));
    }
    let mut results = Vec::with_capacity(args.fits.len());
    for dir in &args.fits {
        let fit = FitDir::load(dir)?;
        results.push(waic_of(&fit, args.per_trial)?);
    }
    let ranking = rank_models(&results).map_err(|e| match e {
        CompareError::Misaligned(..) => CliError::input(e)
            .context("fits must share cells; fit every model with the same data and --group-by"),
        e => CliError::numeric(e),
    })?;
    // The best model is flagged when any other model is within 2 se of it.
    let best = &ranking.entries[0].model;
    let indistinct = |model: &str| {
        ranking
            .pairs
            .iter()
            .any(|p| p.better == *best && (p.worse == model || model == best) && p.indistinct)
    };
    let rows = ranking.entries.iter().map(|e| {
        vec![
            e.model.clone(),
            io::num(e.elpd_waic),
            io::num(e.p_waic),
            io::num(e.se),
            io::num(e.delta_vs_best),
            io::num(e.se_delta),
            io::num(e.waic_deviance),
            u8::from(indistinct(&e.model)).to_string(),
        ]
    });
    let header = [
        "model",
        "elpd_waic",
        "p_waic",
        "se",
        "delta_vs_best",
        "se_delta",
        "waic_deviance",
        "indistinct_from_best",
    ];
    let bars: Vec<WaicBar> = ranking
        .entries
        .iter()
        .map(|e| WaicBar {
            model: e.model.clone(),
            elpd: e.elpd_waic,
            se: e.se,
            delta: e.delta_vs_best,
            se_delta: e.se_delta,
        })
        .collect();
    let out = &args.out;
    let write = || -> anyhow::Result<()> {
        io::write_csv(&out.join(COMPARISON_CSV), &header, rows)?;
        io::write_json(&out.join(COMPARISON_JSON), &ranking)?;
        let svg = waic_bars(&bars, "Model comparison by WAIC");
        io::write_atomic(&out.join(WAIC_SVG), svg.as_bytes())
    };
    write().context("writing comparison outputs").input()?;
    for (i, e) in ranking.entries.iter().enumerate() {
        let flag = if i > 0 && indistinct(&e.model) { "  (not clearly distinguished)" } else { "" };
        println!(
            "{:<40} elpd {:>10.1} ± {:<7.1} delta {:>8.1} ± {:.1}{flag}",
            e.model, e.elpd_waic, e.se, e.delta_vs_best, e.se_delta
        );
    }
    Ok(())
}

//! `hieval report`.

use std::collections::BTreeMap;

use hieval_core::baseline::{mean_sem, t_test_independent, t_test_paired, ImbalancePolicy, TTestResult, Variance};
use hieval_core::density::ComponentKind;
use hieval_core::diagnostics::{all_series, trace_series, ParamSeries};
use hieval_core::posterior::{compare_intervals, hpdi, Interval};
use hieval_core::special::logit;

use super::*;
use crate::cli::{Imbalance, ReportArgs, Scale};
use crate::svg::{forest, trace, ForestRow};

pub const FOREST_CSV: &str = "forest.csv";
pub const FOREST_SVG: &str = "forest.svg";
pub const TRACE_SVG: &str = "trace.svg";
pub const OVERLAP_CSV: &str = "overlap.csv";
pub const BASELINE_CSV: &str = "baseline.csv";
pub const TTEST_CSV: &str = "ttest.csv";

const MAX_PLOTTED: usize = 40;
const MAX_PAIRED_GROUPS: usize = 12;
const MAX_TRACE: usize = 8;

/// Binary scores of each group, groups in first-appearance order.
fn group_scores(records: &[EvalRecord], factors: &[String]) -> Vec<(String, Vec<f64>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        let labels: Option<Vec<String>> = factors.iter().map(|f| r.factor(f)).collect();
        let Some(labels) = labels else { continue };
        let key = labels.join(",");
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(f64::from(r.score));
    }
    order
        .into_iter()
        .map(|k| {
            let v = groups.remove(&k).unwrap_or_default();
            (k, v)
        })
        .collect()
}

/// Empirical mean and SEM on the requested scale; the logit scale uses the
/// delta method and is undefined at 0 and 1.
fn on_scale(mean: f64, sem: Option<f64>, scale: Scale) -> (f64, Option<f64>) {
    match scale {
        Scale::Prob => (mean, sem),
        Scale::Logit if mean > 0.0 && mean < 1.0 => (logit(mean), sem.map(|s| s / (mean * (1.0 - mean)))),
        Scale::Logit => (f64::NAN, None),
    }
}

struct Plotted {
    component: String,
    row: ForestRow,
    interval: Interval,
    scale: &'static str,
}

fn opt(v: Option<f64>) -> String {
    v.filter(|v| v.is_finite()).map_or_else(|| "NA".into(), io::num)
}

fn ttests(groups: &[(String, Vec<f64>)], policy: ImbalancePolicy) -> Vec<(String, TTestResult)> {
    let mut out = Vec::new();
    for (i, (a, x)) in groups.iter().enumerate() {
        for (b, y) in &groups[i + 1..] {
            let tests = [
                t_test_independent(x, y, Variance::Welch),
                t_test_independent(x, y, Variance::Pooled),
                t_test_paired(x, y, policy),
            ];
            for t in tests {
                match t {
                    Ok(r) => out.push((format!("{}: {a} vs {b}", r.method.as_str()), r)),
                    Err(e) => eprintln!("warning: t-test {a} vs {b}: {e}"),
                }
            }
        }
    }
    out
}

pub fn run(args: &ReportArgs) -> CliResult<()> {
    if !(args.mass > 0.0 && args.mass < 1.0) {
        return Err(CliError::input(anyhow::anyhow!("--mass must lie in (0, 1)")));
    }
    let fit = FitDir::load(&args.fit)?;
    let layout = &fit.layout;
    let series: BTreeMap<String, ParamSeries> = all_series(&fit.draws, layout)
        .numeric()?
        .into_iter()
        .map(|s| (s.name.clone(), s))
        .collect();
    for name in &args.components {
        if layout.component(name).is_none() {
            let known: Vec<&str> = layout.components.iter().map(|c| c.name.as_str()).collect();
            return Err(CliError::input(anyhow::anyhow!(
                "no component {name:?}; the model has {}",
                known.join(", ")
            )));
        }
    }
    let chosen: Vec<_> = layout
        .components
        .iter()
        .filter(|c| {
            if args.components.is_empty() {
                c.size() <= MAX_PLOTTED
            } else {
                args.components.contains(&c.name)
            }
        })
        .collect();

    let records = match fit.records() {
        Ok(r) => Some(r),
        Err(e) => {
            eprintln!("warning: empirical baselines skipped: {e:#}");
            None
        }
    };

    let mut plotted = Vec::new();
    for comp in &chosen {
        let level = comp.kind == ComponentKind::Level;
        let prob = level && args.scale == Scale::Prob;
        let baselines: BTreeMap<String, Vec<f64>> = match (&records, level) {
            (Some(r), true) => group_scores(r, &comp.factors).into_iter().collect(),
            _ => BTreeMap::new(),
        };
        for i in 0..comp.size() {
            let name = comp.element_name(i);
            let key = if prob { format!("p_{name}") } else { name.clone() };
            let pooled = series[&key].pooled();
            let interval = hpdi(&pooled, args.mass).numeric()?;
            let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
            let label = if comp.factors.is_empty() { String::new() } else { comp.labels[i].clone() };
            let baseline = match baselines.get(&label) {
                Some(scores) if level => {
                    let (m, s) = mean_sem(scores).numeric()?;
                    Some(on_scale(m, s, args.scale))
                }
                _ => None,
            };
            plotted.push(Plotted {
                component: comp.name.clone(),
                row: ForestRow {
                    label: name,
                    mean,
                    low: interval.low,
                    high: interval.high,
                    baseline,
                },
                interval,
                scale: if prob { "prob" } else { "logit" },
            });
        }
    }

    let forest_rows = plotted.iter().map(|p| {
        let (m, s) = p.row.baseline.map_or((None, None), |(m, s)| (Some(m), s));
        vec![
            p.row.label.clone(),
            io::num(p.row.mean),
            io::num(p.row.low),
            io::num(p.row.high),
            p.scale.to_string(),
            opt(m),
            opt(s),
        ]
    });
    let mut overlaps = Vec::new();
    for (i, a) in plotted.iter().enumerate() {
        for b in plotted[i + 1..].iter().filter(|b| b.component == a.component) {
            let d = compare_intervals(&a.interval, &b.interval, args.equivalence).numeric()?;
            overlaps.push(vec![
                a.component.clone(),
                a.row.label.clone(),
                b.row.label.clone(),
                io::num(d.overlap_fraction),
                d.verdict.as_str().to_string(),
            ]);
        }
    }

    let baseline_by: Vec<String> = if args.baseline_by.is_empty() {
        layout
            .components
            .iter()
            .find(|c| c.kind == ComponentKind::Level && !c.factors.is_empty())
            .map(|c| c.factors.clone())
            .unwrap_or_default()
    } else {
        args.baseline_by.clone()
    };
    let groups = match &records {
        Some(r) if !baseline_by.is_empty() => group_scores(r, &baseline_by),
        _ => Vec::new(),
    };
    let mut baseline_rows = Vec::new();
    for (g, scores) in &groups {
        let (m, s) = mean_sem(scores).numeric()?;
        baseline_rows.push(vec![g.clone(), scores.len().to_string(), io::num(m), opt(s)]);
    }
    let policy = match args.imbalance {
        Imbalance::Error => ImbalancePolicy::Error,
        Imbalance::Truncate => ImbalancePolicy::Truncate,
        Imbalance::Subsample => ImbalancePolicy::Subsample { seed: args.seed },
    };
    let tests = if groups.len() <= MAX_PAIRED_GROUPS {
        ttests(&groups, policy)
    } else {
        eprintln!("warning: {} baseline groups; t-tests skipped above {MAX_PAIRED_GROUPS}", groups.len());
        Vec::new()
    };
    let ttest_rows = tests
        .iter()
        .map(|(name, r)| vec![name.clone(), io::num(r.t), io::num(r.df), io::num(r.p)]);

    let trace_names: Vec<String> = if args.trace.is_empty() {
        fit.draws.names.iter().filter(|n| !n.contains('[')).take(MAX_TRACE).cloned().collect()
    } else {
        args.trace.clone()
    };
    let mut panels = Vec::new();
    for name in &trace_names {
        panels.push((name.clone(), trace_series(&fit.draws, layout, name).input()?));
    }

    let pct = args.mass * 100.0;
    let title = format!("{}: posterior mean and {pct}% HPDI ({} scale)", fit.spec.name, args.scale.as_str());
    let axis = match args.scale {
        Scale::Prob => "success probability (slopes on logit scale)",
        Scale::Logit => "logit",
    };
    let reference = (args.scale == Scale::Logit).then_some(0.0);
    let rows: Vec<ForestRow> = plotted.iter().map(|p| p.row.clone()).collect();
    let out = args.out.clone().unwrap_or_else(|| fit.dir.clone());
    let write = || -> anyhow::Result<()> {
        io::write_csv(
            &out.join(FOREST_CSV),
            &["parameter", "mean", "hpdi_low", "hpdi_high", "scale", "empirical_mean", "sem"],
            forest_rows,
        )?;
        io::write_atomic(&out.join(FOREST_SVG), forest(&rows, &title, axis, reference).as_bytes())?;
        io::write_atomic(&out.join(TRACE_SVG), trace(&panels, "Post-warmup traces").as_bytes())?;
        io::write_csv(
            &out.join(OVERLAP_CSV),
            &["component", "a", "b", "overlap_fraction", "verdict"],
            overlaps.clone(),
        )?;
        io::write_csv(&out.join(BASELINE_CSV), &["group", "n", "mean", "sem"], baseline_rows)?;
        io::write_csv(&out.join(TTEST_CSV), &["test", "t", "df", "p"], ttest_rows)
    };
    write().context("writing report outputs").input()?;
    for o in &overlaps {
        println!("{} vs {}: {} (overlap {:.2})", o[1], o[2], o[4], o[3].parse::<f64>().unwrap_or(f64::NAN));
    }
    println!("report written to {}", out.display());
    Ok(())
}

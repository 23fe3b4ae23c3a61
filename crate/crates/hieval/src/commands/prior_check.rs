//! `hieval prior-check`.

use hieval_core::density::prior_predictive_draw;
use hieval_core::posterior::quantile_sorted;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cli::PriorCheckArgs;
use crate::model::resolve_model;

pub const PRIOR_CHECK_CSV: &str = "prior_check.csv";

const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Simulated success rates, `draws` per cell, cell-major.
pub fn prior_rates(prepared: &Prepared, draws: usize, seed: u64) -> CliResult<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = &prepared.cells;
    let mut rates = vec![Vec::with_capacity(draws); cells.len()];
    for _ in 0..draws {
        let (_, k) = prior_predictive_draw(&prepared.layout, cells, &mut rng).numeric()?;
        for ((r, k), cell) in rates.iter_mut().zip(k).zip(&cells.cells) {
            r.push(k as f64 / cell.n as f64);
        }
    }
    Ok(rates)
}

pub fn run(args: &PriorCheckArgs) -> CliResult<()> {
    if args.draws < 1 {
        return Err(CliError::input(anyhow::anyhow!("--draws must be at least 1")));
    }
    let spec = resolve_model(&args.model).input()?;
    let prepared = prepare(&args.data, &spec)?;
    let rates = prior_rates(&prepared, args.draws, args.seed)?;
    let cells = &prepared.cells;
    let mut header: Vec<&str> = cells.factors.iter().map(|f| f.name.as_str()).collect();
    header.extend(["n", "mean", "q05", "q25", "q50", "q75", "q95"]);
    let mut grand = 0.0;
    let rows: Vec<Vec<String>> = rates
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut sorted = r.clone();
            sorted.sort_by(f64::total_cmp);
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            grand += mean;
            let mut row: Vec<String> = cells.labels(i).into_iter().map(String::from).collect();
            row.push(cells.cells[i].n.to_string());
            row.push(io::num(mean));
            row.extend(QUANTILES.iter().map(|&q| io::num(quantile_sorted(&sorted, q))));
            row
        })
        .collect();
    io::write_csv(&args.out.join(PRIOR_CHECK_CSV), &header, rows)
        .context("writing prior check")
        .input()?;
    let grand = grand / rates.len() as f64;
    println!("prior predictive mean success rate {grand:.3} over {} cells", rates.len());
    if !(0.02..=0.98).contains(&grand) {
        println!("warning: the prior concentrates near {}", if grand < 0.5 { 0 } else { 1 });
    }
    Ok(())
}

//! Chains in parallel threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use hieval_core::dataset::CellTable;
use hieval_core::density::ParameterLayout;
use hieval_core::gradient::ModelDensity;
use hieval_core::sampler::{sample_chain, ChainDraws, Draws, SamplerConfig, SamplerError};

/// Worker count: `HIEVAL_THREADS` if set to a positive integer, otherwise
/// the available parallelism; never more than `chains`.
pub fn thread_count(chains: usize) -> usize {
    let env = std::env::var("HIEVAL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    let n = env
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    n.clamp(1, chains.max(1))
}

/// Runs `config.chains` chains on the posterior (or on the prior alone when
/// `cells` is `None`). Each chain owns its seed, so the output does not
/// depend on the thread count.
pub fn run_parallel(
    layout: &ParameterLayout,
    cells: Option<&CellTable>,
    config: &SamplerConfig,
    threads: usize,
) -> Result<Draws, SamplerError> {
    config.validate()?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<ChainDraws, SamplerError>>>> = Mutex::new(vec![None; config.chains]);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, config.chains) {
            s.spawn(|| loop {
                let c = next.fetch_add(1, Ordering::Relaxed);
                if c >= config.chains {
                    break;
                }
                let result = match cells {
                    Some(cells) => ModelDensity::new(layout, cells)
                        .map_err(SamplerError::from)
                        .and_then(|mut d| sample_chain(&mut d, config, c, |_| {})),
                    None => sample_chain(&mut ModelDensity::prior_only(layout), config, c, |_| {}),
                };
                slots.lock().expect("chain slot lock")[c] = Some(result);
            });
        }
    });
    let chains = slots
        .into_inner()
        .expect("chain slot lock")
        .into_iter()
        .map(|r| r.expect("every chain ran"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Draws::from_layout(layout, chains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hieval_core::{build_layout, builtin_spec};

    #[test]
    fn thread_count_does_not_change_draws() {
        let spec = builtin_spec("use_case1").unwrap();
        let cells = CellTable {
            factors: vec![hieval_core::FactorIndex::from_levels("domain", vec!["a".into(), "b".into()])],
            covariate_names: vec![],
            cells: vec![
                hieval_core::Cell { codes: vec![0], k: 3, n: 10, covariates: vec![] },
                hieval_core::Cell { codes: vec![1], k: 8, n: 10, covariates: vec![] },
            ],
        };
        let layout = build_layout(&spec, &cells).unwrap();
        let config = SamplerConfig { chains: 3, warmup: 100, samples: 50, seed: 9, ..Default::default() };
        let a = run_parallel(&layout, Some(&cells), &config, 1).unwrap();
        let b = run_parallel(&layout, Some(&cells), &config, 3).unwrap();
        assert_eq!(a, b);
    }
}

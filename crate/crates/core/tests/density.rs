use hieval_core::dataset::{aggregate_cells, CellTable, EvalRecord};
use hieval_core::density::{
    betabinomial_log_pmf, binomial_log_pmf, build_layout, constrain, log_posterior, log_posterior_parts,
    pointwise_log_lik, prior_predictive_draw,
};
use hieval_core::modelspec::{builtin_spec, LevelSpec, LikelihoodFamily, LikelihoodSpec, MeanSpec, ModelSpec, PriorSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.8378770664093453;

fn normal_lpdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * LN_2PI
}

fn half_normal_lpdf(x: f64, sd: f64) -> f64 {
    normal_lpdf(x, 0.0, sd) + 2f64.ln()
}

/// `ln C(n, k)` by summing logs, independent of lgamma.
fn ln_choose_sum(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

fn domain_cells(counts: &[(&str, u64, u64)]) -> CellTable {
    let mut recs = Vec::new();
    for &(d, k, n) in counts {
        for i in 0..n {
            let mut r = EvalRecord::new("m", u8::from(i < k));
            r.domain = Some(d.into());
            recs.push(r);
        }
    }
    aggregate_cells(&recs, &["domain"], &[]).unwrap()
}

#[test]
fn use_case1_density_matches_hand_formula() {
    let cells = domain_cells(&[("a", 7, 20), ("b", 15, 18)]);
    let layout = build_layout(&builtin_spec("use_case1").unwrap(), &cells).unwrap();
    let idx = |n: &str| layout.scalar_index(n).unwrap();
    let mut x = vec![0.0; layout.total_dim];
    let (mu, ls_o, z_o, ls_d, za, zb) = (0.3, -0.4, 0.7, -1.9, -0.8, 1.2);
    x[idx("mu_overall")] = mu;
    x[idx("sigma_overall")] = ls_o;
    x[idx("z_overall")] = z_o;
    x[idx("sigma_domain")] = ls_d;
    x[idx("z_domain[a]")] = za;
    x[idx("z_domain[b]")] = zb;
    let (s_o, s_d) = (f64::exp(ls_o), f64::exp(ls_d));
    let mut expect = normal_lpdf(mu, 0.0, 1.0)
        + half_normal_lpdf(s_o, 0.5)
        + ls_o
        + normal_lpdf(z_o, 0.0, 1.0)
        + half_normal_lpdf(s_d, 0.1)
        + ls_d
        + normal_lpdf(za, 0.0, 1.0)
        + normal_lpdf(zb, 0.0, 1.0);
    for (z, k, n) in [(za, 7u64, 20u64), (zb, 15, 18)] {
        let eta = mu + s_o * z_o + s_d * z;
        let p = 1.0 / (1.0 + (-eta).exp());
        expect += ln_choose_sum(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln();
    }
    let got = log_posterior(&layout, &x, &cells).unwrap();
    assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
}

#[test]
fn likelihood_decomposes_over_cells() {
    let cells = domain_cells(&[("a", 3, 9), ("b", 0, 4), ("c", 11, 11)]);
    let layout = build_layout(&builtin_spec("use_case1").unwrap(), &cells).unwrap();
    let x: Vec<f64> = (0..layout.total_dim).map(|i| 0.3 * (i as f64) - 0.7).collect();
    let parts = log_posterior_parts(&layout, &x, &cells).unwrap();
    let draw = constrain(&layout, &x).unwrap();
    let pointwise: f64 = pointwise_log_lik(&layout, &draw, &cells).unwrap().iter().sum();
    assert!((parts.likelihood - pointwise).abs() < 1e-12);
    assert_eq!(parts.total(), log_posterior(&layout, &x, &cells).unwrap());
}

/// Single scalar with a positive prior: the density of the log-transformed
/// variable, Jacobian included, must integrate to one.
#[test]
fn log_transform_jacobian_integrates_to_one() {
    for prior in [PriorSpec::half_normal(0.7), PriorSpec::gamma(2.5, 1.5), PriorSpec::gamma(0.8, 0.3)] {
        let spec = ModelSpec {
            name: "scale".into(),
            likelihood: LikelihoodSpec {
                family: LikelihoodFamily::BinomialLogit,
                dispersion_prior: None,
            },
            levels: vec![
                LevelSpec::new(
                    "g",
                    &["domain"],
                    MeanSpec::Prior {
                        prior: PriorSpec::normal(0.0, 1.0),
                        per_element: false,
                    },
                    Some(prior),
                ),
            ],
            slopes: vec![],
            predictor_terms: vec!["g".into()],
        };
        let cells = domain_cells(&[("a", 0, 0)]);
        let layout = build_layout(&spec, &cells).unwrap();
        let empty = CellTable { cells: vec![], ..cells.clone() };
        let si = layout.scalar_index("sigma_g").unwrap();
        // Integrate the log-scale coordinate; the other coordinates sit at 0
        // where their standard normal densities are known.
        let others: f64 = (0..layout.total_dim).filter(|&i| i != si).map(|_| normal_lpdf(0.0, 0.0, 1.0)).sum();
        let (lo, hi, steps) = (-40.0, 12.0, 200_000);
        let h = (hi - lo) / steps as f64;
        let mut total = 0.0;
        for j in 0..=steps {
            let mut x = vec![0.0; layout.total_dim];
            x[si] = lo + j as f64 * h;
            let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
            total += w * (log_posterior(&layout, &x, &empty).unwrap() - others).exp();
        }
        assert!((total * h - 1.0).abs() < 1e-6, "{prior:?}: {}", total * h);
    }
}

#[test]
fn betabinomial_tends_to_binomial() {
    for (k, n, p) in [(0u64, 5u64, 0.3), (4, 9, 0.55), (20, 20, 0.9)] {
        let phi = 1e9;
        let bb = betabinomial_log_pmf(k, n, p * phi, (1.0 - p) * phi).unwrap();
        let b = binomial_log_pmf(k, n, p);
        assert!((bb - b).abs() < 1e-5, "{k}/{n}: {bb} vs {b}");
    }
}

proptest! {
    #[test]
    fn pmfs_sum_to_one(n in 0u64..60, alpha in 0.05f64..30.0, beta in 0.05f64..30.0, p in 0.001f64..0.999) {
        let bb: f64 = (0..=n).map(|k| betabinomial_log_pmf(k, n, alpha, beta).unwrap().exp()).sum();
        let b: f64 = (0..=n).map(|k| binomial_log_pmf(k, n, p).exp()).sum();
        prop_assert!((bb - 1.0).abs() < 1e-9, "bb {}", bb);
        prop_assert!((b - 1.0).abs() < 1e-9, "b {}", b);
    }
}

#[test]
fn use_case1_prior_predictive_is_centered() {
    let cells = domain_cells(&[("a", 10, 40), ("b", 30, 40)]);
    let layout = build_layout(&builtin_spec("use_case1").unwrap(), &cells).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 20_000;
    let mut sum = 0.0;
    for _ in 0..draws {
        let (_, k) = prior_predictive_draw(&layout, &cells, &mut rng).unwrap();
        sum += k.iter().zip(&cells.cells).map(|(&k, c)| k as f64 / c.n as f64).sum::<f64>() / 2.0;
    }
    let mean = sum / draws as f64;
    assert!((mean - 0.5).abs() < 0.05, "{mean}");
}

use hieval_core::compare::{rank_models, waic, waic_diff, LogLikMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(name: &str, draws: usize, cells: usize, values: Vec<f64>) -> LogLikMatrix {
    LogLikMatrix::new(name, (0..cells).map(|i| format!("c{i}")).collect(), draws, values)
}

/// Direct evaluation: lppd_i = ln(mean_s exp(l_si)), p_i = sample variance.
fn direct(draws: usize, cells: usize, v: &[f64]) -> (f64, f64, Vec<f64>) {
    let mut lppd = 0.0;
    let mut p = 0.0;
    let mut point = Vec::new();
    for i in 0..cells {
        let col: Vec<f64> = (0..draws).map(|s| v[s * cells + i]).collect();
        let l = (col.iter().map(|x| x.exp()).sum::<f64>() / draws as f64).ln();
        let m = col.iter().sum::<f64>() / draws as f64;
        let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        lppd += l;
        p += var;
        point.push(l - var);
    }
    (lppd, p, point)
}

#[test]
fn two_draws_one_cell() {
    let (a, b) = (0.5f64.ln(), 0.25f64.ln());
    let w = waic(&matrix("m", 2, 1, vec![a, b])).unwrap();
    assert!((w.lppd - 0.375f64.ln()).abs() < 1e-12);
    let mean = (a + b) / 2.0;
    let var = (a - mean).powi(2) + (b - mean).powi(2);
    assert!((w.p_waic - var).abs() < 1e-12);
    assert!((w.elpd_waic - (0.375f64.ln() - var)).abs() < 1e-12);
    assert_eq!(w.waic_deviance, -2.0 * w.elpd_waic);
    assert!(w.warning.is_some());
}

#[test]
fn random_matrices_match_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (s, n) = (rng.random_range(2..40), rng.random_range(1..8));
        let v: Vec<f64> = (0..s * n).map(|_| rng.random_range(-6.0..-0.01)).collect();
        let w = waic(&matrix("m", s, n, v.clone())).unwrap();
        let (lppd, p, _) = direct(s, n, &v);
        assert!((w.lppd - lppd).abs() < 1e-10 && (w.p_waic - p).abs() < 1e-10);

        let u: Vec<f64> = (0..s * n).map(|_| rng.random_range(-6.0..-0.01)).collect();
        let wu = waic(&matrix("u", s, n, u.clone())).unwrap();
        let (_, _, pa) = direct(s, n, &v);
        let (_, _, pb) = direct(s, n, &u);
        let d: Vec<f64> = pa.iter().zip(&pb).map(|(a, b)| a - b).collect();
        let md = d.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            (n as f64 * d.iter().map(|x| (x - md).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        let (delta, se_delta) = waic_diff(&w, &wu).unwrap();
        assert!((delta - d.iter().sum::<f64>()).abs() < 1e-10 && (se_delta - se).abs() < 1e-10);
    }
}

#[test]
fn constant_pointwise_difference_has_zero_se() {
    let v = vec![-1.0, -2.0, -1.5, -0.5, -3.0, -2.5];
    let shifted: Vec<f64> = v.iter().map(|x| x - 0.75).collect();
    let a = waic(&matrix("a", 3, 2, v)).unwrap();
    let b = waic(&matrix("b", 3, 2, shifted)).unwrap();
    let (delta, se) = waic_diff(&a, &b).unwrap();
    assert!((delta - 1.5).abs() < 1e-12);
    assert!(se < 1e-12);
    assert_eq!(waic_diff(&a, &a).unwrap(), (0.0, 0.0));
}

#[test]
fn ranking_sorts_and_flags() {
    let mk = |name: &str, c: f64| waic(&matrix(name, 2, 2, vec![c, c, c, c])).unwrap();
    let r = rank_models(&[mk("a", -50.0), mk("b", -75.0), mk("c", -45.0)]).unwrap();
    assert_eq!(r.order, [2, 0, 1]);
    let tie = rank_models(&[mk("x", -3.0), mk("y", -3.0)]).unwrap();
    assert!(tie.pairs[0].indistinct);
    assert!(rank_models(&[mk("x", -3.0)]).is_err());
    let other = waic(&matrix("z", 2, 3, vec![-1.0; 6])).unwrap();
    assert!(rank_models(&[mk("x", -3.0), other]).is_err());
}

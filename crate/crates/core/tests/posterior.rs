use hieval_core::posterior::{
    compare_intervals, hpdi, overlap_fraction, quantile_interval, threshold_exceedance, to_probability_scale, Interval,
    Verdict,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};

fn draws<D: Distribution<f64>>(d: D, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn iv(low: f64, high: f64) -> Interval {
    Interval { low, high, mass: 0.95 }
}

#[test]
fn normal_and_exponential_intervals() {
    let z = draws(StandardNormal, 200_000, 1);
    let h = hpdi(&z, 0.95).unwrap();
    assert!((h.low + 1.959964).abs() < 0.05 && (h.high - 1.959964).abs() < 0.05, "{h:?}");
    let q = quantile_interval(&z, 0.95).unwrap();
    assert!((q.low + 1.959964).abs() < 0.05 && (q.high - 1.959964).abs() < 0.05, "{q:?}");

    let e = draws(Exp1, 200_000, 2);
    let h = hpdi(&e, 0.95).unwrap();
    assert!(h.low.abs() < 0.08 && (h.high - (-(0.05f64).ln())).abs() < 0.08, "{h:?}");
    let q = quantile_interval(&e, 0.95).unwrap();
    assert!(q.low > 0.02 && h.width() < q.width());
}

#[test]
fn hpdi_holds_its_mass() {
    let v = draws(Normal::new(3.0, 2.0).unwrap(), 1001, 5);
    let h = hpdi(&v, 0.8).unwrap();
    let inside = v.iter().filter(|&&x| h.contains(x)).count();
    assert!(inside >= (0.8f64 * 1001.0).ceil() as usize);
}

#[test]
fn overlap_geometry() {
    assert_eq!(overlap_fraction(&iv(0.44, 0.49), &iv(0.83, 0.85)).unwrap(), 0.0);
    assert_eq!(overlap_fraction(&iv(0.0, 1.0), &iv(0.25, 0.75)).unwrap(), 1.0);
    assert_eq!(overlap_fraction(&iv(0.0, 1.0), &iv(0.5, 1.5)).unwrap(), 0.5);
    let d = compare_intervals(&iv(0.44, 0.49), &iv(0.83, 0.85), 0.99).unwrap();
    assert_eq!(d.verdict, Verdict::Different);
    let mismatch = Interval { low: 0.0, high: 1.0, mass: 0.9 };
    assert!(overlap_fraction(&iv(0.0, 1.0), &mismatch).is_err());
}

#[test]
fn exceedance_matches_normal_tail() {
    let v = draws(Normal::new(0.249, 0.01).unwrap(), 200_000, 9);
    let p = threshold_exceedance(&v, 0.25);
    // Φ(−0.1)
    assert!((p - 0.460172).abs() < 0.005, "{p}");
}

#[test]
fn probability_scale_keeps_order_and_range() {
    let v = draws(Normal::new(0.0, 3.0).unwrap(), 2000, 4);
    let p = to_probability_scale(&v);
    assert_eq!(to_probability_scale(&[0.0]), [0.5]);
    for (a, b) in v.windows(2).zip(p.windows(2)) {
        assert_eq!(a[0] < a[1], b[0] < b[1]);
    }
    let h = hpdi(&p, 0.95).unwrap();
    assert!(h.low > 0.0 && h.high < 1.0);
}

proptest! {
    #[test]
    fn hpdi_is_narrowest_covering_window(seed in 0u64..10_000, n in 10usize..400, mass in 0.05f64..0.99, skew in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (skew * z).exp() + z
        }).collect();
        let h = hpdi(&v, mass).unwrap();
        v.sort_by(f64::total_cmp);
        let k = (mass * n as f64).ceil() as usize;
        let inside = v.iter().filter(|&&x| h.contains(x)).count();
        prop_assert!(inside >= k);
        for i in 0..=n - k {
            prop_assert!(h.width() <= v[i + k - 1] - v[i] + 1e-12);
        }
        if n >= 200 {
            let q = quantile_interval(&v, mass).unwrap();
            let lo = v.partition_point(|&x| x < q.low);
            let hi = v.partition_point(|&x| x <= q.high);
            if hi - lo >= k {
                prop_assert!(h.width() <= q.width() + 1e-12);
            }
        }
    }

    #[test]
    fn decision_is_symmetric(a in -5.0f64..5.0, wa in 0.0f64..3.0, b in -5.0f64..5.0, wb in 0.0f64..3.0) {
        let (x, y) = (iv(a, a + wa), iv(b, b + wb));
        prop_assert_eq!(compare_intervals(&x, &y, 0.99).unwrap(), compare_intervals(&y, &x, 0.99).unwrap());
    }
}

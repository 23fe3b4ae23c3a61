//! Special functions used by the densities, the gradient tape and the
//! baseline tests.
//!
//! Everything here is `no_std`; elementary functions come from `libm` so
//! results are bit-identical across platforms.

use crate::error::DomainError;

/// `ln(2π) / 2`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `x > 0`.
///
/// Backed by the msun `lgamma` port in `libm` (sub-ulp-class accuracy over
/// the positive axis).
pub fn lgamma(x: f64) -> Result<f64, DomainError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DomainError::new("lgamma", x));
    }
    Ok(lgamma_unchecked(x))
}

#[inline]
pub(crate) fn lgamma_unchecked(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Digamma function ψ(x) for `x > 0`.
pub fn digamma(x: f64) -> Result<f64, DomainError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DomainError::new("digamma", x));
    }
    Ok(digamma_unchecked(x))
}

/// Recurrence up to `x >= 10`, then the asymptotic expansion
/// `ln x - 1/(2x) - Σ B_{2k} / (2k x^{2k})`.
pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli-number coefficients B_{2k} / (2k), k = 1..7.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + libm::log(x) - 0.5 * inv - series
}

/// `ln B(a, b)` for `a, b > 0`.
pub fn log_beta(a: f64, b: f64) -> Result<f64, DomainError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(DomainError::new("log_beta", a));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(DomainError::new("log_beta", b));
    }
    Ok(lgamma_unchecked(a) + lgamma_unchecked(b) - lgamma_unchecked(a + b))
}

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `ln(p / (1 - p))`.
#[inline]
pub fn logit(p: f64) -> f64 {
    libm::log(p) - libm::log1p(-p)
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    lgamma_unchecked(n + 1.0) - lgamma_unchecked(k + 1.0) - lgamma_unchecked(n - k + 1.0)
}

/// `ln(Σ exp(x_i))`; `-∞` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| libm::exp(x - max)).sum();
    max + libm::log(sum)
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile (Acklam's rational approximation followed by
/// one Halley step against `erfc`).
pub fn normal_quantile(p: f64) -> Result<f64, DomainError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DomainError::new("normal_quantile", p));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log1p(-p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(x * x / 2.0);
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Continued fraction (modified Lentz), using the symmetry
/// `I_x(a, b) = 1 - I_{1-x}(b, a)` to stay in the fast-converging region.
pub fn reg_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64, DomainError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(DomainError::new("reg_incomplete_beta", a));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(DomainError::new("reg_incomplete_beta", b));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(DomainError::new("reg_incomplete_beta", x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = lgamma_unchecked(a + b) - lgamma_unchecked(a) - lgamma_unchecked(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_continued_fraction(x, a, b) / a)
    } else {
        Ok(1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b)
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    /// Stirling series with many terms; accurate to ~1e-15 for x >= 20.
    fn stirling(x: f64) -> f64 {
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        (x - 0.5) * libm::log(x) - x + LN_SQRT_2PI
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
    }

    #[test]
    fn lgamma_factorials() {
        assert_eq!(lgamma(1.0).unwrap(), 0.0);
        assert_eq!(lgamma(2.0).unwrap(), 0.0);
        assert!(close(lgamma(5.0).unwrap(), libm::log(24.0), 1e-14));
        let mut fact = 0.0f64;
        for n in 1..60u32 {
            fact += libm::log(n as f64);
            assert!(close(lgamma(n as f64 + 1.0).unwrap(), fact, 1e-13), "n={n}");
        }
    }

    #[test]
    fn lgamma_half_and_large() {
        let sqrt_pi = libm::sqrt(core::f64::consts::PI);
        assert!(close(lgamma(0.5).unwrap(), libm::log(sqrt_pi), 1e-14));
        for &x in &[20.5, 123.25, 1e3, 5e4, 1e6] {
            let (a, b) = (lgamma(x).unwrap(), stirling(x));
            assert!((a - b).abs() / b.abs() < 1e-12, "x={x}: {a} vs {b}");
        }
        // Γ(x+1) = xΓ(x) near the lower end of the supported range.
        for &x in &[1e-3, 0.01, 0.3] {
            let lhs = lgamma(x + 1.0).unwrap();
            let rhs = libm::log(x) + lgamma(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn digamma_euler_mascheroni() {
        // Oracle: ψ(1) = -γ, with γ from the slowly converging series
        // H_n - ln n - 1/(2n) + 1/(12 n^2).
        let n = 100_000u32;
        let harmonic: f64 = (1..=n).rev().map(|k| 1.0 / k as f64).sum();
        let nf = n as f64;
        let gamma = harmonic - libm::log(nf) - 0.5 / nf + 1.0 / (12.0 * nf * nf);
        assert!((digamma(1.0).unwrap() + gamma).abs() < 1e-12);
        assert!((digamma(1.0).unwrap() + 0.577_215_664_9).abs() < 1e-10);
    }

    #[test]
    fn digamma_matches_lgamma_differences() {
        for &x in &[1e-3_f64, 0.05, 0.7, 1.5, 3.0, 9.9, 10.1, 47.0, 1e4, 1e6] {
            let h = 1e-5 * x.max(1e-2);
            let fd = (lgamma(x + h).unwrap() - lgamma(x - h).unwrap()) / (2.0 * h);
            let d = digamma(x).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "x={x}: {fd} vs {d}");
        }
        // Recurrence ψ(x+1) = ψ(x) + 1/x holds to high precision across the
        // branch point of the implementation.
        for &x in &[1e-3, 0.5, 8.5, 9.5, 10.5, 200.0] {
            let lhs = digamma(x + 1.0).unwrap();
            let rhs = digamma(x).unwrap() + 1.0 / x;
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn log_beta_and_logistic() {
        assert_eq!(log_beta(1.0, 1.0).unwrap(), 0.0);
        assert!(close(log_beta(2.0, 3.0).unwrap(), libm::log(1.0 / 12.0), 1e-14));
        assert_eq!(inv_logit(0.0), 0.5);
        assert_eq!(inv_logit(800.0), 1.0);
        assert_eq!(inv_logit(-800.0), 0.0);
        assert!(inv_logit(-700.0) > 0.0);
        assert!(close(softplus(1000.0), 1000.0, 1e-15));
        assert!(close(logit(inv_logit(1.3)), 1.3, 1e-14));
    }

    #[test]
    fn domain_errors() {
        assert!(lgamma(0.0).is_err());
        assert!(lgamma(-1.0).is_err());
        assert!(digamma(f64::NAN).is_err());
        assert!(log_beta(1.0, 0.0).is_err());
        assert!(reg_incomplete_beta(1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1-x)^b.
        for &x in &[0.01, 0.3, 0.5, 0.77, 0.99] {
            assert!(close(reg_incomplete_beta(x, 1.0, 1.0).unwrap(), x, 1e-14));
            assert!(close(reg_incomplete_beta(x, 2.5, 1.0).unwrap(), libm::pow(x, 2.5), 1e-13));
            let want = 1.0 - libm::pow(1.0 - x, 3.0);
            assert!(close(reg_incomplete_beta(x, 1.0, 3.0).unwrap(), want, 1e-13));
        }
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-10, 0.001, 0.025, 0.3, 0.5, 0.975, 0.999_99] {
            let x = normal_quantile(p).unwrap();
            assert!((normal_cdf(x) - p).abs() < 1e-13 * p.max(1e-3));
        }
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_stable() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!(close(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + core::f64::consts::LN_2, 1e-15));
        assert!(close(log_add_exp(-1.0, -2.0), log_sum_exp(&[-1.0, -2.0]), 1e-15));
    }
}

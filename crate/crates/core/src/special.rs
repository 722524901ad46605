//! Gamma-family special functions and log-domain helpers.
//!
//! Only integer and half-integer shape parameters are supported. Those are the
//! only orders appearing in the minimax MSE expressions (`M`, `M + 1/2`,
//! `M + 1`) and in the chi-square tail of a complex Gaussian norm.

use num_complex::Complex64;

use crate::error::{Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const LN_PI: f64 = 1.144_729_885_849_400_2;

const SERIES_MAX_TERMS: usize = 10_000;
const CF_MAX_TERMS: usize = 10_000;
const EPS: f64 = 1e-16;

/// Shape parameter classified as integer or half-integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    /// `m = k`, `k >= 1`.
    Integer(u32),
    /// `m = k + 1/2`, `k >= 0`.
    HalfInteger(u32),
}

fn classify(m: f64) -> Result<Shape> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::domain(format!("gamma shape must be positive, got {m}")));
    }
    let twice = 2.0 * m;
    if twice.fract() != 0.0 || twice > f64::from(u32::MAX) {
        return Err(Error::domain(format!(
            "gamma shape must be an integer or half-integer, got {m}"
        )));
    }
    let twice = twice as u32;
    if twice % 2 == 0 {
        Ok(Shape::Integer(twice / 2))
    } else {
        Ok(Shape::HalfInteger(twice / 2))
    }
}

fn ln_gamma_shape(shape: Shape) -> f64 {
    match shape {
        // ln (k-1)!
        Shape::Integer(k) => (1..k).map(|i| f64::from(i).ln()).sum(),
        // ln( sqrt(pi) * prod_{i<k} (i + 1/2) )
        Shape::HalfInteger(k) => {
            0.5 * LN_PI + (0..k).map(|i| (f64::from(i) + 0.5).ln()).sum::<f64>()
        }
    }
}

/// Gamma function for integer and half-integer arguments.
///
/// Integer `m` gives `(m-1)!`; half-integer `m = k + 1/2` gives
/// `sqrt(pi) * (1/2)(3/2)...(k - 1/2)`, which equals `(2k)! sqrt(pi) / (4^k k!)`.
pub fn gamma_fn(m: f64) -> Result<f64> {
    classify(m).map(gamma_shape)
}

fn gamma_shape(shape: Shape) -> f64 {
    match shape {
        Shape::Integer(k) => (1..k).map(f64::from).product(),
        Shape::HalfInteger(k) => SQRT_PI * (0..k).map(|i| f64::from(i) + 0.5).product::<f64>(),
    }
}

/// Natural log of [`gamma_fn`]; finite for shapes where `gamma_fn` overflows.
pub fn ln_gamma_fn(m: f64) -> Result<f64> {
    classify(m).map(ln_gamma_shape)
}

/// Upper incomplete gamma function `int_x^inf t^(m-1) e^(-t) dt`.
pub fn upper_incomplete_gamma(m: f64, x: f64) -> Result<f64> {
    let shape = classify(m)?;
    check_x(x)?;
    let ln_q = ln_regularized_upper(shape, m, x);
    let gamma = gamma_shape(shape);
    if gamma.is_finite() && ln_q > -700.0 {
        Ok(gamma * ln_q.exp())
    } else {
        Ok((ln_q + ln_gamma_shape(shape)).exp())
    }
}

/// Regularized upper incomplete gamma `Q(m, x) = upper_incomplete_gamma(m, x) / gamma_fn(m)`.
///
/// For integer `m` this is the probability that a `Gamma(m, 1)` variable exceeds
/// `x`, i.e. `P(||v||^2 > x)` for `v ~ CN(0, I_m)`.
pub fn regularized_upper_gamma(m: f64, x: f64) -> Result<f64> {
    let shape = classify(m)?;
    check_x(x)?;
    Ok(ln_regularized_upper(shape, m, x).exp())
}

fn check_x(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!(
            "incomplete gamma argument must be nonnegative, got {x}"
        )));
    }
    Ok(())
}

/// `ln Q(m, x)`; `-inf` when the tail underflows entirely.
fn ln_regularized_upper(shape: Shape, m: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let ln_gamma = ln_gamma_shape(shape);
    if x < m {
        // Q = 1 - P with P from the power series; P is small here.
        let p = lower_series(m, x, ln_gamma);
        return (-p).ln_1p();
    }
    match shape {
        Shape::Integer(k) => ln_q_integer(k, x).min(0.0),
        Shape::HalfInteger(_) => upper_continued_fraction(m, x) - ln_gamma,
    }
}

/// `Q(k, x) = e^(-x) sum_{j<k} x^j / j!`, accumulated in log domain.
fn ln_q_integer(k: u32, x: f64) -> f64 {
    let ln_x = x.ln();
    let mut ln_term = -x; // j = 0
    let mut terms = Vec::with_capacity(k as usize);
    terms.push(ln_term);
    for j in 1..k {
        ln_term += ln_x - f64::from(j).ln();
        terms.push(ln_term);
    }
    log_sum_exp_unchecked(&terms)
}

/// Regularized lower incomplete gamma `P(m, x)` by its power series.
fn lower_series(m: f64, x: f64, ln_gamma: f64) -> f64 {
    let mut denom = m;
    let mut term = 1.0 / m;
    let mut sum = term;
    for _ in 0..SERIES_MAX_TERMS {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (m * x.ln() - x - ln_gamma).exp()
}

/// `ln Gamma_upper(m, x)` by the modified Lentz continued fraction, valid for `x >= m`.
fn upper_continued_fraction(m: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - m;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..CF_MAX_TERMS {
        let an = -(i as f64) * (i as f64 - m);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    m * x.ln() - x + h.ln()
}

/// Log density of `CN(0, variance * I_M)` at `x`:
/// `-M ln(pi variance) - ||x||^2 / variance`.
pub fn log_gaussian_density(x: &[Complex64], variance: f64) -> Result<f64> {
    let norm_sq: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    log_gaussian_density_norm(norm_sq, x.len(), variance)
}

/// [`log_gaussian_density`] from the squared norm and the dimension.
pub fn log_gaussian_density_norm(norm_sq: f64, dim: usize, variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::domain(format!(
            "Gaussian variance must be positive and finite, got {variance}"
        )));
    }
    Ok(-(dim as f64) * (LN_PI + variance.ln()) - norm_sq / variance)
}

/// `ln sum_i exp(a_i)` with max subtraction. Terms may be `-inf`.
pub fn log_sum_exp(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::domain("log_sum_exp of an empty list"));
    }
    if let Some(bad) = terms.iter().find(|a| a.is_nan() || **a == f64::INFINITY) {
        return Err(Error::domain(format!("log_sum_exp term must be finite or -inf, got {bad}")));
    }
    Ok(log_sum_exp_unchecked(terms))
}

/// `ln sum_i w_i p_i` for `(ln w_i, ln p_i)` pairs.
pub fn log_mixture(pairs: &[(f64, f64)]) -> Result<f64> {
    let terms: Vec<f64> = pairs.iter().map(|(w, p)| w + p).collect();
    log_sum_exp(&terms)
}

pub(crate) fn log_sum_exp_unchecked(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if terms.len() == 1 {
        return max;
    }
    let sum: f64 = terms.iter().map(|a| (a - max).exp()).sum();
    max + sum.ln()
}

/// `ln(e^a + e^b)`.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, LN_2, PI};

    /// Adaptive Simpson quadrature of `t^(m-1) e^(-t)` on `[x, upper]`.
    fn quad_upper_gamma(m: f64, x: f64) -> f64 {
        fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
            (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        }
        fn adapt(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = simpson(a, m, fa, flm, fm);
            let right = simpson(m, b, fm, frm, fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                left + right + delta / 15.0
            } else {
                adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let f = move |t: f64| t.powf(m - 1.0) * (-t).exp();
        let upper = x + 200.0;
        let mut total = 0.0;
        let mut a = x;
        // Split the range so every piece is smooth and well scaled.
        while a < upper {
            let b = (a + 2.0).min(upper);
            let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
            let whole = simpson(a, b, fa, fm, fb);
            total += adapt(&f, a, b, fa, fm, fb, whole, 1e-16, 40);
            a = b;
        }
        total
    }

    #[test]
    fn gamma_known_values() {
        assert_eq!(gamma_fn(1.0).unwrap(), 1.0);
        assert_eq!(gamma_fn(5.0).unwrap(), 24.0);
        assert_relative_eq!(gamma_fn(0.5).unwrap(), PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma_fn(2.5).unwrap(), 0.75 * PI.sqrt(), max_relative = 1e-15);
        // (2k)! sqrt(pi) / (4^k k!) at k = 4
        let closed = 40320.0 * PI.sqrt() / (256.0 * 24.0);
        assert_relative_eq!(gamma_fn(4.5).unwrap(), closed, max_relative = 1e-14);
    }

    #[test]
    fn gamma_rejects_unsupported_shapes() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.0).is_err());
        assert!(gamma_fn(1.3).is_err());
        assert!(upper_incomplete_gamma(0.7, 1.0).is_err());
        assert!(upper_incomplete_gamma(2.0, -1e-3).is_err());
    }

    #[test]
    fn upper_gamma_closed_forms() {
        assert_relative_eq!(upper_incomplete_gamma(1.0, 2.0).unwrap(), (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(upper_incomplete_gamma(2.0, 1.0).unwrap(), 2.0 / E, max_relative = 1e-14);
        for m in [0.5, 1.0, 3.5, 7.0, 40.0] {
            assert_relative_eq!(
                upper_incomplete_gamma(m, 0.0).unwrap(),
                gamma_fn(m).unwrap(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn upper_gamma_matches_quadrature() {
        // Frozen from a 50-digit evaluation of the defining integral.
        let reference = 2.031_469_875_435_400_9;
        let quad = quad_upper_gamma(3.5, 2.7);
        assert_relative_eq!(quad, reference, max_relative = 1e-12);
        let value = upper_incomplete_gamma(3.5, 2.7).unwrap();
        assert_relative_eq!(value, quad, max_relative = 1e-10);
        assert_relative_eq!(value, reference, max_relative = 1e-12);

        for &(m, x) in &[(0.5, 0.3), (1.5, 1.0), (2.5, 9.0), (6.5, 4.0), (12.5, 20.0), (3.0, 7.5)] {
            let q = quad_upper_gamma(m, x);
            assert_relative_eq!(upper_incomplete_gamma(m, x).unwrap(), q, max_relative = 1e-10);
        }
    }

    #[test]
    fn half_integer_gamma_three_halves_at_one() {
        // Frozen 50-digit reference for Gamma_upper(3/2, 1).
        assert_relative_eq!(
            upper_incomplete_gamma(1.5, 1.0).unwrap(),
            0.507_282_233_811_773_3,
            max_relative = 1e-13
        );
    }

    #[test]
    fn recurrence_integer_orders() {
        for m in 1..=32u32 {
            let m = f64::from(m);
            for &x in &[0.01, 0.5, 1.0, 3.0, 10.0, 30.0, 60.0] {
                let lhs = upper_incomplete_gamma(m + 1.0, x).unwrap();
                let rhs = m * upper_incomplete_gamma(m, x).unwrap() + x.powf(m) * (-x).exp();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn recurrence_half_integer_orders() {
        for k in 0..32u32 {
            let m = f64::from(k) + 0.5;
            for &x in &[0.01, 0.5, 1.0, 3.0, 10.0, 30.0, 60.0] {
                let lhs = upper_incomplete_gamma(m + 1.0, x).unwrap();
                let rhs = m * upper_incomplete_gamma(m, x).unwrap() + x.powf(m) * (-x).exp();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn regularized_is_a_decreasing_probability() {
        for m in [0.5, 1.0, 1.5, 2.0, 4.5, 16.0, 64.0] {
            let mut prev = 1.0;
            for i in 0..400 {
                let x = 0.05 * i as f64 * (1.0 + m / 8.0);
                let q = regularized_upper_gamma(m, x).unwrap();
                assert!((0.0..=1.0).contains(&q), "Q({m},{x}) = {q}");
                assert!(q <= prev * (1.0 + 1e-15), "increasing at m={m} x={x}");
                if prev < 1.0 - 1e-12 && q > 1e-300 {
                    assert!(q < prev, "not strictly decreasing at m={m} x={x}");
                }
                prev = q;
            }
        }
    }

    #[test]
    fn large_arguments_do_not_overflow() {
        let v = upper_incomplete_gamma(64.0, 1e4).unwrap();
        assert!(v.is_finite() && v >= 0.0);
        let v = upper_incomplete_gamma(64.0, 1000.0).unwrap();
        // x^63 e^-x dominates: ln = 63 ln 1000 - 1000.
        let approx = (63.0 * 1000f64.ln() - 1000.0).exp();
        assert!(v > approx && v < 1.1 * approx);
    }

    #[test]
    fn log_gaussian_density_values() {
        let zero = [Complex64::new(0.0, 0.0)];
        assert!(log_gaussian_density(&zero, 1.0 / PI).unwrap().abs() < 1e-15);
        let s2: f64 = 0.37;
        let x = [Complex64::new(0.6 * s2.sqrt(), 0.8 * s2.sqrt())];
        assert_relative_eq!(
            log_gaussian_density(&x, s2).unwrap(),
            -(PI * s2).ln() - 1.0,
            max_relative = 1e-14
        );
        // Frozen from a 50-digit evaluation: M = 2, variance 2e-13, ||x||^2 = 1e-12.
        let x = [Complex64::new(1e-12f64.sqrt(), 0.0), Complex64::new(0.0, 0.0)];
        assert_relative_eq!(
            log_gaussian_density(&x, 2e-13).unwrap(),
            51.191_458_285_026_497,
            max_relative = 1e-13
        );
        assert!(log_gaussian_density(&x, 0.0).is_err());
        assert!(log_gaussian_density(&x, -1.0).is_err());
    }

    #[test]
    fn log_gaussian_density_integrates_to_one() {
        use rand::{Rng, SeedableRng};
        // Importance sampling with a wider Gaussian proposal, M = 1.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let variance = 0.8;
        let proposal = 2.0;
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            let z = Complex64::new(re, im) * (proposal / 2.0f64).sqrt();
            let lp = log_gaussian_density(&[z], variance).unwrap();
            let lq = log_gaussian_density(&[z], proposal).unwrap();
            acc += (lp - lq).exp();
        }
        assert!((acc / n as f64 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn log_sum_exp_values() {
        assert_eq!(log_sum_exp(&[0.0]).unwrap(), 0.0);
        assert_relative_eq!(log_sum_exp(&[LN_2, 3f64.ln()]).unwrap(), 5f64.ln(), max_relative = 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(), f64::NEG_INFINITY);
        assert!(log_sum_exp(&[]).is_err());
        assert!(log_sum_exp(&[f64::NAN]).is_err());
    }

    #[test]
    fn log_sum_exp_mixture_terms() {
        // Four joint-case terms at M = 1, tau^2 = tau_prev^2 = 4e-12, gamma = 1e-8,
        // lambda = 0.1, alpha = 0.91, beta = 0.01, |x|^2 = 1e-10, |si|^2 = 1e-6.
        let (tau2, gamma, lambda, alpha, beta): (f64, f64, f64, f64, f64) = (4e-12, 1e-8, 0.1, 0.91, 0.01);
        let (xt2, si2) = (1e-10, 1e-6);
        let lp = |n2: f64, v: f64| log_gaussian_density_norm(n2, 1, v).unwrap();
        let pairs = [
            ((alpha * lambda).ln(), lp(xt2, gamma + tau2) + lp(si2, gamma + tau2)),
            (((1.0 - alpha) * lambda).ln(), lp(xt2, tau2) + lp(si2, gamma + tau2)),
            ((beta * (1.0 - lambda)).ln(), lp(xt2, gamma + tau2) + lp(si2, tau2)),
            (((1.0 - beta) * (1.0 - lambda)).ln(), lp(xt2, tau2) + lp(si2, tau2)),
        ];
        let lse = log_mixture(&pairs).unwrap();
        assert_relative_eq!(lse, -67.815_805_888_034_213, max_relative = 1e-12);
    }

    #[test]
    fn log_add_exp_matches_two_term_sum() {
        assert_relative_eq!(log_add_exp(LN_2, 3f64.ln()), 5f64.ln(), max_relative = 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.0), 1.0);
    }

    proptest::proptest! {
        #[test]
        fn log_sum_exp_translation_and_permutation(
            mut terms in proptest::collection::vec(-50.0f64..50.0, 1..12),
            shift in -100.0f64..100.0,
        ) {
            let base = log_sum_exp(&terms).unwrap();
            let shifted: Vec<f64> = terms.iter().map(|a| a + shift).collect();
            let lhs = log_sum_exp(&shifted).unwrap();
            proptest::prop_assert!((lhs - (base + shift)).abs() <= 1e-14 * (1.0 + lhs.abs()) * 4.0);
            terms.reverse();
            let rev = log_sum_exp(&terms).unwrap();
            proptest::prop_assert!((rev - base).abs() <= 1e-14 * (1.0 + base.abs()));
        }
    }
}

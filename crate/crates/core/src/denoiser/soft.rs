//! Group soft-thresholding with a binary, side-information-selected threshold
//! and the minimax design of that threshold pair.
//!
//! Threshold design assumes the least-favorable channel: active devices sit
//! at infinite magnitude, so an active row costs `tau^2 M + theta^2` while an
//! inactive row costs `varpi(theta)`, the mean energy surviving the shrink.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use super::ShrinkJacobian;
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::special::{gamma_fn, regularized_upper_gamma, upper_incomplete_gamma};

/// Gain `max(1 - theta / r, 0)` for a row of norm `r`.
#[inline]
pub fn soft_gain(norm: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else if norm >= theta {
        1.0 - theta / norm
    } else {
        0.0
    }
}

/// Wirtinger Jacobian coefficients of the soft threshold at a row of norm `r`:
/// `(1 - theta/r) I + theta/(2 r^3) x x^H` outside the dead zone, zero inside.
#[inline]
pub fn soft_jacobian_coeffs(norm: f64, theta: f64) -> ShrinkJacobian {
    if theta == 0.0 {
        ShrinkJacobian::IDENTITY
    } else if norm >= theta {
        ShrinkJacobian {
            diag: 1.0 - theta / norm,
            outer: 0.5 * theta / (norm * norm * norm),
        }
    } else {
        ShrinkJacobian::ZERO
    }
}

/// `(1 - theta/||x||) x` if `||x|| >= theta`, else zero.
pub fn soft_threshold(x: ArrayView1<'_, Complex64>, theta: f64) -> Array1<Complex64> {
    let g = soft_gain(norm_sq(x).sqrt(), theta);
    x.mapv(|z| z * g)
}

/// Threshold pair selected by the side information.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BinaryThreshold {
    /// Used when the side information marks the device as previously active.
    pub theta_active: f64,
    /// Used otherwise. May be `+inf`, meaning the row is always zeroed.
    pub theta_inactive: f64,
    /// SI norms strictly above this gate count as "previously active".
    pub si_gate: f64,
}

impl BinaryThreshold {
    /// A single threshold used regardless of the SI.
    pub fn uniform(theta: f64) -> Self {
        Self {
            theta_active: theta,
            theta_inactive: theta,
            si_gate: f64::INFINITY,
        }
    }

    #[inline]
    pub fn select(&self, si_norm: f64) -> f64 {
        if si_norm > self.si_gate {
            self.theta_active
        } else {
            self.theta_inactive
        }
    }
}

pub fn si_soft_denoise(
    x_tilde: ArrayView1<'_, Complex64>,
    si: ArrayView1<'_, Complex64>,
    thr: &BinaryThreshold,
) -> Array1<Complex64> {
    soft_threshold(x_tilde, thr.select(norm_sq(si).sqrt()))
}

pub fn jacobian_soft(
    x_tilde: ArrayView1<'_, Complex64>,
    si: ArrayView1<'_, Complex64>,
    thr: &BinaryThreshold,
) -> Array2<Complex64> {
    let theta = thr.select(norm_sq(si).sqrt());
    soft_jacobian_coeffs(norm_sq(x_tilde).sqrt(), theta).to_matrix(x_tilde)
}

fn check_m(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("antenna count must be at least 1"));
    }
    Ok(m as f64)
}

/// Probability that a previously inactive device passes the gate `l`:
/// `Gamma(M, l^2 / tau_prev^2) / Gamma(M)`.
pub fn varsigma(m: usize, l_prev: f64, tau_prev: f64) -> Result<f64> {
    let mf = check_m(m)?;
    if !(tau_prev > 0.0) || !(l_prev >= 0.0) {
        return Err(Error::domain(format!("varsigma needs tau_prev > 0 and l >= 0, got {tau_prev}, {l_prev}")));
    }
    if l_prev.is_infinite() {
        return Ok(0.0);
    }
    regularized_upper_gamma(mf, (l_prev / tau_prev).powi(2))
}

fn check_tau_theta(tau: f64, theta: f64) -> Result<()> {
    if !(tau > 0.0) || !(theta >= 0.0) {
        return Err(Error::domain(format!("need tau > 0 and theta >= 0, got {tau}, {theta}")));
    }
    Ok(())
}

/// Mean energy left after soft-thresholding pure noise `tau V`:
/// `E (||tau V|| - theta)_+^2`.
pub fn varpi(m: usize, tau: f64, theta: f64) -> Result<f64> {
    let mf = check_m(m)?;
    check_tau_theta(tau, theta)?;
    if theta.is_infinite() {
        return Ok(0.0);
    }
    let x = (theta / tau).powi(2);
    let g = gamma_fn(mf)?;
    let v = theta * theta * upper_incomplete_gamma(mf, x)? - 2.0 * theta * tau * upper_incomplete_gamma(mf + 0.5, x)?
        + tau * tau * upper_incomplete_gamma(mf + 1.0, x)?;
    Ok((v / g).max(0.0))
}

/// Half the derivative of `varpi` in `theta`:
/// `theta P(||tau V|| > theta) - E[||tau V||; ||tau V|| > theta]`.
pub fn xi(m: usize, tau: f64, theta: f64) -> Result<f64> {
    let mf = check_m(m)?;
    check_tau_theta(tau, theta)?;
    if theta.is_infinite() {
        return Ok(0.0);
    }
    let x = (theta / tau).powi(2);
    Ok((theta * upper_incomplete_gamma(mf, x)? - tau * upper_incomplete_gamma(mf + 0.5, x)?) / gamma_fn(mf)?)
}

/// Parameters of the minimax threshold design for one AMP iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MinimaxContext {
    pub m: usize,
    /// Current state `tau_t`.
    pub tau: f64,
    /// Converged state of the previous block.
    pub tau_prev: f64,
    /// Gate used to classify the side information.
    pub l_prev: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    /// False-alarm probability of the gate on a previously inactive device.
    pub varsigma: f64,
}

impl MinimaxContext {
    /// Context with `varsigma` computed from the gate and previous state.
    pub fn new(m: usize, tau: f64, tau_prev: f64, l_prev: f64, lambda: f64, alpha: f64, beta: f64) -> Result<Self> {
        let varsigma = varsigma(m, l_prev, tau_prev)?;
        Self::with_varsigma(m, tau, lambda, alpha, beta, varsigma).map(|c| Self { tau_prev, l_prev, ..c })
    }

    /// Context with `varsigma` supplied directly. The gate and previous state
    /// are left at `+inf`; set `l_prev` before using the result as an SI gate.
    pub fn with_varsigma(m: usize, tau: f64, lambda: f64, alpha: f64, beta: f64, varsigma: f64) -> Result<Self> {
        check_m(m)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("tau must be positive and finite, got {tau}")));
        }
        for (name, p) in [("lambda", lambda), ("alpha", alpha), ("beta", beta), ("varsigma", varsigma)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(Self {
            m,
            tau,
            tau_prev: f64::INFINITY,
            l_prev: f64::INFINITY,
            lambda,
            alpha,
            beta,
            varsigma,
        })
    }

    /// The same design at a different current state.
    pub fn at_tau(&self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("tau must be positive and finite, got {tau}")));
        }
        Ok(Self { tau, ..*self })
    }
}

/// Joint law of (current activity, SI classification).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointActivity {
    /// Active now, SI says active.
    pub p11: f64,
    /// Inactive now, SI says active.
    pub p01: f64,
    /// Active now, SI says inactive.
    pub p10: f64,
    /// Inactive now, SI says inactive.
    pub p00: f64,
}

impl JointActivity {
    pub fn sum(&self) -> f64 {
        self.p11 + self.p01 + self.p10 + self.p00
    }
}

/// Previously active devices are always classified active under the
/// infinite-magnitude channel; previously inactive ones pass the gate with
/// probability `varsigma`.
pub fn joint_activity_probs(ctx: &MinimaxContext) -> JointActivity {
    let MinimaxContext {
        lambda: l,
        alpha: a,
        beta: b,
        varsigma: s,
        ..
    } = *ctx;
    JointActivity {
        p11: b * (1.0 - l) * s + a * l,
        p01: (1.0 - b) * (1.0 - l) * s + (1.0 - a) * l,
        p10: b * (1.0 - l) * (1.0 - s),
        p00: (1.0 - b) * (1.0 - l) * (1.0 - s),
    }
}

/// Stationarity condition for the threshold used on SI-active devices.
pub fn f1(theta1: f64, ctx: &MinimaxContext) -> Result<f64> {
    let p = joint_activity_probs(ctx);
    Ok(p.p01 * xi(ctx.m, ctx.tau, theta1)? + p.p11 * theta1)
}

/// Stationarity condition for the threshold used on SI-inactive devices.
pub fn f2(theta2: f64, ctx: &MinimaxContext) -> Result<f64> {
    let p = joint_activity_probs(ctx);
    Ok(p.p00 * xi(ctx.m, ctx.tau, theta2)? + p.p10 * theta2)
}

/// Worst-case MSE per device, split by SI branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaxMse {
    pub total: f64,
    pub part1: f64,
    pub part2: f64,
}

pub fn minimax_mse(theta1: f64, theta2: f64, ctx: &MinimaxContext) -> Result<MinimaxMse> {
    let p = joint_activity_probs(ctx);
    let mt2 = ctx.m as f64 * ctx.tau * ctx.tau;
    let active_cost = |theta: f64, w: f64| if w == 0.0 { 0.0 } else { w * (mt2 + theta * theta) };
    let inactive_cost = |theta: f64, w: f64| -> Result<f64> {
        if w == 0.0 {
            Ok(0.0)
        } else {
            Ok(w * varpi(ctx.m, ctx.tau, theta)?)
        }
    };
    let part1 = active_cost(theta1, p.p11) + inactive_cost(theta1, p.p01)?;
    let part2 = active_cost(theta2, p.p10) + inactive_cost(theta2, p.p00)?;
    Ok(MinimaxMse {
        total: part1 + part2,
        part1,
        part2,
    })
}

const BISECTION_REL_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;

/// Root of `a xi(theta) + b theta = 0` on `[0, inf)`.
///
/// `b = 0` (including `a = b = 0`, where the objective is flat) yields the
/// `+inf` sentinel: the branch carries no active mass, so zeroing is optimal.
pub fn minimax_root(a: f64, b: f64, m: usize, tau: f64) -> Result<f64> {
    check_m(m)?;
    check_tau_theta(tau, 0.0)?;
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::domain(format!("minimax weights must be nonnegative, got {a}, {b}")));
    }
    if b == 0.0 {
        log::debug!("minimax branch without active mass, threshold set to +inf");
        return Ok(f64::INFINITY);
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let f = |t: f64| -> Result<f64> { Ok(a * xi(m, tau, t)? + b * t) };
    let mut lo = 0.0;
    let mut hi = 10.0 * tau;
    let mut grow = 0;
    while f(hi)? <= 0.0 {
        lo = hi;
        hi *= 4.0;
        grow += 1;
        if grow > 600 || !hi.is_finite() {
            return Err(Error::domain("failed to bracket the minimax threshold"));
        }
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BISECTION_REL_TOL * 1e-3 * hi || mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (flo, fhi) = (f(lo)?, f(hi)?);
    Ok(if flo.abs() <= fhi.abs() { lo } else { hi })
}

/// Natural residual scale of `a xi(theta) + b theta` at its root; roots are
/// accurate when `|f| <= 1e-12` times this.
pub fn root_scale(a: f64, b: f64, tau: f64, theta: f64) -> f64 {
    (a + b) * tau.max(if theta.is_finite() { theta } else { 0.0 })
}

/// Minimax threshold pair for the current state.
pub fn solve_thresholds(ctx: &MinimaxContext) -> Result<BinaryThreshold> {
    let p = joint_activity_probs(ctx);
    let theta_active = minimax_root(p.p01, p.p11, ctx.m, ctx.tau)?;
    let theta_inactive = minimax_root(p.p00, p.p10, ctx.m, ctx.tau)?;
    Ok(BinaryThreshold {
        theta_active,
        theta_inactive: theta_inactive.max(theta_active),
        si_gate: ctx.l_prev,
    })
}

/// Minimax threshold without side information, root of
/// `(1 - lambda) xi(theta) + lambda theta`.
pub fn no_si_threshold(m: usize, tau: f64, lambda: f64) -> Result<f64> {
    minimax_root(1.0 - lambda, lambda, m, tau)
}

/// Gate `l` on the norm of a pure-noise row `tau V` whose exceedance
/// probability is `false_alarm`: solves `Gamma(M, l^2/tau^2)/Gamma(M) = false_alarm`.
pub fn gate_for_false_alarm(m: usize, tau: f64, false_alarm: f64) -> Result<f64> {
    let mf = check_m(m)?;
    if !(tau > 0.0) {
        return Err(Error::domain(format!("tau must be positive, got {tau}")));
    }
    if !(0.0..=1.0).contains(&false_alarm) {
        return Err(Error::domain(format!("false-alarm probability must lie in [0, 1], got {false_alarm}")));
    }
    if false_alarm == 1.0 {
        return Ok(0.0);
    }
    if false_alarm == 0.0 {
        return Ok(f64::INFINITY);
    }
    let (mut lo, mut hi) = (0.0, mf + 10.0);
    while regularized_upper_gamma(mf, hi)? > false_alarm {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if regularized_upper_gamma(mf, mid)? > false_alarm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(tau * (0.5 * (lo + hi)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::fd;
    use crate::rng::{complex_normal, substream, Stream};
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fig1() -> MinimaxContext {
        MinimaxContext::with_varsigma(1, 2e-6, 0.1, 0.91, 0.01, 0.0).unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        let th = 0.7;
        let x = array![c(3.0 * th, 0.0), c(4.0 * th, 0.0)];
        let y = soft_threshold(x.view(), th);
        assert_relative_eq!(y[0].re, 2.4 * th, max_relative = 1e-15);
        assert_relative_eq!(y[1].re, 3.2 * th, max_relative = 1e-15);
        assert!(soft_threshold(x.view(), 5.1 * th).iter().all(|z| *z == c(0.0, 0.0)));
        assert_eq!(soft_threshold(x.view(), 0.0), x);
        assert_eq!(soft_threshold(array![c(0.0, 0.0)].view(), 0.0), array![c(0.0, 0.0)]);
    }

    #[test]
    fn binary_threshold_selection() {
        let thr = BinaryThreshold {
            theta_active: 0.2,
            theta_inactive: 1.0,
            si_gate: 0.5,
        };
        let x = array![c(0.6, 0.0)];
        assert_eq!(si_soft_denoise(x.view(), array![c(0.0, 0.0)].view(), &thr), array![c(0.0, 0.0)]);
        assert_eq!(thr.select(0.5), 1.0);
        assert_eq!(thr.select(0.500_001), 0.2);
        let same = BinaryThreshold::uniform(0.3);
        let a = si_soft_denoise(x.view(), array![c(9.0, 0.0)].view(), &same);
        let b = si_soft_denoise(x.view(), array![c(0.0, 0.0)].view(), &same);
        assert_eq!(a, b);
    }

    #[test]
    fn fig1_thresholds_ordered() {
        let thr = solve_thresholds(&fig1()).unwrap();
        assert!(0.0 < thr.theta_active && thr.theta_active < thr.theta_inactive);
        // SI "active" means a smaller dead zone.
        let x = array![c(0.5 * (thr.theta_active + thr.theta_inactive), 0.0)];
        let gated = BinaryThreshold { si_gate: 1.0, ..thr };
        assert!(si_soft_denoise(x.view(), array![c(2.0, 0.0)].view(), &gated)[0].norm() > 0.0);
        assert_eq!(si_soft_denoise(x.view(), array![c(0.5, 0.0)].view(), &gated)[0].norm(), 0.0);
    }

    #[test]
    fn jacobian_limits_and_finite_differences() {
        let x = array![c(0.3, -0.4), c(1.2, 0.5)];
        let si = array![c(0.0, 0.0), c(0.0, 0.0)];
        let inside = BinaryThreshold::uniform(10.0);
        assert!(jacobian_soft(x.view(), si.view(), &inside).iter().all(|z| z.norm() == 0.0));
        let ident = jacobian_soft(x.view(), si.view(), &BinaryThreshold::uniform(0.0));
        assert_eq!(ident, crate::linalg::identity(2));

        let mut rng = substream(4, Stream::Probe, 0, 0);
        for _ in 0..200 {
            let x: Array1<Complex64> = (0..2).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let r = norm_sq(x.view()).sqrt();
            let theta = r * rng.gen_range(0.05..0.9);
            let thr = BinaryThreshold::uniform(theta);
            let analytic = jacobian_soft(x.view(), si.view(), &thr);
            let numeric = fd::wirtinger(|z| si_soft_denoise(z.view(), si.view(), &thr), &x, 1e-6 * r);
            assert!(fd::max_rel_err(&analytic, &numeric) < 1e-6);
        }
    }

    #[test]
    fn varsigma_values() {
        assert_eq!(varsigma(3, 0.0, 1.3).unwrap(), 1.0);
        assert_relative_eq!(varsigma(1, 2.0, 2.0).unwrap(), (-1f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(varsigma(2, 1.5, 1.5).unwrap(), 2.0 * (-1f64).exp() / 1.0, max_relative = 1e-14);
        assert_eq!(varsigma(2, f64::INFINITY, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn gate_inverts_varsigma() {
        for m in 1..=4 {
            for p in [0.5, 0.1, 0.01, 1e-6] {
                let l = gate_for_false_alarm(m, 2.5, p).unwrap();
                assert_relative_eq!(varsigma(m, l, 2.5).unwrap(), p, max_relative = 1e-10);
            }
        }
        assert_eq!(gate_for_false_alarm(2, 1.0, 1.0).unwrap(), 0.0);
        assert!(gate_for_false_alarm(2, 1.0, 0.0).unwrap().is_infinite());
    }

    #[test]
    fn varpi_limits_and_monte_carlo() {
        for m in 1..=4 {
            assert_relative_eq!(varpi(m, 1.7, 0.0).unwrap(), 1.7 * 1.7 * m as f64, max_relative = 1e-13);
            assert!(varpi(m, 1.0, 60.0).unwrap() < 1e-300);
        }
        let mut rng = substream(5, Stream::Probe, 0, 0);
        let n = 1_000_000;
        let acc: f64 = (0..n)
            .map(|_| (complex_normal(&mut rng, 1.0).norm() - 1.0).max(0.0).powi(2))
            .sum::<f64>()
            / n as f64;
        assert_relative_eq!(varpi(1, 1.0, 1.0).unwrap(), acc, max_relative = 1e-2);
    }

    #[test]
    fn xi_values() {
        let tau = 0.8;
        for m in 1..=3 {
            let mf = m as f64;
            let expect = -tau * gamma_fn(mf + 0.5).unwrap() / gamma_fn(mf).unwrap();
            assert_relative_eq!(xi(m, tau, 0.0).unwrap(), expect, max_relative = 1e-14);
            let far = xi(m, tau, 40.0 * tau).unwrap();
            assert!(far.abs() < 1e-300 || (far > 0.0 && far < 1e-100));
        }
        // e^-1 - Gamma(3/2, 1), quadrature reference.
        assert_relative_eq!(xi(1, 1.0, 1.0).unwrap(), -0.139_402_792_640_330_99, max_relative = 1e-12);
        // dvarpi/dtheta = 2 xi
        let (h, th) = (1e-6, 0.9);
        let d = (varpi(2, 1.1, th + h).unwrap() - varpi(2, 1.1, th - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(d, 2.0 * xi(2, 1.1, th).unwrap(), max_relative = 1e-7);
    }

    #[test]
    fn f_functions() {
        let ctx = MinimaxContext::with_varsigma(2, 1.0, 0.1, 0.55, 0.05, 0.2).unwrap();
        assert!(f1(0.0, &ctx).unwrap() < 0.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..200 {
            let v = f1(k as f64 * 0.02, &ctx).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let saturated = MinimaxContext { varsigma: 1.0, ..ctx };
        for k in 0..20 {
            assert_eq!(f2(k as f64 * 0.3, &saturated).unwrap(), 0.0);
        }
        let thr = solve_thresholds(&saturated).unwrap();
        assert!(thr.theta_inactive.is_infinite() && thr.theta_active.is_finite());
    }

    #[test]
    fn joint_probabilities() {
        let p = joint_activity_probs(&fig1());
        assert_relative_eq!(p.p11, 0.091, max_relative = 1e-14);
        assert_relative_eq!(p.p01, 0.009, max_relative = 1e-12);
        assert_relative_eq!(p.p10, 0.009, max_relative = 1e-12);
        assert_relative_eq!(p.p00, 0.891, max_relative = 1e-14);
        assert!((p.sum() - 1.0).abs() <= 1e-15);
        let s1 = joint_activity_probs(&MinimaxContext { varsigma: 1.0, ..fig1() });
        assert_eq!((s1.p10, s1.p00), (0.0, 0.0));
    }

    #[test]
    fn roots_are_accurate_and_optimal() {
        let ctx = fig1();
        let thr = solve_thresholds(&ctx).unwrap();
        let p = joint_activity_probs(&ctx);
        for (theta, a, b, f) in [
            (thr.theta_active, p.p01, p.p11, f1(thr.theta_active, &ctx).unwrap()),
            (thr.theta_inactive, p.p00, p.p10, f2(thr.theta_inactive, &ctx).unwrap()),
        ] {
            assert!(f.abs() <= 1e-12 * root_scale(a, b, ctx.tau, theta), "{f}");
        }
        let best = minimax_mse(thr.theta_active, thr.theta_inactive, &ctx).unwrap().total;
        let no_gain = minimax_mse(thr.theta_inactive, thr.theta_inactive, &ctx).unwrap().total;
        assert!(best <= no_gain);
        let mut rng = substream(6, Stream::Probe, 0, 0);
        for _ in 0..100 {
            let t1 = rng.gen_range(0.0..5.0) * ctx.tau;
            let t2 = rng.gen_range(0.0..5.0) * ctx.tau;
            assert!(best <= minimax_mse(t1, t2, &ctx).unwrap().total * (1.0 + 1e-12));
        }
    }

    #[test]
    fn independent_chain_matches_no_si_root() {
        for s in [0.0, 0.3, 0.9] {
            let ctx = MinimaxContext::with_varsigma(2, 1.3, 0.2, 0.2, 0.2, s).unwrap();
            let thr = solve_thresholds(&ctx).unwrap();
            let base = no_si_threshold(2, 1.3, 0.2).unwrap();
            assert_relative_eq!(thr.theta_active, base, max_relative = 1e-11);
            assert_relative_eq!(thr.theta_inactive, base, max_relative = 1e-11);
        }
    }

    #[test]
    fn ordering_over_random_contexts() {
        let mut rng = substream(7, Stream::Probe, 0, 0);
        for _ in 0..1000 {
            let lambda = rng.gen_range(0.01..0.6);
            let alpha = rng.gen_range(lambda..0.999);
            let beta = lambda * (1.0 - alpha) / (1.0 - lambda);
            let ctx = MinimaxContext::with_varsigma(rng.gen_range(1..5), rng.gen_range(0.1..3.0), lambda, alpha, beta, rng.gen_range(0.0..0.999))
                .unwrap();
            let p = joint_activity_probs(&ctx);
            let t1 = minimax_root(p.p01, p.p11, ctx.m, ctx.tau).unwrap();
            let t2 = minimax_root(p.p00, p.p10, ctx.m, ctx.tau).unwrap();
            assert!(t1 <= t2 * (1.0 + 1e-12), "{t1} > {t2} at {ctx:?}");
        }
    }

    #[test]
    fn mse_is_convex_in_each_threshold() {
        let ctx = MinimaxContext::with_varsigma(2, 1.0, 0.1, 0.55, 0.05, 0.1).unwrap();
        let h = 0.01;
        for k in 1..400 {
            let t = k as f64 * h;
            let g = |a: f64| minimax_mse(a, 1.0, &ctx).unwrap().part1;
            assert!(g(t + h) - 2.0 * g(t) + g(t - h) >= -1e-12);
            let g = |a: f64| minimax_mse(1.0, a, &ctx).unwrap().part2;
            assert!(g(t + h) - 2.0 * g(t) + g(t - h) >= -1e-12);
        }
    }

    #[test]
    fn mse_collapses_without_activity() {
        let ctx = MinimaxContext::with_varsigma(1, 1.0, 0.0, 0.0, 0.0, 0.25).unwrap();
        let r = minimax_mse(0.5, 1.5, &ctx).unwrap();
        let expect = 0.25 * varpi(1, 1.0, 0.5).unwrap() + 0.75 * varpi(1, 1.0, 1.5).unwrap();
        assert_relative_eq!(r.total, expect, max_relative = 1e-14);
    }

    #[test]
    fn norm_contraction() {
        let mut rng = substream(8, Stream::Probe, 0, 0);
        for _ in 0..1000 {
            let x: Array1<Complex64> = (0..3).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let y = soft_threshold(x.view(), rng.gen_range(0.0..2.0));
            assert!(norm_sq(y.view()) <= norm_sq(x.view()));
        }
    }
}

//! Bayesian MMSE denoisers for Bernoulli-Rayleigh rows with Markov activity.
//!
//! A row is `x = delta h` with `h ~ CN(0, gamma I)`. Given pseudo-data
//! `x + tau V` and side information `x_prev + tau_prev V'`, the posterior mean is
//! the linear shrink `gamma / (gamma + tau^2) x` scaled by the posterior
//! activity probability `phi`. Everything is kept in the log domain because
//! `Delta ||x||^2` reaches the hundreds of thousands at realistic SNR.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use super::ShrinkJacobian;
use crate::error::{Error, Result};
use crate::linalg::{identity, log_gaussian_density_cov, norm_sq, Cholesky};
use crate::special::{log_add_exp, log_sum_exp_unchecked};

/// Prior and state seen by the MMSE denoiser of one device.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MmsePrior {
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Current state `tau_t^2`.
    pub tau_sq: f64,
    /// Converged state of the previous block; `+inf` means the SI is worthless.
    pub tau_prev_sq: f64,
}

impl MmsePrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be finite and nonnegative, got {}", self.gamma)));
        }
        if !(self.tau_sq > 0.0) || !(self.tau_prev_sq > 0.0) {
            return Err(Error::domain("state variances must be positive"));
        }
        for (name, p) in [("lambda", self.lambda), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// `Delta = 1/tau^2 - 1/(tau^2 + gamma)`.
    pub fn delta(&self, tau_sq: f64) -> f64 {
        delta(self.gamma, tau_sq)
    }
}

#[inline]
fn delta(gamma: f64, tau_sq: f64) -> f64 {
    gamma / (tau_sq * (tau_sq + gamma))
}

/// `ln mu = M ln((tau^2 + gamma)/tau^2) - Delta ||x||^2`, the log ratio of the
/// inactive to the active likelihood of a row of squared norm `x_norm_sq`.
pub fn mu_factor(prior: &MmsePrior, x_norm_sq: f64, tau_sq_used: f64, m: usize) -> f64 {
    log_mu(prior.gamma, x_norm_sq, tau_sq_used, m)
}

#[inline]
fn log_mu(gamma: f64, x_norm_sq: f64, tau_sq: f64, m: usize) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let d = delta(gamma, tau_sq);
    let penalty = if d == 0.0 { 0.0 } else { d * x_norm_sq };
    m as f64 * (gamma / tau_sq).ln_1p() - penalty
}

/// `ln[(beta + (1-beta) mu_prev) / (alpha + (1-alpha) mu_prev)]`, the SI factor
/// of the posterior odds. Fixed within a block.
pub fn log_si_ratio(prior: &MmsePrior, si_norm_sq: f64, m: usize) -> f64 {
    let l = log_mu(prior.gamma, si_norm_sq, prior.tau_prev_sq, m);
    let mix = |p: f64| log_add_exp(p.ln(), (1.0 - p).ln() + l);
    mix(prior.beta) - mix(prior.alpha)
}

/// Offset of the posterior log-odds of inactivity that does not depend on the
/// pseudo-data: `ln((1-lambda)/lambda)` plus the SI factor if any.
pub fn log_odds_offset(prior: &MmsePrior, si_norm_sq: Option<f64>, m: usize) -> f64 {
    let base = (1.0 - prior.lambda).ln() - prior.lambda.ln();
    match si_norm_sq {
        Some(s) => base + log_si_ratio(prior, s, m),
        None => base,
    }
}

/// Log-odds offset when the previous activity is known exactly: the prior
/// becomes `alpha` or `beta`. This is the `tau_prev -> 0` limit of
/// [`log_odds_offset`] with side information `x_prev`.
pub fn log_odds_offset_known(prior: &MmsePrior, prev_active: bool) -> f64 {
    let p = if prev_active { prior.alpha } else { prior.beta };
    (1.0 - p).ln() - p.ln()
}

/// `(1 / (1 + e^z), e^z / (1 + e^z))` without overflow.
#[inline]
fn logistic_pair(z: f64) -> (f64, f64) {
    if z.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    if z > 0.0 {
        let e = (-z).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = z.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    }
}

/// Scalar gain and Jacobian of the MMSE shrink at a row of squared norm
/// `x_norm_sq`, given the pseudo-data-independent log-odds `offset`.
#[inline]
pub fn mmse_gain(gamma: f64, tau_sq: f64, x_norm_sq: f64, offset: f64, m: usize) -> (f64, ShrinkJacobian) {
    if gamma == 0.0 {
        return (0.0, ShrinkJacobian::ZERO);
    }
    let c = gamma / (gamma + tau_sq);
    let (phi, one_minus) = logistic_pair(offset + log_mu(gamma, x_norm_sq, tau_sq, m));
    let gain = c * phi;
    let jac = ShrinkJacobian {
        diag: gain,
        outer: gain * one_minus * delta(gamma, tau_sq),
    };
    (gain, jac)
}

/// Posterior mean with side information.
pub fn si_mmse_denoise(
    x_tilde: ArrayView1<'_, Complex64>,
    si: ArrayView1<'_, Complex64>,
    prior: &MmsePrior,
) -> Array1<Complex64> {
    let m = x_tilde.len();
    let offset = log_odds_offset(prior, Some(norm_sq(si)), m);
    let (g, _) = mmse_gain(prior.gamma, prior.tau_sq, norm_sq(x_tilde), offset, m);
    x_tilde.mapv(|z| z * g)
}

/// Posterior mean ignoring any side information.
pub fn no_si_mmse_denoise(x_tilde: ArrayView1<'_, Complex64>, prior: &MmsePrior) -> Array1<Complex64> {
    let m = x_tilde.len();
    let offset = log_odds_offset(prior, None, m);
    let (g, _) = mmse_gain(prior.gamma, prior.tau_sq, norm_sq(x_tilde), offset, m);
    x_tilde.mapv(|z| z * g)
}

/// Wirtinger Jacobian of [`si_mmse_denoise`] in `x_tilde`.
pub fn jacobian_mmse(
    x_tilde: ArrayView1<'_, Complex64>,
    si: ArrayView1<'_, Complex64>,
    prior: &MmsePrior,
) -> Array2<Complex64> {
    let m = x_tilde.len();
    let offset = log_odds_offset(prior, Some(norm_sq(si)), m);
    mmse_gain(prior.gamma, prior.tau_sq, norm_sq(x_tilde), offset, m)
        .1
        .to_matrix(x_tilde)
}

/// Posterior activity probability and first two moments of the row.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStats {
    pub phi: f64,
    pub mean: Array1<Complex64>,
    pub second_moment: Array2<Complex64>,
}

/// Posterior under general effective-noise covariances, summing the four
/// (previous, current) activity cases explicitly.
pub fn posterior_stats_general(
    x_tilde: ArrayView1<'_, Complex64>,
    si: ArrayView1<'_, Complex64>,
    prior: &MmsePrior,
    sigma_t: ArrayView2<'_, Complex64>,
    sigma_prev: ArrayView2<'_, Complex64>,
) -> Result<PosteriorStats> {
    let m = x_tilde.len();
    if si.len() != m || sigma_t.dim() != (m, m) || sigma_prev.dim() != (m, m) {
        return Err(Error::Dimension("posterior inputs disagree on M".into()));
    }
    let g = prior.gamma;
    let eye = identity(m);
    let cur_inactive = Cholesky::new(sigma_t)?;
    let prev_inactive = Cholesky::new(sigma_prev)?;
    let slab_t = &sigma_t + &eye.mapv(|z| z * g);
    let cur_active = Cholesky::new(slab_t.view())?;
    let prev_active = Cholesky::new((&sigma_prev + &eye.mapv(|z| z * g)).view())?;

    let x1 = log_gaussian_density_cov(x_tilde, &cur_active);
    let x0 = log_gaussian_density_cov(x_tilde, &cur_inactive);
    let s1 = log_gaussian_density_cov(si, &prev_active);
    let s0 = log_gaussian_density_cov(si, &prev_inactive);
    let (l, a, b) = (prior.lambda, prior.alpha, prior.beta);
    let active = [(a * l).ln() + s1 + x1, (b * (1.0 - l)).ln() + s0 + x1];
    let inactive = [((1.0 - a) * l).ln() + s1 + x0, ((1.0 - b) * (1.0 - l)).ln() + s0 + x0];
    let la = log_sum_exp_unchecked(&active);
    let li = log_sum_exp_unchecked(&inactive);
    let (phi, _) = logistic_pair(li - la);

    // Conditional on activity: mean gamma (gamma I + S)^-1 x, covariance
    // gamma I - gamma^2 (gamma I + S)^-1.
    let cond_mean = cur_active.solve(x_tilde).mapv(|z| z * g);
    let cond_cov = &eye.mapv(|z| z * g) - &cur_active.inverse().mapv(|z| z * (g * g));
    let outer = Array2::from_shape_fn((m, m), |(i, k)| cond_mean[i] * cond_mean[k].conj());
    Ok(PosteriorStats {
        phi,
        mean: cond_mean.mapv(|z| z * phi),
        second_moment: (outer + cond_cov).mapv(|z| z * phi),
    })
}

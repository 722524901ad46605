//! State evolution: the scalar recursion that predicts the effective noise
//! variance of the AMP pseudo-data,
//!
//! ```text
//! tau_{t+1}^2 = sigma^2 + (1/L) sum_n E ||eta(x_n + tau_t V, SI_n) - x_n||^2 / M,
//! ```
//!
//! with the expectation evaluated by Monte Carlo. Sampling is stratified over
//! devices and the four (previous, current) activity cases so that the case
//! weights enter exactly.

use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::amp::{DenoiserChoice, TAU_SQ_FLOOR};
use crate::denoiser::mmse::{log_odds_offset, log_odds_offset_known, mmse_gain, MmsePrior};
use crate::denoiser::soft::{
    gate_for_false_alarm, no_si_threshold, soft_gain, solve_thresholds, BinaryThreshold, MinimaxContext,
};
use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::scenario::ActivityModel;

/// Side information available to the denoiser in the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeSideInfo {
    None,
    /// `x_prev + tau_prev V'`, classified by the denoiser's own gate.
    Estimated { tau_prev_sq: f64 },
    /// The true previous activity: soft thresholds are selected by it and the
    /// MMSE prior conditions on it.
    Perfect { tau_prev_sq: f64 },
}

/// Distribution of the rows the expectation runs over.
#[derive(Debug, Clone, PartialEq)]
pub enum SeConditioning {
    /// Activity from the Markov chain and fresh `CN(0, gamma_n I)` channels.
    Prior,
    /// The realized rows of one instance; only the Gaussian noise is sampled.
    /// `previous` feeds the side information when present.
    Realized {
        current: Array2<Complex64>,
        previous: Option<Array2<Complex64>>,
    },
}

#[derive(Debug, Clone)]
pub struct SeConfig {
    pub pilot_len: usize,
    pub n_antennas: usize,
    pub noise_var: f64,
    pub gains: Arc<[f64]>,
    pub activity: ActivityModel,
    pub choice: DenoiserChoice,
    pub si: SeSideInfo,
    pub mc_samples: usize,
    pub conditioning: SeConditioning,
}

impl SeConfig {
    fn n(&self) -> usize {
        self.gains.len()
    }

    fn validate(&self) -> Result<()> {
        if self.mc_samples == 0 {
            return Err(Error::domain("state evolution needs at least one Monte Carlo sample"));
        }
        if self.pilot_len == 0 || self.n_antennas == 0 || self.n() == 0 {
            return Err(Error::config("state evolution needs L, M, N >= 1"));
        }
        if let SeConditioning::Realized { current, previous } = &self.conditioning {
            let shape = (self.n(), self.n_antennas);
            if current.dim() != shape || previous.as_ref().is_some_and(|p| p.dim() != shape) {
                return Err(Error::Dimension("realized rows do not match N x M".into()));
            }
        }
        Ok(())
    }

    /// `tau_0^2` consistent with `X_0 = 0`, `R_0 = Y`.
    pub fn initial_tau_sq(&self) -> f64 {
        let l = self.pilot_len as f64;
        let energy = match &self.conditioning {
            SeConditioning::Prior => self.activity.lambda * self.gains.iter().sum::<f64>(),
            SeConditioning::Realized { current, .. } => {
                current.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.n_antennas as f64
            }
        };
        self.noise_var + energy / l
    }
}

/// One step of the recursion with its full M x M covariance.
#[derive(Debug, Clone)]
pub struct SeStep {
    /// Scalar state `trace(cov) / M`.
    pub tau_sq: f64,
    /// `sigma^2 I + (1/L) sum_n E (eta - x)(eta - x)^H`.
    pub cov: Array2<Complex64>,
    /// Monte Carlo standard errors of the real and imaginary parts of `cov`.
    pub std_err_re: Array2<f64>,
    pub std_err_im: Array2<f64>,
}

/// Row rule for one step: everything except the sampled vectors.
enum Rule {
    Soft { unit: BinaryThreshold, gate: Option<f64> },
    Mmse,
    Identity,
    Zero,
}

fn make_rule(cfg: &SeConfig) -> Result<Rule> {
    let m = cfg.n_antennas;
    Ok(match (&cfg.choice, cfg.si) {
        (DenoiserChoice::SoftNoSi { lambda }, _) | (DenoiserChoice::SoftSi { activity: ActivityModel { lambda, .. }, .. }, SeSideInfo::None) => {
            Rule::Soft {
                unit: BinaryThreshold::uniform(no_si_threshold(m, 1.0, *lambda)?),
                gate: None,
            }
        }
        (DenoiserChoice::SoftSi { activity, si_false_alarm }, SeSideInfo::Estimated { tau_prev_sq }) => {
            let tau_prev = tau_prev_sq.max(TAU_SQ_FLOOR).sqrt();
            let gate = gate_for_false_alarm(m, tau_prev, *si_false_alarm)?;
            let ctx = MinimaxContext::new(m, 1.0, tau_prev, gate, activity.lambda, activity.alpha, activity.beta)?;
            Rule::Soft {
                unit: solve_thresholds(&ctx)?,
                gate: Some(gate),
            }
        }
        (DenoiserChoice::SoftSi { activity, .. }, SeSideInfo::Perfect { .. }) => {
            let ctx = MinimaxContext::with_varsigma(m, 1.0, activity.lambda, activity.alpha, activity.beta, 0.0)?;
            Rule::Soft {
                unit: solve_thresholds(&ctx)?,
                gate: None,
            }
        }
        (DenoiserChoice::MmseSi { .. } | DenoiserChoice::MmseNoSi { .. }, _) => Rule::Mmse,
        (DenoiserChoice::Identity, _) => Rule::Identity,
        (DenoiserChoice::Zero, _) => Rule::Zero,
    })
}

fn tau_prev_sq(si: SeSideInfo) -> Option<f64> {
    match si {
        SeSideInfo::None => None,
        SeSideInfo::Estimated { tau_prev_sq } | SeSideInfo::Perfect { tau_prev_sq } => Some(tau_prev_sq.max(TAU_SQ_FLOOR)),
    }
}

/// Streaming sums for the weighted covariance and its standard error.
struct CovAccumulator {
    m: usize,
    mean: Vec<Complex64>,
    var_re: Vec<f64>,
    var_im: Vec<f64>,
    s_re: Vec<f64>,
    s_im: Vec<f64>,
    ss_re: Vec<f64>,
    ss_im: Vec<f64>,
    count: usize,
}

impl CovAccumulator {
    fn new(m: usize) -> Self {
        let z = vec![0.0; m * m];
        Self {
            m,
            mean: vec![Complex64::new(0.0, 0.0); m * m],
            var_re: z.clone(),
            var_im: z.clone(),
            s_re: z.clone(),
            s_im: z.clone(),
            ss_re: z.clone(),
            ss_im: z,
            count: 0,
        }
    }

    fn push(&mut self, err: &[Complex64]) {
        let m = self.m;
        for i in 0..m {
            for k in 0..m {
                let v = err[i] * err[k].conj();
                let idx = i * m + k;
                self.s_re[idx] += v.re;
                self.s_im[idx] += v.im;
                self.ss_re[idx] += v.re * v.re;
                self.ss_im[idx] += v.im * v.im;
            }
        }
        self.count += 1;
    }

    /// Folds the current stratum in with weight `w` and resets the sums.
    fn close_stratum(&mut self, w: f64) {
        let k = self.count as f64;
        if self.count == 0 {
            return;
        }
        for idx in 0..self.m * self.m {
            let mr = self.s_re[idx] / k;
            let mi = self.s_im[idx] / k;
            self.mean[idx] += Complex64::new(mr, mi) * w;
            if self.count > 1 {
                let vr = (self.ss_re[idx] - k * mr * mr).max(0.0) / (k - 1.0);
                let vi = (self.ss_im[idx] - k * mi * mi).max(0.0) / (k - 1.0);
                self.var_re[idx] += w * w * vr / k;
                self.var_im[idx] += w * w * vi / k;
            }
            self.s_re[idx] = 0.0;
            self.s_im[idx] = 0.0;
            self.ss_re[idx] = 0.0;
            self.ss_im[idx] = 0.0;
        }
        self.count = 0;
    }
}

/// Applies the rule to one sample, writing `eta(x~) - x` into `err`.
#[allow(clippy::too_many_arguments)]
fn sample_error<R: Rng + ?Sized>(
    cfg: &SeConfig,
    rule: &Rule,
    n: usize,
    x: &[Complex64],
    prev: Option<&[Complex64]>,
    prev_active: bool,
    tau_sq: f64,
    rng: &mut R,
    pseudo: &mut [Complex64],
    err: &mut [Complex64],
) {
    let m = cfg.n_antennas;
    let mut x_norm_sq = 0.0;
    for i in 0..m {
        pseudo[i] = x[i] + complex_normal(rng, tau_sq);
        x_norm_sq += pseudo[i].norm_sqr();
    }
    let tp = tau_prev_sq(cfg.si);
    let si_norm_sq = match (tp, prev) {
        (Some(tp), Some(prev)) => Some(prev.iter().map(|z| (z + complex_normal(rng, tp)).norm_sqr()).sum::<f64>()),
        _ => None,
    };
    let gain = match rule {
        Rule::Soft { unit, gate } => {
            let active = match (cfg.si, gate) {
                (SeSideInfo::Perfect { .. }, _) => prev_active,
                (_, Some(g)) => si_norm_sq.is_some_and(|s| s.sqrt() > *g),
                _ => false,
            };
            let unit_theta = if active { unit.theta_active } else { unit.theta_inactive };
            let theta = if unit_theta.is_infinite() { f64::INFINITY } else { unit_theta * tau_sq.sqrt() };
            soft_gain(x_norm_sq.sqrt(), theta)
        }
        Rule::Mmse => {
            let (lambda, alpha, beta, use_si) = match &cfg.choice {
                DenoiserChoice::MmseSi { activity, .. } => (activity.lambda, activity.alpha, activity.beta, true),
                DenoiserChoice::MmseNoSi { lambda, .. } => (*lambda, *lambda, *lambda, false),
                _ => unreachable!(),
            };
            let prior = MmsePrior {
                gamma: cfg.gains[n],
                lambda,
                alpha,
                beta,
                tau_sq,
                tau_prev_sq: tp.unwrap_or(f64::INFINITY),
            };
            let offset = match cfg.si {
                SeSideInfo::Perfect { .. } if use_si => log_odds_offset_known(&prior, prev_active),
                _ => log_odds_offset(&prior, if use_si { si_norm_sq } else { None }, m),
            };
            mmse_gain(prior.gamma, tau_sq, x_norm_sq, offset, m).0
        }
        Rule::Identity => 1.0,
        Rule::Zero => 0.0,
    };
    for i in 0..m {
        err[i] = pseudo[i] * gain - x[i];
    }
}

/// One step of the recursion from state `tau_sq_t`.
pub fn se_step<R: Rng + ?Sized>(tau_sq_t: f64, cfg: &SeConfig, rng: &mut R) -> Result<SeStep> {
    cfg.validate()?;
    if !(tau_sq_t > 0.0) {
        return Err(Error::domain(format!("state must be positive, got {tau_sq_t}")));
    }
    let (n, m) = (cfg.n(), cfg.n_antennas);
    let rule = make_rule(cfg)?;
    let mut acc = CovAccumulator::new(m);
    let mut x = vec![Complex64::new(0.0, 0.0); m];
    let mut prev = vec![Complex64::new(0.0, 0.0); m];
    let mut pseudo = vec![Complex64::new(0.0, 0.0); m];
    let mut err = vec![Complex64::new(0.0, 0.0); m];
    let has_si = tau_prev_sq(cfg.si).is_some();

    match &cfg.conditioning {
        SeConditioning::Prior => {
            let cases = cfg.activity.joint_cases();
            // (previous active, current active) for each entry of `cases`.
            let flags = [(true, true), (true, false), (false, true), (false, false)];
            let per = cfg.mc_samples.div_ceil(4 * n).max(2);
            for dev in 0..n {
                let g = cfg.gains[dev];
                for (&w, &(pa, ca)) in cases.iter().zip(&flags) {
                    if w == 0.0 {
                        continue;
                    }
                    for _ in 0..per {
                        for i in 0..m {
                            x[i] = if ca { complex_normal(rng, g) } else { Complex64::new(0.0, 0.0) };
                            prev[i] = if pa { complex_normal(rng, g) } else { Complex64::new(0.0, 0.0) };
                        }
                        let p = if has_si { Some(prev.as_slice()) } else { None };
                        sample_error(cfg, &rule, dev, &x, p, pa, tau_sq_t, rng, &mut pseudo, &mut err);
                        acc.push(&err);
                    }
                    acc.close_stratum(w);
                }
            }
        }
        SeConditioning::Realized { current, previous } => {
            let per = cfg.mc_samples.div_ceil(n).max(2);
            for dev in 0..n {
                for i in 0..m {
                    x[i] = current[[dev, i]];
                    prev[i] = previous.as_ref().map_or(Complex64::new(0.0, 0.0), |p| p[[dev, i]]);
                }
                let prev_active = prev.iter().any(|z| z.norm_sqr() > 0.0);
                let p = if has_si && previous.is_some() { Some(prev.as_slice()) } else { None };
                for _ in 0..per {
                    sample_error(cfg, &rule, dev, &x, p, prev_active, tau_sq_t, rng, &mut pseudo, &mut err);
                    acc.push(&err);
                }
                acc.close_stratum(1.0);
            }
        }
    }

    let inv_l = 1.0 / cfg.pilot_len as f64;
    let cov = Array2::from_shape_fn((m, m), |(i, k)| {
        let base = if i == k { cfg.noise_var } else { 0.0 };
        Complex64::new(base, 0.0) + acc.mean[i * m + k] * inv_l
    });
    let se = |v: &Vec<f64>| Array2::from_shape_fn((m, m), |(i, k)| v[i * m + k].sqrt() * inv_l);
    let tau_sq = cov.diag().iter().map(|z| z.re).sum::<f64>() / m as f64;
    Ok(SeStep {
        tau_sq: tau_sq.max(TAU_SQ_FLOOR),
        std_err_re: se(&acc.var_re),
        std_err_im: se(&acc.var_im),
        cov,
    })
}

/// Trajectory of the recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SeTrace {
    /// `tau_t^2` for `t = 0..=T`.
    pub tau_sq_series: Vec<f64>,
    pub converged: bool,
    /// Set when the state exceeded ten times its initial value.
    pub diverged: bool,
    pub n_mc: usize,
}

impl SeTrace {
    pub fn fixed_point(&self) -> f64 {
        *self.tau_sq_series.last().expect("trace is never empty")
    }

    /// CSV with columns `t,tau_sq`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "tau_sq"])?;
        for (t, v) in self.tau_sq_series.iter().enumerate() {
            w.serialize((t, v))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Iterates [`se_step`] up to `max_steps` times, stopping once the relative
/// change of `tau^2` is at most `1e-4`.
pub fn run_se<R: Rng + ?Sized>(initial_tau_sq: f64, max_steps: usize, cfg: &SeConfig, rng: &mut R) -> Result<SeTrace> {
    if max_steps == 0 {
        return Err(Error::config("state evolution needs at least one step"));
    }
    let mut series = vec![initial_tau_sq];
    let (mut converged, mut diverged) = (false, false);
    for _ in 0..max_steps {
        let cur = *series.last().unwrap();
        let next = se_step(cur, cfg, rng)?.tau_sq;
        series.push(next);
        if next > 10.0 * initial_tau_sq {
            diverged = true;
            break;
        }
        if (next - cur).abs() <= 1e-4 * cur {
            converged = true;
            break;
        }
    }
    Ok(SeTrace {
        tau_sq_series: series,
        converged,
        diverged,
        n_mc: cfg.mc_samples,
    })
}

/// Like [`run_se`] but always takes exactly `steps` steps.
pub fn run_se_fixed<R: Rng + ?Sized>(initial_tau_sq: f64, steps: usize, cfg: &SeConfig, rng: &mut R) -> Result<Vec<f64>> {
    let mut series = vec![initial_tau_sq];
    for _ in 0..steps {
        let cur = *series.last().unwrap();
        series.push(se_step(cur, cfg, rng)?.tau_sq);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use approx::assert_relative_eq;

    fn base(choice: DenoiserChoice, gains: Vec<f64>) -> SeConfig {
        SeConfig {
            pilot_len: 50,
            n_antennas: 2,
            noise_var: 0.01,
            gains: gains.into(),
            activity: ActivityModel::stationary(0.1, 0.55).unwrap(),
            choice,
            si: SeSideInfo::None,
            mc_samples: 100_000,
            conditioning: SeConditioning::Prior,
        }
    }

    #[test]
    fn zero_and_identity_denoisers() {
        let gains: Vec<f64> = (0..200).map(|i| 0.5 + (i % 7) as f64 * 0.1).collect();
        let mean_g = gains.iter().sum::<f64>() / 200.0;
        let mut rng = substream(1, Stream::StateEvolution, 0, 0);
        let cfg = base(DenoiserChoice::Zero, gains.clone());
        let step = se_step(0.3, &cfg, &mut rng).unwrap();
        let expect = 0.01 + 200.0 / 50.0 * 0.1 * mean_g;
        assert_relative_eq!(step.tau_sq, expect, max_relative = 0.02);
        assert_relative_eq!(cfg.initial_tau_sq(), expect, max_relative = 1e-12);

        let cfg = base(DenoiserChoice::Identity, gains);
        let step = se_step(0.3, &cfg, &mut rng).unwrap();
        assert_relative_eq!(step.tau_sq, 0.01 + 4.0 * 0.3, max_relative = 0.02);
    }

    #[test]
    fn no_signal_converges_to_noise_floor() {
        let cfg = SeConfig {
            activity: ActivityModel::stationary(0.1, 0.55).unwrap(),
            ..base(DenoiserChoice::MmseNoSi { lambda: 0.1, gains: vec![1e-30; 100].into() }, vec![1e-30; 100])
        };
        let mut rng = substream(2, Stream::StateEvolution, 0, 0);
        let trace = run_se(cfg.initial_tau_sq(), 10, &cfg, &mut rng).unwrap();
        assert!(trace.converged && trace.tau_sq_series.len() <= 3);
        assert_relative_eq!(trace.fixed_point(), 0.01, max_relative = 1e-6);
    }

    #[test]
    fn state_never_below_noise_and_si_helps() {
        let gains: Vec<f64> = vec![1.0; 200];
        let act = ActivityModel::stationary(0.1, 0.91).unwrap();
        let mut rng = substream(3, Stream::StateEvolution, 0, 0);
        let no_si = SeConfig {
            activity: act,
            ..base(DenoiserChoice::MmseNoSi { lambda: 0.1, gains: gains.clone().into() }, gains.clone())
        };
        let t0 = no_si.initial_tau_sq();
        let a = run_se(t0, 30, &no_si, &mut rng).unwrap();
        assert!(a.tau_sq_series.iter().all(|&t| t >= 0.01));
        let with_si = SeConfig {
            choice: DenoiserChoice::MmseSi { activity: act, gains: gains.into() },
            si: SeSideInfo::Estimated { tau_prev_sq: a.fixed_point() },
            ..no_si.clone()
        };
        let b = run_se(t0, 30, &with_si, &mut rng).unwrap();
        assert!(b.fixed_point() < a.fixed_point(), "{} vs {}", b.fixed_point(), a.fixed_point());
    }

    #[test]
    fn off_diagonals_vanish() {
        let gains: Vec<f64> = (0..300).map(|i| 0.2 + (i % 5) as f64 * 0.3).collect();
        let mut rng = substream(4, Stream::StateEvolution, 0, 0);
        for choice in [
            DenoiserChoice::SoftNoSi { lambda: 0.1 },
            DenoiserChoice::MmseNoSi { lambda: 0.1, gains: gains.clone().into() },
        ] {
            let cfg = base(choice, gains.clone());
            let step = se_step(0.2, &cfg, &mut rng).unwrap();
            let off = step.cov[[0, 1]];
            assert!(off.re.abs() <= 3.0 * step.std_err_re[[0, 1]] && off.im.abs() <= 3.0 * step.std_err_im[[0, 1]]);
            assert!(step.std_err_re[[0, 1]] > 0.0);
        }
    }

    #[test]
    fn realized_conditioning_and_csv() {
        let mut rows = Array2::zeros((100, 2));
        rows[[3, 0]] = Complex64::new(2.0, 0.0);
        let cfg = SeConfig {
            conditioning: SeConditioning::Realized { current: rows, previous: None },
            ..base(DenoiserChoice::Zero, vec![1.0; 100])
        };
        assert_relative_eq!(cfg.initial_tau_sq(), 0.01 + 4.0 / 2.0 / 50.0, max_relative = 1e-14);
        let mut rng = substream(5, Stream::StateEvolution, 0, 0);
        let step = se_step(1.0, &cfg, &mut rng).unwrap();
        assert_relative_eq!(step.tau_sq, cfg.initial_tau_sq(), max_relative = 1e-14);
        let trace = run_se(cfg.initial_tau_sq(), 3, &cfg, &mut rng).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,tau_sq\n0,"));
        let bad = SeConfig { mc_samples: 0, ..cfg };
        assert!(matches!(se_step(1.0, &bad, &mut rng), Err(Error::Domain(_))));
    }
}

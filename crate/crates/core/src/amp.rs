//! Multiple-measurement-vector AMP with side information.
//!
//! Within a block, starting from `X_0 = 0` and `R_0 = Y`:
//!
//! ```text
//! X~_t      = X_t + S^H R_t
//! X_{t+1}   = eta(X~_t, SI)               (row-wise)
//! R_{t+1}   = Y - S X_{t+1} + (1/L) R_t sum_n J_n^T
//! ```
//!
//! where `J_n` is the Wirtinger Jacobian of the row-`n` denoiser. The
//! converged pseudo-data `X_inf + S^H R_inf` is both the detection statistic
//! and the side information handed to the next block.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::denoiser::mmse::{log_odds_offset, log_odds_offset_known, mmse_gain, MmsePrior};
use crate::denoiser::soft::{
    gate_for_false_alarm, no_si_threshold, soft_gain, soft_jacobian_coeffs, solve_thresholds, BinaryThreshold,
    MinimaxContext,
};
use crate::denoiser::ShrinkJacobian;
use crate::error::{Error, Result};
use crate::linalg::frobenius_sq;
use crate::scenario::ActivityModel;

/// Smallest state variance used by the denoisers; keeps `Y = 0` well defined.
pub const TAU_SQ_FLOOR: f64 = 1e-300;

/// How the memory term of the residual update is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OnsagerMode {
    /// `(1/L) R_t sum_n J_n^T` with the full M x M Jacobians.
    #[default]
    Matrix,
    /// `(1/L) sum_n trace(J_n)/M R_t`.
    Scalar,
    /// No correction (plain iterative thresholding).
    Disabled,
}

/// Source of the state variance fed to the denoisers.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StateSource {
    /// `||R_t||_F^2 / (L M)`.
    #[default]
    Empirical,
    /// A precomputed series `tau_t^2`; the last entry is reused past its end.
    Oracle(Arc<[f64]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub onsager: OnsagerMode,
    pub state: StateSource,
    /// Abort when the empirical state exceeds this multiple of its initial value.
    pub divergence_factor: f64,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-6,
            onsager: OnsagerMode::Matrix,
            state: StateSource::Empirical,
            divergence_factor: 10.0,
        }
    }
}

/// Iterate of the recursion within one block.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub x_mat: Array2<Complex64>,
    pub residual: Array2<Complex64>,
    pub tau_hat_sq: f64,
    pub iter: usize,
}

impl AmpState {
    /// `X_0 = 0`, `R_0 = Y`.
    pub fn init(n_devices: usize, y: &Array2<Complex64>) -> Self {
        Self {
            x_mat: Array2::zeros((n_devices, y.ncols())),
            residual: y.clone(),
            tau_hat_sq: empirical_tau_sq(y.view()),
            iter: 0,
        }
    }
}

/// `||R||_F^2 / (L M)`, floored at [`TAU_SQ_FLOOR`].
pub fn empirical_tau_sq(residual: ArrayView2<'_, Complex64>) -> f64 {
    (frobenius_sq(residual) / residual.len() as f64).max(TAU_SQ_FLOOR)
}

/// Side information carried from block `j - 1` to block `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    /// Rows `x_hat_n + R_inf^H s_n` of the previous block (N x M).
    pub si_vectors: Array2<Complex64>,
    /// Converged state of the previous block.
    pub tau_prev_sq: f64,
    /// Index of the block the SI was produced in.
    pub block_index: usize,
    /// True previous activity, for oracle schemes only. When present, soft
    /// schemes classify by it instead of the gate and MMSE schemes condition
    /// on it instead of on `si_vectors`.
    pub prior_activity: Option<Vec<bool>>,
}

/// Denoiser family and its design parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserChoice {
    /// Binary minimax soft threshold. The SI gate is set so that a
    /// previously inactive device passes it with probability `si_false_alarm`.
    SoftSi { activity: ActivityModel, si_false_alarm: f64 },
    /// Single minimax soft threshold.
    SoftNoSi { lambda: f64 },
    /// Posterior mean with Markov side information.
    MmseSi { activity: ActivityModel, gains: Arc<[f64]> },
    /// Posterior mean under the i.i.d. Bernoulli-Rayleigh prior.
    MmseNoSi { lambda: f64, gains: Arc<[f64]> },
    Identity,
    Zero,
}

/// Name of a denoiser family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    SoftSi,
    SoftNoSi,
    MmseSi,
    MmseNoSi,
    Identity,
    Zero,
}

impl DenoiserChoice {
    pub fn kind(&self) -> DenoiserKind {
        match self {
            Self::SoftSi { .. } => DenoiserKind::SoftSi,
            Self::SoftNoSi { .. } => DenoiserKind::SoftNoSi,
            Self::MmseSi { .. } => DenoiserKind::MmseSi,
            Self::MmseNoSi { .. } => DenoiserKind::MmseNoSi,
            Self::Identity => DenoiserKind::Identity,
            Self::Zero => DenoiserKind::Zero,
        }
    }

    pub fn uses_si(&self) -> bool {
        matches!(self, Self::SoftSi { .. } | Self::MmseSi { .. })
    }

    fn gains(&self) -> Option<&Arc<[f64]>> {
        match self {
            Self::MmseSi { gains, .. } | Self::MmseNoSi { gains, .. } => Some(gains),
            _ => None,
        }
    }
}

/// Per-block denoiser with all SI-dependent quantities resolved. The soft
/// thresholds scale linearly with `tau`, so they are stored at `tau = 1`.
#[derive(Debug, Clone)]
enum Prepared {
    Soft {
        unit: BinaryThreshold,
        si_active: Option<Vec<bool>>,
    },
    Mmse {
        gains: Arc<[f64]>,
        offsets: Vec<f64>,
    },
    Identity,
    Zero,
}

impl Prepared {
    fn new(choice: &DenoiserChoice, si: Option<&SideInfo>, n: usize, m: usize) -> Result<Self> {
        if let Some(g) = choice.gains() {
            if g.len() != n {
                return Err(Error::Dimension(format!("{} path gains for {n} devices", g.len())));
            }
        }
        if let Some(si) = si {
            if si.si_vectors.dim() != (n, m) {
                return Err(Error::Dimension(format!(
                    "side information is {:?}, expected ({n}, {m})",
                    si.si_vectors.dim()
                )));
            }
        }
        let si = si.filter(|_| choice.uses_si());
        Ok(match (choice, si) {
            (DenoiserChoice::SoftNoSi { lambda }, _) => Prepared::Soft {
                unit: BinaryThreshold::uniform(no_si_threshold(m, 1.0, *lambda)?),
                si_active: None,
            },
            (DenoiserChoice::SoftSi { activity, .. }, None) => Prepared::Soft {
                unit: BinaryThreshold::uniform(no_si_threshold(m, 1.0, activity.lambda)?),
                si_active: None,
            },
            (DenoiserChoice::SoftSi { activity, si_false_alarm }, Some(si)) => {
                let tau_prev = si.tau_prev_sq.sqrt();
                let (ctx, si_active) = match &si.prior_activity {
                    Some(truth) => {
                        if truth.len() != n {
                            return Err(Error::Dimension("prior activity length".into()));
                        }
                        let ctx = MinimaxContext::with_varsigma(m, 1.0, activity.lambda, activity.alpha, activity.beta, 0.0)?;
                        (ctx, truth.clone())
                    }
                    None => {
                        let gate = gate_for_false_alarm(m, tau_prev, *si_false_alarm)?;
                        let ctx = MinimaxContext::new(m, 1.0, tau_prev, gate, activity.lambda, activity.alpha, activity.beta)?;
                        let flags = si
                            .si_vectors
                            .rows()
                            .into_iter()
                            .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() > gate)
                            .collect();
                        (ctx, flags)
                    }
                };
                Prepared::Soft {
                    unit: solve_thresholds(&ctx)?,
                    si_active: Some(si_active),
                }
            }
            (DenoiserChoice::MmseNoSi { lambda, gains }, _) => {
                let p = MmsePrior {
                    gamma: 1.0,
                    lambda: *lambda,
                    alpha: *lambda,
                    beta: *lambda,
                    tau_sq: 1.0,
                    tau_prev_sq: f64::INFINITY,
                };
                Prepared::Mmse {
                    gains: Arc::clone(gains),
                    offsets: vec![log_odds_offset(&p, None, m); n],
                }
            }
            (DenoiserChoice::MmseSi { activity, gains }, si) => {
                if let Some(truth) = si.and_then(|s| s.prior_activity.as_ref()) {
                    if truth.len() != n {
                        return Err(Error::Dimension("prior activity length".into()));
                    }
                    let p = MmsePrior {
                        gamma: 1.0,
                        lambda: activity.lambda,
                        alpha: activity.alpha,
                        beta: activity.beta,
                        tau_sq: 1.0,
                        tau_prev_sq: 1.0,
                    };
                    return Ok(Prepared::Mmse {
                        gains: Arc::clone(gains),
                        offsets: truth.iter().map(|&a| log_odds_offset_known(&p, a)).collect(),
                    });
                }
                let offsets = (0..n)
                    .map(|i| {
                        let p = MmsePrior {
                            gamma: gains[i],
                            lambda: activity.lambda,
                            alpha: activity.alpha,
                            beta: activity.beta,
                            tau_sq: 1.0,
                            tau_prev_sq: si.map_or(f64::INFINITY, |s| s.tau_prev_sq.max(TAU_SQ_FLOOR)),
                        };
                        let si_norm = si.map(|s| s.si_vectors.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>());
                        log_odds_offset(&p, si_norm, m)
                    })
                    .collect();
                Prepared::Mmse {
                    gains: Arc::clone(gains),
                    offsets,
                }
            }
            (DenoiserChoice::Identity, _) => Prepared::Identity,
            (DenoiserChoice::Zero, _) => Prepared::Zero,
        })
    }

    /// Gain and Jacobian of row `n` at squared norm `norm_sq` and state `tau_sq`.
    #[inline]
    fn row(&self, n: usize, norm_sq: f64, tau_sq: f64, m: usize) -> (f64, ShrinkJacobian) {
        match self {
            Prepared::Soft { unit, si_active } => {
                let tau = tau_sq.sqrt();
                let unit_theta = match si_active {
                    Some(flags) if flags[n] => unit.theta_active,
                    Some(_) => unit.theta_inactive,
                    None => unit.theta_inactive,
                };
                let theta = if unit_theta.is_infinite() { f64::INFINITY } else { unit_theta * tau };
                let r = norm_sq.sqrt();
                (soft_gain(r, theta), soft_jacobian_coeffs(r, theta))
            }
            Prepared::Mmse { gains, offsets } => mmse_gain(gains[n], tau_sq, norm_sq, offsets[n], m),
            Prepared::Identity => (1.0, ShrinkJacobian::IDENTITY),
            Prepared::Zero => (0.0, ShrinkJacobian::ZERO),
        }
    }
}

/// Row `n` of the pseudo-data `X_t + S^H R_t`.
pub fn pseudo_data(state: &AmpState, pilots: &Array2<Complex64>, n: usize) -> ndarray::Array1<Complex64> {
    let s = pilots.column(n).mapv(|z| z.conj());
    &state.x_mat.row(n) + &s.dot(&state.residual)
}

fn conj_transpose(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Quantities shared by every iteration of a block.
struct BlockWork<'a> {
    pilots: &'a Array2<Complex64>,
    pilots_h: Array2<Complex64>,
    y: &'a Array2<Complex64>,
    denoiser: Prepared,
}

impl<'a> BlockWork<'a> {
    fn new(
        pilots: &'a Array2<Complex64>,
        y: &'a Array2<Complex64>,
        si: Option<&SideInfo>,
        choice: &DenoiserChoice,
    ) -> Result<Self> {
        if pilots.nrows() != y.nrows() {
            return Err(Error::Dimension(format!(
                "pilots have {} rows, received signal {}",
                pilots.nrows(),
                y.nrows()
            )));
        }
        Ok(Self {
            pilots,
            pilots_h: conj_transpose(pilots),
            y,
            denoiser: Prepared::new(choice, si, pilots.ncols(), y.ncols())?,
        })
    }

    fn pseudo(&self, state: &AmpState) -> Array2<Complex64> {
        &state.x_mat + &self.pilots_h.dot(&state.residual)
    }

    fn step(&self, state: &AmpState, tau_sq: f64, onsager: OnsagerMode) -> Result<AmpState> {
        let (l, m) = self.y.dim();
        let mut x_next = self.pseudo(state);
        let mut jac_sum = Array2::<Complex64>::zeros((m, m));
        let mut trace_sum = 0.0;
        for (n, mut row) in x_next.axis_iter_mut(Axis(0)).enumerate() {
            let norm_sq: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            let (gain, jac) = self.denoiser.row(n, norm_sq, tau_sq, m);
            match onsager {
                OnsagerMode::Matrix => jac.add_transpose_to(row.view(), &mut jac_sum),
                OnsagerMode::Scalar => trace_sum += jac.mean_diagonal(norm_sq, m),
                OnsagerMode::Disabled => {}
            }
            row.mapv_inplace(|z| z * gain);
        }
        let mut residual = self.y - &self.pilots.dot(&x_next);
        let inv_l = 1.0 / l as f64;
        match onsager {
            OnsagerMode::Matrix => residual += &state.residual.dot(&jac_sum).mapv(|z| z * inv_l),
            OnsagerMode::Scalar => residual.scaled_add(Complex64::new(trace_sum * inv_l, 0.0), &state.residual),
            OnsagerMode::Disabled => {}
        }
        let iter = state.iter + 1;
        if x_next.iter().chain(residual.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Divergence {
                iter,
                reason: "non-finite iterate".into(),
            });
        }
        Ok(AmpState {
            tau_hat_sq: empirical_tau_sq(residual.view()),
            x_mat: x_next,
            residual,
            iter,
        })
    }
}

fn state_for(opts: &AmpOptions, state: &AmpState) -> f64 {
    match &opts.state {
        StateSource::Empirical => state.tau_hat_sq,
        StateSource::Oracle(series) => {
            let idx = state.iter.min(series.len().saturating_sub(1));
            series.get(idx).copied().unwrap_or(state.tau_hat_sq).max(TAU_SQ_FLOOR)
        }
    }
}

/// One AMP iteration.
pub fn amp_step(
    state: &AmpState,
    pilots: &Array2<Complex64>,
    y: &Array2<Complex64>,
    si: Option<&SideInfo>,
    choice: &DenoiserChoice,
    opts: &AmpOptions,
) -> Result<AmpState> {
    check_state(state, pilots, y)?;
    let work = BlockWork::new(pilots, y, si, choice)?;
    work.step(state, state_for(opts, state), opts.onsager)
}

fn check_state(state: &AmpState, pilots: &Array2<Complex64>, y: &Array2<Complex64>) -> Result<()> {
    if state.x_mat.dim() != (pilots.ncols(), y.ncols()) || state.residual.dim() != y.dim() {
        return Err(Error::Dimension("AMP state does not match pilots and received signal".into()));
    }
    Ok(())
}

/// Result of running AMP on one block.
#[derive(Debug, Clone)]
pub struct BlockEstimate {
    /// Converged estimate `X_inf` (N x M).
    pub x_hat: Array2<Complex64>,
    /// Converged residual `R_inf` (L x M).
    pub residual: Array2<Complex64>,
    /// Rows `x_hat_n + R_inf^H s_n`.
    pub pseudo: Array2<Complex64>,
    /// Detection statistics `||x_hat_n + R_inf^H s_n||`.
    pub statistics: Vec<f64>,
    /// Converged empirical state `||R_inf||_F^2 / (L M)`.
    pub tau_hat_sq: f64,
    /// Empirical state at every iteration, starting with `t = 0`.
    pub tau_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl BlockEstimate {
    /// Side information for the next block.
    pub fn side_info(&self, block_index: usize) -> SideInfo {
        SideInfo {
            si_vectors: self.pseudo.clone(),
            tau_prev_sq: self.tau_hat_sq,
            block_index,
            prior_activity: None,
        }
    }
}

/// Runs AMP from `X_0 = 0` until the relative change of `X` drops to `tol`
/// or `max_iter` iterations, and returns the estimate with the SI it emits.
pub fn run_block(
    pilots: &Array2<Complex64>,
    y: &Array2<Complex64>,
    si: Option<&SideInfo>,
    choice: &DenoiserChoice,
    opts: &AmpOptions,
    block_index: usize,
) -> Result<(BlockEstimate, SideInfo)> {
    if opts.max_iter == 0 || !(opts.tol >= 0.0) {
        return Err(Error::config("AMP needs max_iter >= 1 and tol >= 0"));
    }
    let work = BlockWork::new(pilots, y, si, choice)?;
    let mut state = AmpState::init(pilots.ncols(), y);
    let tau0 = state.tau_hat_sq;
    let mut trace = vec![tau0];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = work.step(&state, state_for(opts, &state), opts.onsager)?;
        if tau0 > TAU_SQ_FLOOR && next.tau_hat_sq > opts.divergence_factor * tau0 {
            return Err(Error::Divergence {
                iter: next.iter,
                reason: format!("state grew from {tau0:.3e} to {:.3e}", next.tau_hat_sq),
            });
        }
        let change = Zip::from(&next.x_mat)
            .and(&state.x_mat)
            .fold(0.0, |acc, a, b| acc + (a - b).norm_sqr());
        let scale = frobenius_sq(state.x_mat.view());
        trace.push(next.tau_hat_sq);
        state = next;
        if change <= opts.tol * opts.tol * scale {
            converged = true;
            break;
        }
    }
    let pseudo = work.pseudo(&state);
    let statistics = pseudo
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let est = BlockEstimate {
        x_hat: state.x_mat,
        residual: state.residual,
        pseudo,
        statistics,
        tau_hat_sq: state.tau_hat_sq,
        tau_trace: trace,
        iterations: state.iter,
        converged,
    };
    let si_next = est.side_info(block_index);
    Ok((est, si_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, substream, Stream};
    use crate::scenario::{generate_trial, ChannelModel, ScenarioConfig};

    fn unitary(n: usize, seed: u64) -> Array2<Complex64> {
        // Gram-Schmidt on a random complex matrix.
        let mut rng = substream(seed, Stream::Probe, 0, 0);
        let mut a = Array2::from_shape_simple_fn((n, n), || complex_normal(&mut rng, 1.0));
        for j in 0..n {
            for k in 0..j {
                let proj: Complex64 = (0..n).map(|i| a[[i, k]].conj() * a[[i, j]]).sum();
                for i in 0..n {
                    let v = a[[i, k]] * proj;
                    a[[i, j]] -= v;
                }
            }
            let norm = (0..n).map(|i| a[[i, j]].norm_sqr()).sum::<f64>().sqrt();
            for i in 0..n {
                a[[i, j]] /= norm;
            }
        }
        a
    }

    fn sparse_x(n: usize, m: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = substream(seed, Stream::Channels, 0, 0);
        Array2::from_shape_fn((n, m), |(i, _)| if i % 5 == 0 { complex_normal(&mut rng, 1.0) } else { Complex64::new(0.0, 0.0) })
    }

    #[test]
    fn pseudo_data_cases() {
        let s = unitary(8, 1);
        let x = sparse_x(8, 2, 2);
        let y = s.dot(&x);
        let state = AmpState::init(8, &y);
        for n in 0..8 {
            let p = pseudo_data(&state, &s, n);
            for (a, b) in p.iter().zip(x.row(n).iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        let zero_res = AmpState {
            residual: Array2::zeros(y.dim()),
            x_mat: x.clone(),
            ..state
        };
        assert_eq!(pseudo_data(&zero_res, &s, 3), x.row(3).to_owned());
    }

    #[test]
    fn identity_denoiser_recovers_orthonormal_case() {
        let s = unitary(8, 3);
        let x = sparse_x(8, 2, 4);
        let y = s.dot(&x);
        let opts = AmpOptions::default();
        let state = AmpState::init(8, &y);
        let next = amp_step(&state, &s, &y, None, &DenoiserChoice::Identity, &opts).unwrap();
        for (a, b) in next.x_mat.iter().zip(x.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        // Y - S X_1 vanishes; the memory term (N/L) R_0 with L = N leaves R_1 = R_0.
        for (a, b) in next.residual.iter().zip(y.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let plain = AmpOptions {
            onsager: OnsagerMode::Disabled,
            ..opts
        };
        let next = amp_step(&state, &s, &y, None, &DenoiserChoice::Identity, &plain).unwrap();
        assert!(next.residual.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn zero_signal_stays_zero() {
        let cfg = ScenarioConfig {
            n_devices: 30,
            pilot_len: 12,
            n_antennas: 2,
            n_blocks: 1,
            ..ScenarioConfig::default()
        };
        let trial = generate_trial(&cfg, 0).unwrap();
        let y = Array2::zeros((12, 2));
        let gains: Arc<[f64]> = trial.gains().into();
        let model = cfg.activity().unwrap();
        for choice in [
            DenoiserChoice::SoftNoSi { lambda: 0.1 },
            DenoiserChoice::MmseNoSi {
                lambda: 0.1,
                gains: gains.clone(),
            },
            DenoiserChoice::MmseSi { activity: model, gains },
        ] {
            let (est, _) = run_block(&trial.pilots, &y, None, &choice, &AmpOptions::default(), 1).unwrap();
            assert!(est.x_hat.iter().all(|z| z.norm() == 0.0));
            assert!(est.residual.iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn residual_bookkeeping() {
        let cfg = ScenarioConfig {
            n_devices: 100,
            pilot_len: 40,
            n_antennas: 2,
            n_blocks: 1,
            channel_model: ChannelModel::UnitRayleigh,
            tx_power_dbm: 0.0,
            noise_psd_dbm_hz: -60.0,
            bandwidth_hz: 1.0,
            ..ScenarioConfig::default()
        };
        let trial = generate_trial(&cfg, 1).unwrap();
        let b = &trial.blocks[0];
        let choice = DenoiserChoice::MmseNoSi {
            lambda: 0.1,
            gains: trial.gains().into(),
        };
        let opts = AmpOptions::default();
        let mut state = AmpState::init(100, &b.received);
        for _ in 0..5 {
            let next = amp_step(&state, &trial.pilots, &b.received, None, &choice, &opts).unwrap();
            // Rebuild the memory term from the Jacobians directly.
            let work = BlockWork::new(&trial.pilots, &b.received, None, &choice).unwrap();
            let pseudo = work.pseudo(&state);
            let mut jt = Array2::<Complex64>::zeros((2, 2));
            for (n, row) in pseudo.rows().into_iter().enumerate() {
                let ns: f64 = row.iter().map(|z| z.norm_sqr()).sum();
                let j = work.denoiser.row(n, ns, state.tau_hat_sq, 2).1.to_matrix(row);
                jt += &j.t();
            }
            let memory = state.residual.dot(&jt).mapv(|z| z / 40.0);
            let lhs = &b.received - &trial.pilots.dot(&next.x_mat);
            let rhs = &next.residual - &memory;
            assert!(lhs.iter().zip(rhs.iter()).all(|(a, c)| (a - c).norm() <= 1e-12 * (1.0 + a.norm())));
            state = next;
        }
    }

    #[test]
    fn deterministic_and_detects_strong_device() {
        let cfg = ScenarioConfig {
            n_devices: 200,
            pilot_len: 100,
            n_antennas: 1,
            n_blocks: 1,
            channel_model: ChannelModel::UnitRayleigh,
            ..ScenarioConfig::default()
        };
        let trial = generate_trial(&cfg, 0).unwrap();
        let mut x = Array2::zeros((200, 1));
        x[[17, 0]] = Complex64::new(0.8, -0.6);
        let y = trial.pilots.dot(&x);
        let choice = DenoiserChoice::SoftNoSi { lambda: 0.05 };
        let (a, si) = run_block(&trial.pilots, &y, None, &choice, &AmpOptions::default(), 1).unwrap();
        let (b, _) = run_block(&trial.pilots, &y, None, &choice, &AmpOptions::default(), 1).unwrap();
        assert_eq!(a.x_hat, b.x_hat);
        let others = a.statistics.iter().enumerate().filter(|(i, _)| *i != 17).map(|(_, s)| *s).fold(0.0, f64::max);
        assert!(a.statistics[17] >= 10.0 * others, "{} vs {}", a.statistics[17], others);
        assert_eq!(si.si_vectors, a.pseudo);
        assert_eq!(si.tau_prev_sq, a.tau_hat_sq);
    }

    #[test]
    fn si_kinds_match_no_si_without_side_information() {
        let cfg = ScenarioConfig {
            n_devices: 150,
            pilot_len: 50,
            n_antennas: 2,
            n_blocks: 1,
            ..ScenarioConfig::default()
        };
        let trial = generate_trial(&cfg, 2).unwrap();
        let model = cfg.activity().unwrap();
        let gains: Arc<[f64]> = trial.gains().into();
        let y = &trial.blocks[0].received;
        let opts = AmpOptions::default();
        let pairs = [
            (
                DenoiserChoice::MmseSi {
                    activity: model,
                    gains: gains.clone(),
                },
                DenoiserChoice::MmseNoSi {
                    lambda: model.lambda,
                    gains,
                },
            ),
            (
                DenoiserChoice::SoftSi {
                    activity: model,
                    si_false_alarm: 0.05,
                },
                DenoiserChoice::SoftNoSi { lambda: model.lambda },
            ),
        ];
        for (with, without) in pairs {
            let (a, _) = run_block(&trial.pilots, y, None, &with, &opts, 1).unwrap();
            let (b, _) = run_block(&trial.pilots, y, None, &without, &opts, 1).unwrap();
            assert_eq!(a.x_hat, b.x_hat);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let s = unitary(6, 9);
        let x = sparse_x(6, 1, 1);
        let y = s.dot(&x);
        let bad = Array2::from_elem((6, 1), Complex64::new(f64::NAN, 0.0));
        let err = run_block(&s, &bad, None, &DenoiserChoice::SoftNoSi { lambda: 0.1 }, &AmpOptions::default(), 1);
        assert!(matches!(err, Err(Error::Divergence { iter: 1, .. })));
        let wrong = Array2::zeros((5, 1));
        assert!(matches!(
            amp_step(&AmpState::init(6, &y), &s, &wrong, None, &DenoiserChoice::Identity, &AmpOptions::default()),
            Err(Error::Dimension(_))
        ));
    }
}

//! Experiment orchestration: runs every scheme on identical block sequences,
//! aggregates Monte Carlo trials and writes CSV tables with a JSON manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{run_block, AmpOptions, DenoiserChoice, OnsagerMode, SideInfo};
use crate::denoiser::soft::{joint_activity_probs, minimax_mse, BinaryThreshold, MinimaxContext};
use crate::error::{Error, Result};
use crate::metrics::{confusion, pmd_at_pfa, Confusion, NmseAccumulator};
use crate::rng::{substream, Stream};
use crate::scenario::{generate_trial, place_devices, ActivityModel, BlockTruth, ScenarioConfig};
use crate::state_evolution::{run_se, SeConditioning, SeConfig, SeSideInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Soft,
    Mmse,
}

/// Where a scheme's side information comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiMode {
    /// The previous block's converged pseudo-data.
    EstimatedSi,
    /// Built from the true previous activity (simulation only).
    PerfectSi,
    NoSi,
}

impl SiMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SiMode::EstimatedSi => "estimated_si",
            SiMode::PerfectSi => "perfect_si",
            SiMode::NoSi => "no_si",
        }
    }
}

/// A denoiser family paired with a side-information mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scheme {
    pub family: Family,
    pub si: SiMode,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::new(Family::Soft, SiMode::EstimatedSi),
        Scheme::new(Family::Soft, SiMode::PerfectSi),
        Scheme::new(Family::Soft, SiMode::NoSi),
        Scheme::new(Family::Mmse, SiMode::EstimatedSi),
        Scheme::new(Family::Mmse, SiMode::PerfectSi),
        Scheme::new(Family::Mmse, SiMode::NoSi),
    ];

    pub const fn new(family: Family, si: SiMode) -> Self {
        Self { family, si }
    }

    pub fn name(&self) -> &'static str {
        match (self.family, self.si) {
            (Family::Soft, SiMode::EstimatedSi) => "soft_si",
            (Family::Soft, SiMode::PerfectSi) => "soft_perfect",
            (Family::Soft, SiMode::NoSi) => "soft_no_si",
            (Family::Mmse, SiMode::EstimatedSi) => "mmse_si",
            (Family::Mmse, SiMode::PerfectSi) => "mmse_perfect",
            (Family::Mmse, SiMode::NoSi) => "mmse_no_si",
        }
    }

    /// Denoiser for this scheme; SI kinds fall back to their no-SI form when
    /// no side information is supplied.
    pub fn choice(&self, activity: ActivityModel, gains: &Arc<[f64]>, si_false_alarm: f64) -> DenoiserChoice {
        match (self.family, self.si) {
            (Family::Soft, SiMode::NoSi) => DenoiserChoice::SoftNoSi { lambda: activity.lambda },
            (Family::Soft, _) => DenoiserChoice::SoftSi {
                activity,
                si_false_alarm,
            },
            (Family::Mmse, SiMode::NoSi) => DenoiserChoice::MmseNoSi {
                lambda: activity.lambda,
                gains: Arc::clone(gains),
            },
            (Family::Mmse, _) => DenoiserChoice::MmseSi {
                activity,
                gains: Arc::clone(gains),
            },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scheme {s:?}")))
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Units of the detection gate grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GateUnits {
    /// Multiples of the converged `tau_hat` of each block.
    #[default]
    TauRelative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    SingleRun,
    Roc,
    NmseSweep,
    SeTrace,
}

/// Experiment settings that are not part of the physical scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub schemes: Vec<Scheme>,
    pub gate_grid: Vec<f64>,
    pub gate_units: GateUnits,
    pub pilot_lengths: Vec<usize>,
    pub n_trials: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub onsager: OnsagerMode,
    /// False-alarm probability of the gate that classifies the SI of soft schemes.
    pub si_false_alarm: f64,
    pub se_mc_samples: usize,
    pub se_max_steps: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            gate_grid: vec![2.0],
            gate_units: GateUnits::TauRelative,
            pilot_lengths: Vec::new(),
            n_trials: 20,
            max_iter: 50,
            tol: 1e-6,
            onsager: OnsagerMode::Matrix,
            si_false_alarm: 0.05,
            se_mc_samples: 100_000,
            se_max_steps: 50,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenario: ScenarioConfig,
    pub experiment: ExperimentSettings,
    pub mode: Mode,
    pub output_path: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn new(scenario: ScenarioConfig, experiment: ExperimentSettings, mode: Mode) -> Self {
        Self {
            scenario,
            experiment,
            mode,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let e = &self.experiment;
        if e.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        if e.schemes.is_empty() {
            return Err(Error::config("at least one scheme is required"));
        }
        if e.gate_grid.is_empty() || e.gate_grid.windows(2).any(|w| !(w[0] <= w[1])) || e.gate_grid.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::config("gate_grid must be a nonempty ascending list of nonnegative values"));
        }
        if self.mode == Mode::NmseSweep && e.pilot_lengths.is_empty() {
            return Err(Error::config("nmse_sweep needs pilot_lengths"));
        }
        if e.pilot_lengths.contains(&0) {
            return Err(Error::config("pilot lengths must be positive"));
        }
        if e.max_iter == 0 || !(e.tol >= 0.0) {
            return Err(Error::config("max_iter must be positive and tol nonnegative"));
        }
        if !(e.si_false_alarm > 0.0 && e.si_false_alarm < 1.0) {
            return Err(Error::config("si_false_alarm must lie in (0, 1)"));
        }
        if e.se_mc_samples == 0 || e.se_max_steps == 0 {
            return Err(Error::config("state evolution needs samples and steps"));
        }
        Ok(())
    }

    fn amp_options(&self) -> AmpOptions {
        AmpOptions {
            max_iter: self.experiment.max_iter,
            tol: self.experiment.tol,
            onsager: self.experiment.onsager,
            ..AmpOptions::default()
        }
    }
}

/// Reads a run configuration: scenario keys at top level and an optional
/// `[experiment]` table.
pub fn load_run_config(text: &str, origin: &Path) -> Result<(ScenarioConfig, ExperimentSettings)> {
    let parse_err = |e: toml::de::Error| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    };
    let mut table: toml::Table = text.parse().map_err(parse_err)?;
    let experiment = match table.remove("experiment") {
        Some(v) => v.try_into().map_err(parse_err)?,
        None => ExperimentSettings::default(),
    };
    let scenario: ScenarioConfig = toml::Value::Table(table).try_into().map_err(parse_err)?;
    scenario.validate()?;
    Ok((scenario, experiment))
}

pub fn load_run_config_file(path: &Path) -> Result<(ScenarioConfig, ExperimentSettings)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_run_config(&text, path)
}

/// Outcome of one scheme on one block of one trial.
#[derive(Debug, Clone)]
pub struct BlockRecord {
    pub trial: u64,
    pub block: usize,
    pub scheme: Scheme,
    pub pilot_len: usize,
    pub n_antennas: usize,
    pub statistics: Vec<f64>,
    pub activity: Arc<[bool]>,
    pub nmse_error: f64,
    pub nmse_energy: f64,
    pub tau_hat_sq: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

impl BlockRecord {
    /// Gate in absolute units for a grid value.
    pub fn gate(&self, value: f64, units: GateUnits) -> f64 {
        match units {
            GateUnits::TauRelative => value * self.tau_hat_sq.sqrt(),
            GateUnits::Absolute => value,
        }
    }

    pub fn confusion_at(&self, gate: f64) -> Confusion {
        let detected: Vec<bool> = self.statistics.iter().map(|&s| s > gate).collect();
        confusion(&detected, &self.activity).expect("lengths agree by construction")
    }

    /// Statistics divided by the converged `tau_hat`.
    pub fn normalized_statistics(&self) -> impl Iterator<Item = (f64, bool)> + '_ {
        let tau = self.tau_hat_sq.sqrt();
        self.statistics.iter().zip(self.activity.iter()).map(move |(s, a)| (s / tau, *a))
    }

    pub fn nmse(&self) -> f64 {
        self.nmse_error / self.nmse_energy
    }
}

/// Side information built from the true previous block: both families
/// condition on the true previous activity, which for MMSE schemes is the
/// `tau_prev -> 0` limit of `x_prev + tau_prev V`.
pub fn perfect_si_rows(prev: &BlockTruth, tau_prev_sq: f64) -> SideInfo {
    SideInfo {
        si_vectors: prev.effective.clone(),
        tau_prev_sq,
        block_index: prev.block_index,
        prior_activity: Some(prev.activity.clone()),
    }
}

/// Runs every scheme of the plan over the `J` blocks of trial `trial`.
pub fn run_trial(plan: &ExperimentPlan, trial: u64) -> Result<Vec<BlockRecord>> {
    let scenario = &plan.scenario;
    let t = generate_trial(scenario, trial)?;
    let activity = scenario.activity()?;
    let gains: Arc<[f64]> = t.gains().into();
    let opts = plan.amp_options();
    let truths: Vec<Arc<[bool]>> = t.blocks.iter().map(|b| b.activity.clone().into()).collect();
    let mut out = Vec::with_capacity(plan.experiment.schemes.len() * t.blocks.len());
    for &scheme in &plan.experiment.schemes {
        let choice = scheme.choice(activity, &gains, plan.experiment.si_false_alarm);
        let mut carried: Option<SideInfo> = None;
        let mut tau_prev: Option<f64> = None;
        for (j, truth) in t.blocks.iter().enumerate() {
            let si = match scheme.si {
                SiMode::NoSi => None,
                SiMode::EstimatedSi => carried.take(),
                SiMode::PerfectSi => match (j, tau_prev) {
                    (0, _) | (_, None) => None,
                    (_, Some(tp)) => Some(perfect_si_rows(&t.blocks[j - 1], tp)),
                },
            };
            let energy: f64 = truth.effective.iter().map(|z| z.norm_sqr()).sum();
            let base = BlockRecord {
                trial,
                block: truth.block_index,
                scheme,
                pilot_len: scenario.pilot_len,
                n_antennas: scenario.n_antennas,
                statistics: Vec::new(),
                activity: Arc::clone(&truths[j]),
                nmse_error: f64::NAN,
                nmse_energy: energy,
                tau_hat_sq: f64::NAN,
                iterations: 0,
                converged: false,
                diverged: false,
            };
            match run_block(&t.pilots, &truth.received, si.as_ref(), &choice, &opts, truth.block_index) {
                Ok((est, next)) => {
                    let err = est
                        .x_hat
                        .iter()
                        .zip(truth.effective.iter())
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum();
                    tau_prev = Some(est.tau_hat_sq);
                    carried = Some(next);
                    out.push(BlockRecord {
                        statistics: est.statistics,
                        nmse_error: err,
                        tau_hat_sq: est.tau_hat_sq,
                        iterations: est.iterations,
                        converged: est.converged,
                        ..base
                    });
                }
                Err(Error::Divergence { iter, reason }) => {
                    log::warn!("trial {trial} block {} scheme {scheme} diverged at {iter}: {reason}", truth.block_index);
                    tau_prev = None;
                    carried = None;
                    out.push(BlockRecord {
                        diverged: true,
                        iterations: iter,
                        ..base
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Runs all trials (concurrently) and returns the records sorted by
/// `(trial, block, scheme)`.
pub fn run_pipeline(plan: &ExperimentPlan) -> Result<Vec<BlockRecord>> {
    plan.validate()?;
    let per_trial: Vec<Vec<BlockRecord>> = (0..plan.experiment.n_trials as u64)
        .into_par_iter()
        .map(|t| run_trial(plan, t))
        .collect::<Result<_>>()?;
    let mut records: Vec<BlockRecord> = per_trial.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.pilot_len, r.trial, r.block, r.scheme));
    Ok(records)
}

/// One row of the per-trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: u64,
    pub block: usize,
    pub scheme: String,
    pub si_mode: String,
    #[serde(rename = "L")]
    pub pilot_len: usize,
    #[serde(rename = "M")]
    pub n_antennas: usize,
    pub gate: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub nmse: f64,
    pub tau_hat_sq: f64,
    pub diverged: bool,
}

/// Expands records into one row per grid gate.
pub fn result_rows(records: &[BlockRecord], grid: &[f64], units: GateUnits) -> Vec<ResultRow> {
    let mut rows = Vec::with_capacity(records.len() * grid.len());
    for r in records {
        for &g in grid {
            let gate = r.gate(g, units);
            let (p_fa, p_md) = if r.diverged {
                (f64::NAN, f64::NAN)
            } else {
                let c = r.confusion_at(gate);
                (c.p_fa().unwrap_or(f64::NAN), c.p_md().unwrap_or(f64::NAN))
            };
            rows.push(ResultRow {
                trial: r.trial,
                block: r.block,
                scheme: r.scheme.name().into(),
                si_mode: r.scheme.si.as_str().into(),
                pilot_len: r.pilot_len,
                n_antennas: r.n_antennas,
                gate: g,
                p_fa,
                p_md,
                nmse: if r.diverged { f64::NAN } else { r.nmse() },
                tau_hat_sq: r.tau_hat_sq,
                diverged: r.diverged,
            });
        }
    }
    rows
}

/// Trial-pooled metrics for one `(block, scheme, L, gate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub block: usize,
    pub scheme: String,
    #[serde(rename = "L")]
    pub pilot_len: usize,
    pub l: f64,
    pub p_fa: f64,
    pub p_md: f64,
    pub nmse: f64,
    pub seed: u64,
    pub n_trials: usize,
    pub n_diverged: usize,
}

/// Pools non-diverged trials: error counts are summed before dividing, NMSE is
/// a ratio of summed errors to summed energies.
pub fn summarize(records: &[BlockRecord], grid: &[f64], units: GateUnits, seed: u64) -> Vec<SummaryRow> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, usize, Scheme), Vec<&BlockRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.pilot_len, r.block, r.scheme)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for ((pilot_len, block, scheme), group) in groups {
        let ok: Vec<&&BlockRecord> = group.iter().filter(|r| !r.diverged).collect();
        let mut nmse = NmseAccumulator::default();
        for r in &ok {
            nmse.error += r.nmse_error;
            nmse.energy += r.nmse_energy;
        }
        for &g in grid {
            let mut c = Confusion {
                false_alarms: 0,
                inactive: 0,
                misses: 0,
                active: 0,
            };
            for r in &ok {
                c.merge(&r.confusion_at(r.gate(g, units)));
            }
            rows.push(SummaryRow {
                block,
                scheme: scheme.name().into(),
                pilot_len,
                l: g,
                p_fa: c.p_fa().unwrap_or(f64::NAN),
                p_md: c.p_md().unwrap_or(f64::NAN),
                nmse: nmse.value().unwrap_or(f64::NAN),
                seed,
                n_trials: group.len(),
                n_diverged: group.len() - ok.len(),
            });
        }
    }
    rows
}

/// Missed-detection rate at a pooled false-alarm rate, using statistics
/// normalized by each block's `tau_hat`. Returns `(normalized gate, p_md)`.
pub fn pooled_pmd_at_pfa(records: &[&BlockRecord], target_p_fa: f64) -> Result<(f64, f64)> {
    let (mut inactive, mut active) = (Vec::new(), Vec::new());
    for r in records.iter().filter(|r| !r.diverged) {
        for (s, a) in r.normalized_statistics() {
            if a {
                active.push(s);
            } else {
                inactive.push(s);
            }
        }
    }
    let (gate, _, md) = pmd_at_pfa(&inactive, &active, target_p_fa)?;
    Ok((gate, md))
}

/// Grid-search minimizer of the worst-case MSE over `(theta_1, theta_2)`.
///
/// The objective separates into one convex function per threshold, so each is
/// searched on its own: a coarse pass over `[0, 20 tau]` followed by a pass at
/// `resolution * tau` around the coarse minimum.
pub fn exhaustive_threshold_oracle(ctx: &MinimaxContext, resolution: f64) -> Result<BinaryThreshold> {
    if !(resolution > 0.0) {
        return Err(Error::domain("grid resolution must be positive"));
    }
    let p = joint_activity_probs(ctx);
    let tau = ctx.tau;
    let search = |part: &dyn Fn(f64) -> Result<f64>, active_weight: f64| -> Result<f64> {
        if active_weight == 0.0 {
            return Ok(f64::INFINITY);
        }
        let argmin = |lo: f64, step: f64, count: usize| -> Result<f64> {
            let mut best = (f64::INFINITY, lo);
            for k in 0..=count {
                let th = lo + k as f64 * step;
                let v = part(th)?;
                if v < best.0 {
                    best = (v, th);
                }
            }
            Ok(best.1)
        };
        let coarse_step = 100.0 * resolution * tau;
        let coarse_n = (20.0 * tau / coarse_step).ceil() as usize;
        let c = argmin(0.0, coarse_step, coarse_n)?;
        let lo = (c - coarse_step).max(0.0);
        let fine_step = resolution * tau;
        argmin(lo, fine_step, ((c + coarse_step - lo) / fine_step).ceil() as usize)
    };
    let t1 = search(&|th| Ok(minimax_mse(th, 0.0, ctx)?.part1), p.p11)?;
    let t2 = search(&|th| Ok(minimax_mse(0.0, th, ctx)?.part2), p.p10)?;
    Ok(BinaryThreshold {
        theta_active: t1,
        theta_inactive: t2,
        si_gate: ctx.l_prev,
    })
}

/// State-evolution trace row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeRow {
    pub scheme: String,
    pub block: usize,
    pub t: usize,
    pub tau_sq: f64,
}

/// State evolution of every scheme over the `J` blocks, chaining each block's
/// fixed point into the next block's side information. Device gains come from
/// the placement of trial 0.
pub fn se_traces(plan: &ExperimentPlan) -> Result<Vec<SeRow>> {
    plan.validate()?;
    let sc = &plan.scenario;
    let activity = sc.activity()?;
    let gains: Arc<[f64]> = place_devices(sc, &mut substream(sc.rng_seed, Stream::Placement, 0, 0))
        .iter()
        .map(|d| d.gamma)
        .collect::<Vec<_>>()
        .into();
    let mut rows = Vec::new();
    for &scheme in &plan.experiment.schemes {
        let mut rng = substream(sc.rng_seed, Stream::StateEvolution, 0, scheme_index(scheme));
        let mut prev: Option<f64> = None;
        for block in 1..=sc.n_blocks {
            let si = match (scheme.si, prev) {
                (SiMode::NoSi, _) | (_, None) => SeSideInfo::None,
                (SiMode::EstimatedSi, Some(tp)) => SeSideInfo::Estimated { tau_prev_sq: tp },
                (SiMode::PerfectSi, Some(tp)) => SeSideInfo::Perfect { tau_prev_sq: tp },
            };
            let cfg = SeConfig {
                pilot_len: sc.pilot_len,
                n_antennas: sc.n_antennas,
                noise_var: sc.noise_variance(),
                gains: Arc::clone(&gains),
                activity,
                choice: scheme.choice(activity, &gains, plan.experiment.si_false_alarm),
                si,
                mc_samples: plan.experiment.se_mc_samples,
                conditioning: SeConditioning::Prior,
            };
            let trace = run_se(cfg.initial_tau_sq(), plan.experiment.se_max_steps, &cfg, &mut rng)?;
            for (t, &v) in trace.tau_sq_series.iter().enumerate() {
                rows.push(SeRow {
                    scheme: scheme.name().into(),
                    block,
                    t,
                    tau_sq: v,
                });
            }
            prev = if trace.diverged { None } else { Some(trace.fixed_point()) };
        }
    }
    Ok(rows)
}

fn scheme_index(s: Scheme) -> u64 {
    Scheme::ALL.iter().position(|x| *x == s).unwrap_or(0) as u64
}

/// Run manifest written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub plan: ExperimentPlan,
    pub seed: u64,
    pub version: String,
    pub git_hash: String,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(plan: &ExperimentPlan, files: Vec<String>) -> Self {
        Self {
            plan: plan.clone(),
            seed: plan.scenario.rng_seed,
            version: env!("CARGO_PKG_VERSION").into(),
            git_hash: option_env!("SIAMP_GIT_HASH").unwrap_or("unknown").into(),
            files,
        }
    }
}

/// Serializes rows as CSV bytes (header only when `rows` is empty).
pub fn to_csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub const RESULT_HEADER: [&str; 12] = [
    "trial", "block", "scheme", "si_mode", "L", "M", "gate", "p_fa", "p_md", "nmse", "tau_hat_sq", "diverged",
];
pub const SUMMARY_HEADER: [&str; 10] = ["block", "scheme", "L", "l", "p_fa", "p_md", "nmse", "seed", "n_trials", "n_diverged"];
pub const SE_HEADER: [&str; 4] = ["scheme", "block", "t", "tau_sq"];

/// Parses a per-trial CSV written by [`emit_results`].
pub fn read_result_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// `<stem>.<suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Writes the per-trial CSV, the summary CSV and the manifest. Returns the
/// paths written.
pub fn emit_results(plan: &ExperimentPlan, rows: &[ResultRow], summary: &[SummaryRow], path: &Path) -> Result<Vec<PathBuf>> {
    let summary_path = sibling(path, "summary.csv");
    let manifest_path = sibling(path, "manifest.json");
    write_file(path, &to_csv_bytes(rows, &RESULT_HEADER)?)?;
    write_file(&summary_path, &to_csv_bytes(summary, &SUMMARY_HEADER)?)?;
    let names = [path, summary_path.as_path()]
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let manifest = serde_json::to_vec_pretty(&Manifest::new(plan, names))?;
    write_file(&manifest_path, &manifest)?;
    Ok(vec![path.to_path_buf(), summary_path, manifest_path])
}

/// Writes state-evolution rows and the manifest.
pub fn emit_se(plan: &ExperimentPlan, rows: &[SeRow], path: &Path) -> Result<Vec<PathBuf>> {
    let manifest_path = sibling(path, "manifest.json");
    write_file(path, &to_csv_bytes(rows, &SE_HEADER)?)?;
    let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
    write_file(&manifest_path, &serde_json::to_vec_pretty(&Manifest::new(plan, vec![name]))?)?;
    Ok(vec![path.to_path_buf(), manifest_path])
}

/// Runs a plan end to end and writes its outputs.
pub fn execute(plan: &ExperimentPlan, out: &Path) -> Result<Vec<PathBuf>> {
    plan.validate()?;
    let e = &plan.experiment;
    match plan.mode {
        Mode::SeTrace => emit_se(plan, &se_traces(plan)?, out),
        Mode::SingleRun | Mode::Roc => {
            let records = run_pipeline(plan)?;
            let rows = result_rows(&records, &e.gate_grid, e.gate_units);
            let summary = summarize(&records, &e.gate_grid, e.gate_units, plan.scenario.rng_seed);
            emit_results(plan, &rows, &summary, out)
        }
        Mode::NmseSweep => {
            let mut records = Vec::new();
            for &l in &e.pilot_lengths {
                let sub = ExperimentPlan {
                    scenario: ScenarioConfig {
                        pilot_len: l,
                        ..plan.scenario.clone()
                    },
                    ..plan.clone()
                };
                records.extend(run_pipeline(&sub)?);
            }
            let rows = result_rows(&records, &e.gate_grid, e.gate_units);
            let summary = summarize(&records, &e.gate_grid, e.gate_units, plan.scenario.rng_seed);
            emit_results(plan, &rows, &summary, out)
        }
    }
}

/// Converged estimate of one scheme on a single block; handy for examples.
pub fn estimate_block(
    pilots: &Array2<Complex64>,
    truth: &BlockTruth,
    choice: &DenoiserChoice,
    si: Option<&SideInfo>,
) -> Result<(crate::amp::BlockEstimate, SideInfo)> {
    run_block(pilots, &truth.received, si, choice, &AmpOptions::default(), truth.block_index)
}

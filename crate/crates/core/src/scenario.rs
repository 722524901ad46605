//! Physical simulation: pilots, Markov device activity, path-loss Rayleigh
//! channels and the received signal `Y = S X + Z` over consecutive coherence
//! blocks.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{complex_normal, substream, Stream};

/// Devices closer than this are pushed out to it; the log-distance model
/// diverges at zero range.
pub const MIN_DISTANCE_M: f64 = 10.0;

/// Markov-chain activity parameters.
///
/// `lambda` is the stationary activity probability, `alpha = P(1 | 1)` and
/// `beta = P(1 | 0)`. Stationarity ties them by `alpha lambda + beta (1 - lambda) = lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ActivityModel {
    /// Builds the stationary chain from `lambda` and `alpha`.
    pub fn stationary(lambda: f64, alpha: f64) -> Result<Self> {
        let beta = derive_beta(lambda, alpha)?;
        Ok(Self { lambda, alpha, beta })
    }

    /// Independent activity across blocks (`alpha = beta = lambda`).
    pub fn independent(lambda: f64) -> Self {
        Self {
            lambda,
            alpha: lambda,
            beta: lambda,
        }
    }

    /// Joint probabilities of `(previous, current)` activity:
    /// `[P(1,1), P(1,0), P(0,1), P(0,0)]`.
    pub fn joint_cases(&self) -> [f64; 4] {
        let Self { lambda, alpha, beta } = *self;
        [
            alpha * lambda,
            (1.0 - alpha) * lambda,
            beta * (1.0 - lambda),
            (1.0 - beta) * (1.0 - lambda),
        ]
    }
}

/// `beta = lambda (1 - alpha) / (1 - lambda)`, the transition probability that
/// keeps the activity chain stationary at `lambda`.
pub fn derive_beta(lambda: f64, alpha: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::config(format!("activity_prob must lie in (0, 1), got {lambda}")));
    }
    if !(alpha < 1.0) {
        return Err(Error::config(format!("persist_prob must be below 1, got {alpha}")));
    }
    if alpha < lambda {
        return Err(Error::config(format!(
            "persist_prob {alpha} below activity_prob {lambda} would give beta > lambda"
        )));
    }
    Ok(lambda * (1.0 - alpha) / (1.0 - lambda))
}

/// Large-scale channel model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// Devices uniform over the cell disk, log-distance path loss.
    #[default]
    RayleighPathloss,
    /// Every device has unit path gain.
    UnitRayleigh,
    /// Every device sits at the given radius in meters.
    PointMassRadius(f64),
}

/// All physical and statistical parameters of one simulated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_devices: usize,
    pub n_antennas: usize,
    pub pilot_len: usize,
    pub n_blocks: usize,
    pub activity_prob: f64,
    pub persist_prob: f64,
    pub cell_radius_m: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub channel_model: ChannelModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_devices: 500,
            n_antennas: 1,
            pilot_len: 125,
            n_blocks: 10,
            activity_prob: 0.1,
            persist_prob: 0.55,
            cell_radius_m: 500.0,
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -169.0,
            bandwidth_hz: 10e6,
            rng_seed: 1,
            channel_model: ChannelModel::RayleighPathloss,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_devices", self.n_devices),
            ("n_antennas", self.n_antennas),
            ("pilot_len", self.pilot_len),
            ("n_blocks", self.n_blocks),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        derive_beta(self.activity_prob, self.persist_prob)?;
        if !(self.cell_radius_m > MIN_DISTANCE_M) {
            return Err(Error::config(format!(
                "cell_radius_m must exceed {MIN_DISTANCE_M} m, got {}",
                self.cell_radius_m
            )));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth_hz must be positive"));
        }
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if let ChannelModel::PointMassRadius(r) = self.channel_model {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config(format!("point-mass radius must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn activity(&self) -> Result<ActivityModel> {
        ActivityModel::stationary(self.activity_prob, self.persist_prob)
    }

    pub fn noise_variance(&self) -> f64 {
        noise_variance(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Noise variance normalized by the transmit power:
/// `10^((psd + 10 log10(bandwidth) - tx_power) / 10)`.
pub fn noise_variance(config: &ScenarioConfig) -> f64 {
    let noise_dbm = config.noise_psd_dbm_hz + 10.0 * config.bandwidth_hz.log10();
    10f64.powf((noise_dbm - config.tx_power_dbm) / 10.0)
}

/// Path loss in dB at a distance given in kilometers.
pub fn path_loss_db(distance_km: f64) -> f64 {
    -128.1 - 36.7 * distance_km.log10()
}

/// Distance and linear large-scale gain of one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevicePathloss {
    pub distance_km: f64,
    pub gamma: f64,
}

impl DevicePathloss {
    pub fn at_distance_m(distance_m: f64) -> Self {
        let distance_km = distance_m / 1000.0;
        Self {
            distance_km,
            gamma: 10f64.powf(path_loss_db(distance_km) / 10.0),
        }
    }
}

/// Places the devices according to the configured channel model.
pub fn place_devices<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<DevicePathloss> {
    let n = config.n_devices;
    match config.channel_model {
        ChannelModel::RayleighPathloss => {
            let r_min2 = MIN_DISTANCE_M * MIN_DISTANCE_M;
            let r_max2 = config.cell_radius_m * config.cell_radius_m;
            (0..n)
                .map(|_| {
                    // Uniform over the annulus: density proportional to d.
                    let u: f64 = rng.gen();
                    DevicePathloss::at_distance_m((r_min2 + u * (r_max2 - r_min2)).sqrt())
                })
                .collect()
        }
        ChannelModel::UnitRayleigh => vec![
            DevicePathloss {
                distance_km: f64::NAN,
                gamma: 1.0,
            };
            n
        ],
        ChannelModel::PointMassRadius(r) => vec![DevicePathloss::at_distance_m(r); n],
    }
}

/// Pilot matrix `S` (L x N) with i.i.d. `CN(0, 1/L)` entries.
pub fn generate_pilots(pilot_len: usize, n_devices: usize, seed: u64) -> Array2<Complex64> {
    let mut rng = substream(seed, Stream::Pilots, 0, 0);
    pilots_from_rng(pilot_len, n_devices, &mut rng)
}

fn pilots_from_rng<R: Rng + ?Sized>(pilot_len: usize, n_devices: usize, rng: &mut R) -> Array2<Complex64> {
    let variance = 1.0 / pilot_len as f64;
    Array2::from_shape_simple_fn((pilot_len, n_devices), || complex_normal(rng, variance))
}

/// Advances every device's activity by one step of the Markov chain. With no
/// previous state, draws i.i.d. `Bernoulli(lambda)` (the stationary law).
pub fn step_activity<R: Rng + ?Sized>(
    prev: Option<&[bool]>,
    n_devices: usize,
    model: &ActivityModel,
    rng: &mut R,
) -> Vec<bool> {
    match prev {
        None => (0..n_devices).map(|_| rng.gen::<f64>() < model.lambda).collect(),
        Some(prev) => prev
            .iter()
            .map(|&was_active| {
                let p = if was_active { model.alpha } else { model.beta };
                rng.gen::<f64>() < p
            })
            .collect(),
    }
}

/// Ground truth of one coherence block.
#[derive(Debug, Clone)]
pub struct BlockTruth {
    /// Pilot matrix `S`, shared across the blocks of a trial.
    pub pilots: Arc<Array2<Complex64>>,
    pub activity: Vec<bool>,
    /// Raw channels `h_n` as rows (N x M), redrawn every block.
    pub channels: Array2<Complex64>,
    /// Effective channels `x_n = delta_n h_n` as rows (N x M).
    pub effective: Array2<Complex64>,
    /// Received signal `Y = S X + Z` (L x M).
    pub received: Array2<Complex64>,
    /// One-based coherence-block index.
    pub block_index: usize,
}

impl BlockTruth {
    pub fn n_active(&self) -> usize {
        self.activity.iter().filter(|&&a| a).count()
    }

    /// Writes the block as CSV with columns `matrix,row,col,re,im`.
    ///
    /// `matrix` is one of `activity` (re holds 0/1), `effective` or `received`.
    /// Pilots are omitted; they are reproducible from the seed.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["matrix", "row", "col", "re", "im"])?;
        for (n, &a) in self.activity.iter().enumerate() {
            w.serialize(("activity", n, 0, u8::from(a) as f64, 0.0))?;
        }
        for (name, mat) in [("effective", &self.effective), ("received", &self.received)] {
            for ((r, c), z) in mat.indexed_iter() {
                w.serialize((name, r, c, z.re, z.im))?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Draws one block: fresh `CN(0, gamma_n I)` channels, activity from the chain,
/// and the noisy received signal.
pub fn sample_block<R: Rng + ?Sized>(
    pilots: &Arc<Array2<Complex64>>,
    gains: &[f64],
    model: &ActivityModel,
    n_antennas: usize,
    noise_variance: f64,
    prev_activity: Option<&[bool]>,
    block_index: usize,
    activity_rng: &mut R,
    channel_rng: &mut R,
    noise_rng: &mut R,
) -> BlockTruth {
    let n_devices = gains.len();
    let activity = step_activity(prev_activity, n_devices, model, activity_rng);
    let mut channels = Array2::zeros((n_devices, n_antennas));
    for (n, mut row) in channels.rows_mut().into_iter().enumerate() {
        for z in row.iter_mut() {
            *z = complex_normal(channel_rng, gains[n]);
        }
    }
    let mut effective = channels.clone();
    for (mut row, &a) in effective.rows_mut().into_iter().zip(&activity) {
        if !a {
            row.fill(Complex64::new(0.0, 0.0));
        }
    }
    let mut received = pilots.dot(&effective);
    if noise_variance > 0.0 {
        received.mapv_inplace(|y| y + complex_normal(noise_rng, noise_variance));
    }
    BlockTruth {
        pilots: Arc::clone(pilots),
        activity,
        channels,
        effective,
        received,
        block_index,
    }
}

/// One Monte Carlo realization: geometry, pilots and the J block truths.
#[derive(Debug, Clone)]
pub struct Trial {
    pub index: u64,
    pub devices: Vec<DevicePathloss>,
    pub pilots: Arc<Array2<Complex64>>,
    pub blocks: Vec<BlockTruth>,
    pub noise_variance: f64,
}

impl Trial {
    pub fn gains(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.gamma).collect()
    }
}

/// Generates trial `trial` of a scenario from labeled substreams of `config.rng_seed`.
pub fn generate_trial(config: &ScenarioConfig, trial: u64) -> Result<Trial> {
    config.validate()?;
    let model = config.activity()?;
    let seed = config.rng_seed;
    let devices = place_devices(config, &mut substream(seed, Stream::Placement, trial, 0));
    let gains: Vec<f64> = devices.iter().map(|d| d.gamma).collect();
    let pilots = Arc::new(pilots_from_rng(
        config.pilot_len,
        config.n_devices,
        &mut substream(seed, Stream::Pilots, trial, 0),
    ));
    let sigma2 = noise_variance(config);
    let mut blocks: Vec<BlockTruth> = Vec::with_capacity(config.n_blocks);
    for j in 1..=config.n_blocks {
        let b = j as u64;
        let prev = blocks.last().map(|t| t.activity.as_slice());
        let truth = sample_block(
            &pilots,
            &gains,
            &model,
            config.n_antennas,
            sigma2,
            prev,
            j,
            &mut substream(seed, Stream::Activity, trial, b),
            &mut substream(seed, Stream::Channels, trial, b),
            &mut substream(seed, Stream::Noise, trial, b),
        );
        blocks.push(truth);
    }
    Ok(Trial {
        index: trial,
        devices,
        pilots,
        blocks,
        noise_variance: sigma2,
    })
}

/// Column squared norms `||s_n||^2`.
pub fn column_energies(pilots: &Array2<Complex64>) -> Array1<f64> {
    pilots.map_axis(ndarray::Axis(0), |col| col.iter().map(|z| z.norm_sqr()).sum())
}

//! Gate detection on the converged pseudo-data, error rates, ROC sweeps and NMSE.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub statistics: Vec<f64>,
    pub detected: Vec<bool>,
    pub gate: f64,
}

/// Row norms of `x_hat + S^H R`.
pub fn detection_statistics(
    x_hat: &Array2<Complex64>,
    residual: &Array2<Complex64>,
    pilots: &Array2<Complex64>,
) -> Result<Vec<f64>> {
    if pilots.ncols() != x_hat.nrows() || pilots.nrows() != residual.nrows() || x_hat.ncols() != residual.ncols() {
        return Err(Error::Dimension("detection inputs disagree in shape".into()));
    }
    let pseudo = x_hat + &pilots.t().mapv(|z| z.conj()).dot(residual);
    Ok(pseudo
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect())
}

/// Declares a device active when its statistic strictly exceeds `gate`.
pub fn detect(
    x_hat: &Array2<Complex64>,
    residual: &Array2<Complex64>,
    pilots: &Array2<Complex64>,
    gate: f64,
) -> Result<DetectionResult> {
    Ok(detect_statistics(detection_statistics(x_hat, residual, pilots)?, gate))
}

pub fn detect_statistics(statistics: Vec<f64>, gate: f64) -> DetectionResult {
    let detected = statistics.iter().map(|&s| s > gate).collect();
    DetectionResult {
        statistics,
        detected,
        gate,
    }
}

/// Error rates; `None` when the denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub false_alarms: usize,
    pub inactive: usize,
    pub misses: usize,
    pub active: usize,
}

impl Confusion {
    pub fn p_fa(&self) -> Option<f64> {
        (self.inactive > 0).then(|| self.false_alarms as f64 / self.inactive as f64)
    }

    pub fn p_md(&self) -> Option<f64> {
        (self.active > 0).then(|| self.misses as f64 / self.active as f64)
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.false_alarms += other.false_alarms;
        self.inactive += other.inactive;
        self.misses += other.misses;
        self.active += other.active;
    }
}

pub fn confusion(detected: &[bool], truth: &[bool]) -> Result<Confusion> {
    if detected.len() != truth.len() {
        return Err(Error::Dimension(format!("{} decisions for {} devices", detected.len(), truth.len())));
    }
    let mut c = Confusion {
        false_alarms: 0,
        inactive: 0,
        misses: 0,
        active: 0,
    };
    for (&d, &t) in detected.iter().zip(truth) {
        if t {
            c.active += 1;
            c.misses += usize::from(!d);
        } else {
            c.inactive += 1;
            c.false_alarms += usize::from(d);
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub gate: f64,
    pub p_fa: f64,
    pub p_md: f64,
}

/// Error rates at every gate of an ascending grid.
pub fn roc_sweep(statistics: &[f64], truth: &[bool], grid: &[f64]) -> Result<Vec<RocPoint>> {
    if grid.is_empty() {
        return Err(Error::domain("ROC gate grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::domain("ROC gate grid must be ascending"));
    }
    if statistics.len() != truth.len() {
        return Err(Error::Dimension("statistics and truth differ in length".into()));
    }
    let mut inactive: Vec<f64> = statistics.iter().zip(truth).filter(|(_, t)| !**t).map(|(s, _)| *s).collect();
    let mut active: Vec<f64> = statistics.iter().zip(truth).filter(|(_, t)| **t).map(|(s, _)| *s).collect();
    inactive.sort_by(f64::total_cmp);
    active.sort_by(f64::total_cmp);
    let at_or_below = |v: &[f64], g: f64| v.partition_point(|&s| s <= g);
    Ok(grid
        .iter()
        .map(|&g| RocPoint {
            gate: g,
            p_fa: rate(inactive.len() - at_or_below(&inactive, g), inactive.len()),
            p_md: rate(at_or_below(&active, g), active.len()),
        })
        .collect())
}

fn rate(k: usize, n: usize) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        k as f64 / n as f64
    }
}

/// Missed-detection rate at the gate whose false-alarm rate on `inactive` is
/// the largest value not above `target_p_fa`. Returns `(gate, p_fa, p_md)`.
pub fn pmd_at_pfa(inactive: &[f64], active: &[f64], target_p_fa: f64) -> Result<(f64, f64, f64)> {
    if inactive.is_empty() || active.is_empty() {
        return Err(Error::domain("need both active and inactive statistics"));
    }
    if !(0.0..=1.0).contains(&target_p_fa) {
        return Err(Error::domain(format!("target false-alarm rate {target_p_fa} outside [0, 1]")));
    }
    let mut inact = inactive.to_vec();
    inact.sort_by(|a, b| b.total_cmp(a));
    let allowed = (target_p_fa * inact.len() as f64).floor() as usize;
    // Gate at the (allowed+1)-th largest value: at most `allowed` lie strictly above.
    let gate = inact[allowed.min(inact.len() - 1)];
    let fa = inact.iter().filter(|&&s| s > gate).count();
    let md = active.iter().filter(|&&s| s <= gate).count();
    Ok((gate, fa as f64 / inact.len() as f64, md as f64 / active.len() as f64))
}

/// Running sums for the normalized MSE over trials.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NmseAccumulator {
    pub error: f64,
    pub energy: f64,
}

impl NmseAccumulator {
    pub fn add(&mut self, estimate: &Array2<Complex64>, truth: &Array2<Complex64>) -> Result<()> {
        if estimate.dim() != truth.dim() {
            return Err(Error::Dimension("estimate and truth differ in shape".into()));
        }
        for (e, t) in estimate.iter().zip(truth.iter()) {
            self.error += (e - t).norm_sqr();
            self.energy += t.norm_sqr();
        }
        Ok(())
    }

    pub fn value(&self) -> Result<f64> {
        if self.energy == 0.0 {
            return Err(Error::domain("NMSE undefined: every truth is zero"));
        }
        Ok(self.error / self.energy)
    }
}

/// `sum ||X_hat - X||^2 / sum ||X||^2` over trials.
pub fn nmse(estimates: &[Array2<Complex64>], truths: &[Array2<Complex64>]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::Dimension("different numbers of estimates and truths".into()));
    }
    let mut acc = NmseAccumulator::default();
    for (e, t) in estimates.iter().zip(truths) {
        acc.add(e, t)?;
    }
    acc.value()
}

/// Per-block summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMetrics {
    pub block_index: usize,
    pub p_fa: f64,
    pub p_md: f64,
    pub nmse: f64,
}

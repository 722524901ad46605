// One coherence block of MMV-AMP with the MMSE denoiser.

use std::sync::Arc;

use siamp::amp::{run_block, AmpOptions, DenoiserChoice};
use siamp::metrics::{confusion, nmse};
use siamp::scenario::{generate_trial, ScenarioConfig};

fn main() -> siamp::Result<()> {
    let cfg = ScenarioConfig {
        n_devices: 400,
        pilot_len: 100,
        n_antennas: 2,
        n_blocks: 1,
        ..ScenarioConfig::default()
    };
    let trial = generate_trial(&cfg, 3)?;
    let truth = &trial.blocks[0];
    let choice = DenoiserChoice::MmseNoSi {
        lambda: cfg.activity_prob,
        gains: Arc::from(trial.gains()),
    };
    let (est, _) = run_block(&trial.pilots, &truth.received, None, &choice, &AmpOptions::default(), 1)?;
    let trace: Vec<String> = est.tau_trace.iter().take(8).map(|t| format!("{:.3e}", t)).collect();
    println!("tau_hat^2: {} ...", trace.join(" "));
    println!("{} iterations, converged {}", est.iterations, est.converged);
    println!("NMSE {:.2} dB", 10.0 * nmse(std::slice::from_ref(&est.x_hat), std::slice::from_ref(&truth.effective))?.log10());

    let gate = 2.0 * est.tau_hat_sq.sqrt();
    let detected: Vec<bool> = est.statistics.iter().map(|&s| s > gate).collect();
    let c = confusion(&detected, &truth.activity)?;
    println!("gate 2 tau: P_FA {:.3}, P_MD {:.3}", c.p_fa().unwrap_or(f64::NAN), c.p_md().unwrap_or(f64::NAN));
    Ok(())
}

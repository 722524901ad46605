// State evolution next to the empirical AMP state on one instance.

use std::sync::Arc;

use siamp::amp::{run_block, AmpOptions, DenoiserChoice};
use siamp::rng::{substream, Stream};
use siamp::scenario::{generate_trial, ScenarioConfig};
use siamp::state_evolution::{run_se_fixed, SeConditioning, SeConfig, SeSideInfo};

fn main() -> siamp::Result<()> {
    let cfg = ScenarioConfig {
        n_devices: 600,
        pilot_len: 180,
        n_antennas: 1,
        n_blocks: 1,
        ..ScenarioConfig::default()
    };
    let trial = generate_trial(&cfg, 0)?;
    let truth = &trial.blocks[0];
    let gains: Arc<[f64]> = trial.gains().into();
    let choice = DenoiserChoice::MmseNoSi {
        lambda: cfg.activity_prob,
        gains: Arc::clone(&gains),
    };
    let opts = AmpOptions {
        max_iter: 8,
        tol: 0.0,
        ..AmpOptions::default()
    };
    let (est, _) = run_block(&trial.pilots, &truth.received, None, &choice, &opts, 1)?;

    let se = SeConfig {
        pilot_len: cfg.pilot_len,
        n_antennas: cfg.n_antennas,
        noise_var: trial.noise_variance,
        gains,
        activity: cfg.activity()?,
        choice,
        si: SeSideInfo::None,
        mc_samples: 20 * cfg.n_devices,
        conditioning: SeConditioning::Realized {
            current: truth.effective.clone(),
            previous: None,
        },
    };
    let mut rng = substream(cfg.rng_seed, Stream::StateEvolution, 0, 0);
    let series = run_se_fixed(se.initial_tau_sq(), 8, &se, &mut rng)?;
    println!(" t   tau_amp^2   tau_se^2");
    for (t, (a, s)) in est.tau_trace.iter().zip(&series).enumerate() {
        println!("{t:>2}   {a:.3e}   {s:.3e}");
    }
    Ok(())
}

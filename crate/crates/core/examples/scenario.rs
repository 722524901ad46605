// Draws one trial of the grant-free access scenario and summarizes it.

use siamp::scenario::{generate_trial, noise_variance, path_loss_db, ScenarioConfig};

fn main() -> siamp::Result<()> {
    let cfg = ScenarioConfig {
        n_devices: 200,
        pilot_len: 60,
        n_antennas: 2,
        n_blocks: 5,
        ..ScenarioConfig::default()
    };
    let sigma2 = noise_variance(&cfg);
    println!("noise variance {sigma2:.4e}, path loss at 500 m {:.2} dB", path_loss_db(0.5));

    let trial = generate_trial(&cfg, 0)?;
    let gains = trial.gains();
    let (lo, hi) = gains.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &g| (a.min(g), b.max(g)));
    println!("large-scale SNR spans {:.1} to {:.1} dB", 10.0 * (lo / sigma2).log10(), 10.0 * (hi / sigma2).log10());
    for b in &trial.blocks {
        let stayed = if b.block_index > 1 {
            let prev = &trial.blocks[b.block_index - 2].activity;
            prev.iter().zip(&b.activity).filter(|(p, c)| **p && **c).count()
        } else {
            0
        };
        println!("block {}: {} active, {} still active from the previous block", b.block_index, b.n_active(), stayed);
    }
    Ok(())
}

// Binary soft thresholds from the minimax conditions, checked against a grid search.

use siamp::denoiser::soft::{minimax_mse, no_si_threshold, solve_thresholds, MinimaxContext};
use siamp::harness::exhaustive_threshold_oracle;

fn main() -> siamp::Result<()> {
    let tau = 2e-6;
    let ctx = MinimaxContext::with_varsigma(1, tau, 0.1, 0.91, 0.01, 0.0)?;
    let roots = solve_thresholds(&ctx)?;
    let grid = exhaustive_threshold_oracle(&ctx, 1e-3)?;
    println!("theta_1 = {:.4} tau, theta_2 = {:.4} tau", roots.theta_active / tau, roots.theta_inactive / tau);
    println!("grid    = {:.4} tau,          {:.4} tau", grid.theta_active / tau, grid.theta_inactive / tau);

    let with_si = minimax_mse(roots.theta_active, roots.theta_inactive, &ctx)?.total;
    let single = no_si_threshold(1, tau, 0.1)?;
    let without = minimax_mse(single, single, &ctx)?.total;
    println!("worst-case MSE: {:.4} tau^2 with SI, {:.4} tau^2 with one threshold", with_si / (tau * tau), without / (tau * tau));

    // A noisier previous block makes the SI less trustworthy.
    for varsigma in [0.0, 0.05, 0.2] {
        let c = MinimaxContext::with_varsigma(1, tau, 0.1, 0.91, 0.01, varsigma)?;
        let t = solve_thresholds(&c)?;
        println!("varsigma {varsigma:.2}: theta_1 {:.3} tau, theta_2 {:.3} tau", t.theta_active / tau, t.theta_inactive / tau);
    }
    Ok(())
}

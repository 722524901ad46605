// Posterior mean of one device row with and without side information.

use ndarray::array;
use num_complex::Complex64;
use siamp::denoiser::mmse::{no_si_mmse_denoise, posterior_stats_general, si_mmse_denoise, MmsePrior};

fn main() -> siamp::Result<()> {
    let prior = MmsePrior {
        gamma: 1e-12,
        lambda: 0.1,
        alpha: 0.55,
        beta: 0.05,
        tau_sq: 5e-13,
        tau_prev_sq: 4e-13,
    };
    prior.validate()?;
    let x = array![Complex64::new(6e-7, 2e-7), Complex64::new(-4e-7, 5e-7)];
    let loud = array![Complex64::new(1.1e-6, 0.0), Complex64::new(0.0, -9e-7)];
    let quiet = array![Complex64::new(2e-7, 1e-7), Complex64::new(-1e-7, 0.0)];

    let gain = |v: &ndarray::Array1<Complex64>| (v[0] / x[0]).re;
    println!("shrink gain without SI:   {:.4}", gain(&no_si_mmse_denoise(x.view(), &prior)));
    println!("shrink gain, strong SI:   {:.4}", gain(&si_mmse_denoise(x.view(), loud.view(), &prior)));
    println!("shrink gain, weak SI:     {:.4}", gain(&si_mmse_denoise(x.view(), quiet.view(), &prior)));

    let eye = |v: f64| ndarray::Array2::from_diag_elem(2, Complex64::new(v, 0.0));
    let post = posterior_stats_general(x.view(), loud.view(), &prior, eye(prior.tau_sq).view(), eye(prior.tau_prev_sq).view())?;
    println!("posterior activity probability {:.4}", post.phi);
    Ok(())
}

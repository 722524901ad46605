// Incomplete gamma function and complex Gaussian log-densities.

use num_complex::Complex64;
use siamp::special::{log_gaussian_density, log_sum_exp, regularized_upper_gamma, upper_incomplete_gamma};

fn main() -> siamp::Result<()> {
    // Probability that the norm of an M-antenna noise row exceeds l = 2 tau.
    for m in 1..=4 {
        let q = regularized_upper_gamma(m as f64, 4.0)?;
        println!("M={m}: P(||tau V|| > 2 tau) = {q:.6}  Gamma(M, 4) = {:.6}", upper_incomplete_gamma(m as f64, 4.0)?);
    }

    let x = [Complex64::new(5e-7, -3e-7), Complex64::new(1e-7, 8e-7)];
    let noise = log_gaussian_density(&x, 2e-13)?;
    let slab = log_gaussian_density(&x, 2e-13 + 1e-12)?;
    println!("log p(x | inactive) = {noise:.4}, log p(x | active) = {slab:.4}");
    println!("log of the 50/50 mixture = {:.4}", log_sum_exp(&[noise + 0.5f64.ln(), slab + 0.5f64.ln()])?);
    Ok(())
}

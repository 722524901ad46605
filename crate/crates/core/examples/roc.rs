// ROC points from detection statistics.

use siamp::metrics::{pmd_at_pfa, roc_sweep};

fn main() -> siamp::Result<()> {
    // Normalized statistics: inactive rows follow ||V||, active rows sit higher.
    let inactive: Vec<f64> = (0..400).map(|i| ((i as f64 + 0.5) / 400.0 * 9.0).sqrt() * 0.6).collect();
    let active: Vec<f64> = (0..40).map(|i| 1.2 + i as f64 * 0.08).collect();
    let stats: Vec<f64> = inactive.iter().chain(&active).copied().collect();
    let truth: Vec<bool> = (0..stats.len()).map(|i| i >= inactive.len()).collect();

    let grid: Vec<f64> = (0..=8).map(|k| 0.5 + 0.25 * k as f64).collect();
    for p in roc_sweep(&stats, &truth, &grid)? {
        println!("gate {:.2}: P_FA {:.3}  P_MD {:.3}", p.gate, p.p_fa, p.p_md);
    }
    let (gate, fa, md) = pmd_at_pfa(&inactive, &active, 0.1)?;
    println!("at P_FA <= 0.1: gate {gate:.3}, P_FA {fa:.3}, P_MD {md:.3}");
    Ok(())
}

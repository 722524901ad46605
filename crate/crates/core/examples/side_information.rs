// Carries side information across blocks and compares it with the no-SI run.

use siamp::harness::{pooled_pmd_at_pfa, run_pipeline, ExperimentPlan, ExperimentSettings, Family, Mode, Scheme, SiMode};
use siamp::scenario::ScenarioConfig;

fn main() -> siamp::Result<()> {
    let schemes = [SiMode::PerfectSi, SiMode::EstimatedSi, SiMode::NoSi].map(|s| Scheme::new(Family::Mmse, s));
    let plan = ExperimentPlan::new(
        ScenarioConfig {
            n_devices: 300,
            pilot_len: 50,
            n_antennas: 2,
            n_blocks: 4,
            ..ScenarioConfig::default()
        },
        ExperimentSettings {
            schemes: schemes.to_vec(),
            n_trials: 4,
            ..ExperimentSettings::default()
        },
        Mode::SingleRun,
    );
    let records = run_pipeline(&plan)?;
    println!("block  {}", schemes.map(|s| format!("{:>13}", s.name())).join(""));
    for block in 1..=plan.scenario.n_blocks {
        let mut line = format!("{block:>5}  ");
        for s in schemes {
            let recs: Vec<_> = records.iter().filter(|r| r.block == block && r.scheme == s).collect();
            let (_, pmd) = pooled_pmd_at_pfa(&recs, 0.1)?;
            line.push_str(&format!("{pmd:>13.3}"));
        }
        println!("{line}");
    }
    println!("(P_MD at pooled P_FA = 0.1)");
    Ok(())
}

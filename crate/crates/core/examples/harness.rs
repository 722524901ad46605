// Runs a small experiment plan and writes its CSV, summary and manifest.

use siamp::harness::{execute, ExperimentPlan, ExperimentSettings, Mode, Scheme};
use siamp::scenario::ScenarioConfig;

fn main() -> siamp::Result<()> {
    let plan = ExperimentPlan::new(
        ScenarioConfig {
            n_devices: 120,
            pilot_len: 40,
            n_antennas: 2,
            n_blocks: 3,
            ..ScenarioConfig::default()
        },
        ExperimentSettings {
            schemes: vec!["soft_si".parse::<Scheme>()?, "soft_no_si".parse()?],
            gate_grid: vec![1.5, 2.0, 2.5],
            n_trials: 3,
            ..ExperimentSettings::default()
        },
        Mode::Roc,
    );
    let dir = std::env::temp_dir().join("siamp-harness-example");
    for path in execute(&plan, &dir.join("roc.csv"))? {
        let text = std::fs::read_to_string(&path).map_err(|e| siamp::Error::Io { path: path.clone(), source: e })?;
        println!("{} ({} lines)", path.display(), text.lines().count());
    }
    Ok(())
}

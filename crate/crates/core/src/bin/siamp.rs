use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use siamp::harness::{execute, load_run_config_file, ExperimentPlan, ExperimentSettings, Mode, Scheme};
use siamp::scenario::ScenarioConfig;

#[derive(Parser)]
#[command(name = "siamp", version, about = "Activity detection and channel estimation with side-information aided AMP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run over the configured blocks and trials.
    Simulate(Common),
    /// Error rates over the configured gate grid.
    Roc(Common),
    /// NMSE versus pilot length.
    NmseSweep {
        #[command(flatten)]
        common: Common,
        /// Pilot lengths; overrides `experiment.pilot_lengths`.
        #[arg(long, value_delimiter = ',')]
        pilot_lengths: Vec<usize>,
    },
    /// State-evolution trajectories.
    SeTrace(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file with scenario keys and an optional [experiment] table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV; the summary and manifest are written next to it.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Restrict to these schemes (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
}

fn plan(common: &Common, mode: Mode) -> siamp::Result<ExperimentPlan> {
    let (mut scenario, mut experiment) = match &common.config {
        Some(p) => load_run_config_file(p)?,
        None => (ScenarioConfig::default(), ExperimentSettings::default()),
    };
    if let Some(s) = common.seed {
        scenario.rng_seed = s;
    }
    if let Some(t) = common.trials {
        experiment.n_trials = t;
    }
    if !common.scheme.is_empty() {
        experiment.schemes = common.scheme.clone();
    }
    let mut plan = ExperimentPlan::new(scenario, experiment, mode);
    plan.output_path = Some(common.out.clone());
    Ok(plan)
}

fn run(cli: Cli) -> siamp::Result<()> {
    let (common, plan) = match &cli.command {
        Command::Simulate(c) => (c, plan(c, Mode::SingleRun)?),
        Command::Roc(c) => (c, plan(c, Mode::Roc)?),
        Command::SeTrace(c) => (c, plan(c, Mode::SeTrace)?),
        Command::NmseSweep { common, pilot_lengths } => {
            let mut p = plan(common, Mode::NmseSweep)?;
            if !pilot_lengths.is_empty() {
                p.experiment.pilot_lengths = pilot_lengths.clone();
            }
            (common, p)
        }
    };
    for path in execute(&plan, &common.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

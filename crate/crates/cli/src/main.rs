use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agilesim::harness::{self, output_dir, HarnessError, LoadedConfig};
use clap::{Args, Parser, Subcommand};

/// Agile constellation flood-monitoring simulator.
#[derive(Parser)]
#[command(name = "agilesim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to a subdirectory of $AGILESIM_OUT_ROOT (or ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write truth, initial estimate and value fields for a config's scenario.
    GenerateScenario {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Execute one onboard or ground run and score it.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run two or more configs on one scenario and tabulate them.
    Compare {
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Predictor error over a grid of hypothetical observation schedules.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<LoadedConfig, HarnessError> {
    let mut cfg = harness::load_config(path)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::GenerateScenario { config, common } => {
            let cfg = load(&config, common.seed)?;
            let out = output_dir(common.out.as_deref(), &format!("{}-scenario", cfg.label()));
            let m = harness::generate_scenario(&cfg, &out)?;
            println!(
                "scenario {} ({} grid points, {} watersheds, {} slots) -> {}",
                m.scenario_hash,
                m.n_gp,
                m.n_watersheds,
                m.n_slots,
                out.display()
            );
        }
        Command::Run { config, common } => {
            let cfg = load(&config, common.seed)?;
            let out = output_dir(common.out.as_deref(), &cfg.label());
            let r = harness::run(&cfg, &out)?;
            let m = &r.metrics;
            println!(
                "{}: total {:.3}, {} observations ({} unique), per observation {:.4}, max runtime {:.3} s -> {}",
                m.label,
                m.total_flood,
                m.n_observations,
                m.n_unique,
                m.per_observation,
                m.max_runtime_s,
                out.display()
            );
            if let Some(l) = &m.latency {
                if let (Some(lat), Some(gap)) = (l.median_latency_s, l.median_gap_s) {
                    println!("median bundle latency {lat:.1} s, median access gap {gap:.1} s");
                }
            }
        }
        Command::Compare { config, common } => {
            let cfgs = config.iter().map(|p| load(p, common.seed)).collect::<Result<Vec<_>, _>>()?;
            let out = output_dir(common.out.as_deref(), "compare");
            let c = harness::compare(&cfgs, &out)?;
            print!("{}", c.summary);
            println!("-> {}", out.display());
        }
        Command::Evaluate { config, common } => {
            let cfg = load(&config, common.seed)?;
            let out = output_dir(common.out.as_deref(), &format!("{}-eval", cfg.label()));
            let r = harness::evaluate(&cfg, &out)?;
            println!("baseline error {:.4}", r.curve.baseline);
            for c in &r.curve.cells {
                println!("n_updates {} frequency {} error {:.4}", c.n_updates, c.frequency, c.error);
            }
            if r.increases.is_empty() {
                println!("error is non-increasing in both axes within {:.0}%", 100.0 * r.tolerance);
            } else {
                for i in &r.increases {
                    println!("{i}");
                }
            }
            println!("-> {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use satsim::planner::{joint_plan, write_plans_csv};
use satsim::sim::Simulation;
use satsim::{list_presets, load_config, run_experiment, RunOptions, ScenarioConfig};

/// Multi-agent search-and-track simulator.
#[derive(Debug, Parser)]
#[command(name = "satsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset experiment and write results.csv, summary.csv and logs.
    Run {
        /// Preset name (see `list-presets`).
        #[arg(long)]
        preset: String,
        /// Monte-Carlo trials per variant.
        #[arg(long)]
        trials: usize,
        /// Base seed; trial t uses seed + t.
        #[arg(long)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Base scenario file; the preset's overrides apply on top.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Skip the per-trial event and ground-truth logs.
        #[arg(long)]
        no_logs: bool,
    },
    /// List the available presets.
    ListPresets,
    /// Write the fused search grid after a number of steps.
    DumpGrid {
        #[command(flatten)]
        snapshot: Snapshot,
        /// Dump this agent's own grid instead of the fused one.
        #[arg(long)]
        agent: Option<usize>,
    },
    /// Write a joint search plan for all agents over the fused grid after a number of steps.
    DumpPlan {
        #[command(flatten)]
        snapshot: Snapshot,
    },
    /// Print the default scenario configuration.
    DefaultConfig,
}

#[derive(Debug, Args)]
struct Snapshot {
    /// Scenario file (defaults are used when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Steps to simulate before taking the snapshot.
    #[arg(long, default_value_t = 0)]
    steps: usize,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
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

fn run(cli: Cli) -> satsim::Result<()> {
    match cli.command {
        Command::Run { preset, trials, seed, out, jobs, config, no_logs } => {
            let base = base_config(config.as_deref())?;
            let opts = RunOptions { trials, seed, out_dir: out.clone(), jobs, write_logs: !no_logs };
            let result = run_experiment(&preset, &base, &opts)?;
            for v in &result.variants {
                let ratio = v
                    .outcome
                    .tracking_ratio
                    .map_or_else(|| "-".to_string(), |(m, s)| format!("{m:.3} ± {s:.3}"));
                println!(
                    "{:<24} searched {:.3}  final ospa {:6.2}  tracking ratio {ratio}",
                    v.id,
                    v.outcome.final_searched(),
                    v.outcome.ospa.last().map_or(f64::NAN, |o| o.0),
                );
            }
            println!("wrote {}", out.display());
        }
        Command::ListPresets => {
            for p in list_presets() {
                println!("{:<8} {}", p.name, p.description);
            }
        }
        Command::DumpGrid { snapshot, agent } => {
            let sim = simulate_until(&snapshot)?;
            let grid = match agent {
                Some(i) => {
                    let a = sim.agents().get(i).ok_or_else(|| satsim::Error::InvalidParameter {
                        name: "agent",
                        reason: format!("scenario has {} agents", sim.agents().len()),
                    })?;
                    a.grid.clone()
                }
                None => sim.fused_grid(),
            };
            grid.write_snapshot_csv(output(snapshot.out.as_deref())?)?;
        }
        Command::DumpPlan { snapshot } => {
            let sim = simulate_until(&snapshot)?;
            let grid = sim.fused_grid();
            let starts: Vec<usize> = sim.agents().iter().map(|a| grid.geometry().cell_of(a.position)).collect();
            let plans = joint_plan(sim.graph(), &grid.unvisited(), &starts)?;
            write_plans_csv(sim.graph(), &plans, output(snapshot.out.as_deref())?)?;
        }
        Command::DefaultConfig => {
            print!("{}", ScenarioConfig::default().to_toml_string()?);
        }
    }
    Ok(())
}

fn base_config(path: Option<&Path>) -> satsim::Result<ScenarioConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn simulate_until(s: &Snapshot) -> satsim::Result<Simulation> {
    let config = base_config(s.config.as_deref())?;
    let mut sim = Simulation::new(&config, s.seed)?;
    for _ in 0..s.steps {
        sim.step()?;
    }
    Ok(sim)
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

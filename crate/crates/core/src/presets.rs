//! Named experiments: sweeps of scenario variants run as seeded Monte-Carlo batches.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{LifetimeLaw, ScenarioConfig, SearchPolicy, SpawnRegion};
use crate::error::{Error, Result};
use crate::metrics::{trial_seed, write_results_rows, write_summary_rows, MonteCarlo, TrialMetrics, RESULTS_HEADER, SUMMARY_HEADER};
use crate::sim::{simulate, write_events_csv, write_truth_csv};

/// A named experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

const PRESETS: [Preset; 6] = [
    Preset {
        name: "fig5",
        description: "search only: 2-5 agents, communication range 10 m vs 50 m",
    },
    Preset {
        name: "fig6",
        description: "search only: cooperative planning vs random baseline, 2 and 4 agents",
    },
    Preset {
        name: "fig7",
        description: "search and track: 10 targets from the centre, 2-5 agents, range 10 m vs 50 m",
    },
    Preset {
        name: "fig8",
        description: "searched area with 10 live targets vs search only, 2-5 agents",
    },
    Preset {
        name: "fig10a",
        description: "tracking-time ratio: 20 short-lived targets, 2-10 agents, range 40 m",
    },
    Preset {
        name: "fig10b",
        description: "overlap detection on vs off: 15 targets, 5 agents, range 20 m",
    },
];

/// All presets, in a stable order.
pub fn list_presets() -> &'static [Preset] {
    &PRESETS
}

/// One configuration of a preset's sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    /// Used as `experiment_id` in the output files.
    pub id: String,
    pub config: ScenarioConfig,
}

fn variant(id: String, config: ScenarioConfig) -> Variant {
    Variant { id, config }
}

fn unknown(name: &str) -> Error {
    let available = PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", ");
    Error::UnknownPreset { name: name.to_string(), available }
}

/// Expands a preset into its sweep, applying its overrides on top of `base`.
pub fn preset_variants(name: &str, base: &ScenarioConfig) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    match name {
        "fig5" => {
            for n in 2..=5 {
                for range in [10.0, 50.0] {
                    let mut c = *base;
                    c.tracking.enabled = false;
                    c.targets.count = 0;
                    c.agents = n;
                    c.comms.range = range;
                    out.push(variant(format!("fig5_n{n}_cr{range}"), c));
                }
            }
        }
        "fig6" => {
            for (policy, tag) in [(SearchPolicy::Planned, "planned"), (SearchPolicy::Random, "random")] {
                for n in [2, 4] {
                    let mut c = *base;
                    c.tracking.enabled = false;
                    c.targets.count = 0;
                    c.search.policy = policy;
                    c.agents = n;
                    out.push(variant(format!("fig6_{tag}_n{n}"), c));
                }
            }
        }
        "fig7" => {
            for n in 2..=5 {
                for range in [10.0, 50.0] {
                    let mut c = *base;
                    c.targets.count = 10;
                    c.targets.spawn = SpawnRegion::Center;
                    c.targets.birth_first = 1;
                    c.targets.birth_last = 1;
                    c.targets.lifetime = LifetimeLaw::Geometric;
                    c.targets.mean_lifetime = 60.0;
                    c.agents = n;
                    c.comms.range = range;
                    out.push(variant(format!("fig7_n{n}_cr{range}"), c));
                }
            }
        }
        "fig8" => {
            for n in 2..=5 {
                for tracking in [true, false] {
                    let mut c = *base;
                    c.targets.count = 10;
                    c.targets.spawn = SpawnRegion::Uniform;
                    c.targets.birth_first = 1;
                    c.targets.birth_last = 1;
                    c.targets.lifetime = LifetimeLaw::Fixed;
                    c.targets.mean_lifetime = c.horizon as f64 + 1.0;
                    c.tracking.enabled = tracking;
                    c.agents = n;
                    let tag = if tracking { "sat" } else { "search" };
                    out.push(variant(format!("fig8_{tag}_n{n}"), c));
                }
            }
        }
        "fig10a" => {
            for n in [2, 4, 6, 8, 10] {
                let mut c = short_lived(base, 20);
                c.comms.range = 40.0;
                c.agents = n;
                out.push(variant(format!("fig10a_n{n}"), c));
            }
        }
        "fig10b" => {
            for overlap in [true, false] {
                let mut c = short_lived(base, 15);
                c.comms.range = 20.0;
                c.agents = 5;
                c.overlap.enabled = overlap;
                let tag = if overlap { "on" } else { "off" };
                out.push(variant(format!("fig10b_tod_{tag}"), c));
            }
        }
        _ => return Err(unknown(name)),
    }
    for v in &out {
        v.config.validate()?;
    }
    Ok(out)
}

/// Targets appearing uniformly over the first 70 steps with a mean lifetime of 30 steps.
fn short_lived(base: &ScenarioConfig, count: usize) -> ScenarioConfig {
    let mut c = *base;
    c.targets.count = count;
    c.targets.spawn = SpawnRegion::Uniform;
    c.targets.birth_first = 1;
    c.targets.birth_last = 70.min(c.horizon.max(1));
    c.targets.lifetime = LifetimeLaw::Geometric;
    c.targets.mean_lifetime = 30.0;
    c
}

/// Outcome of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub id: String,
    pub config: ScenarioConfig,
    pub outcome: MonteCarlo,
}

/// Outcome of a whole experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub preset: String,
    pub variants: Vec<VariantResult>,
}

impl ExperimentResult {
    pub fn variant(&self, id: &str) -> Option<&MonteCarlo> {
        self.variants.iter().find(|v| v.id == id).map(|v| &v.outcome)
    }
}

/// Options of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads for trial-level parallelism; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Also write per-trial event and ground-truth logs.
    pub write_logs: bool,
}

/// Runs every variant of a preset for `trials` seeds starting at `seed`.
///
/// Writes `results.csv` and `summary.csv` into `out_dir`, plus, when
/// requested, `logs/<variant>_trial<t>_{events,truth}.csv`. The files are
/// identical for identical inputs regardless of `jobs`.
pub fn run_experiment(name: &str, base: &ScenarioConfig, opts: &RunOptions) -> Result<ExperimentResult> {
    if opts.trials == 0 {
        return Err(Error::NoTrials);
    }
    let variants = preset_variants(name, base)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter { name: "jobs", reason: e.to_string() })?;

    fs::create_dir_all(&opts.out_dir)?;
    let logs = opts.out_dir.join("logs");
    if opts.write_logs {
        fs::create_dir_all(&logs)?;
    }
    let mut results = csv::Writer::from_writer(BufWriter::new(File::create(opts.out_dir.join("results.csv"))?));
    let mut summary = csv::Writer::from_writer(BufWriter::new(File::create(opts.out_dir.join("summary.csv"))?));
    results.write_record(RESULTS_HEADER)?;
    summary.write_record(SUMMARY_HEADER)?;

    let mut out = Vec::with_capacity(variants.len());
    for v in variants {
        let seeds: Vec<u64> = (0..opts.trials).map(|t| trial_seed(opts.seed, t)).collect();
        let records = pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| simulate(&v.config, s))
                .collect::<Result<Vec<_>>>()
        })?;
        let mut trials = Vec::with_capacity(records.len());
        for (t, (record, &s)) in records.iter().zip(&seeds).enumerate() {
            if opts.write_logs {
                write_logs(&logs, &v.id, t, record)?;
            }
            trials.push(TrialMetrics::from_record(&v.config, s, record));
        }
        let outcome = MonteCarlo::from_trials(trials)?;
        write_results_rows(&mut results, &v.id, &outcome)?;
        write_summary_rows(&mut summary, &v.id, &outcome)?;
        out.push(VariantResult { id: v.id, config: v.config, outcome });
    }
    results.flush()?;
    summary.flush()?;
    Ok(ExperimentResult { preset: name.to_string(), variants: out })
}

fn write_logs(dir: &Path, id: &str, trial: usize, record: &crate::sim::TrialRecord) -> Result<()> {
    let events = BufWriter::new(File::create(dir.join(format!("{id}_trial{trial}_events.csv")))?);
    write_events_csv(&record.events, events)?;
    let truth = BufWriter::new(File::create(dir.join(format!("{id}_trial{trial}_truth.csv")))?);
    write_truth_csv(&record.truth, truth)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_is_stable_and_complete() {
        let names: Vec<&str> = list_presets().iter().map(|p| p.name).collect();
        assert_eq!(names, ["fig5", "fig6", "fig7", "fig8", "fig10a", "fig10b"]);
        assert!(list_presets().iter().all(|p| !p.description.is_empty()));
    }

    #[test]
    fn every_preset_expands_to_valid_variants() {
        let base = ScenarioConfig::default();
        for p in list_presets() {
            let vs = preset_variants(p.name, &base).unwrap();
            assert!(!vs.is_empty());
            let mut ids: Vec<&str> = vs.iter().map(|v| v.id.as_str()).collect();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), vs.len(), "variant ids of {} must be unique", p.name);
        }
    }

    #[test]
    fn sweeps_match_their_descriptions() {
        let base = ScenarioConfig::default();
        let fig5 = preset_variants("fig5", &base).unwrap();
        assert_eq!(fig5.len(), 8);
        assert!(fig5.iter().all(|v| !v.config.tracking.enabled));
        let fig10a = preset_variants("fig10a", &base).unwrap();
        let counts: Vec<usize> = fig10a.iter().map(|v| v.config.agents).collect();
        assert_eq!(counts, [2, 4, 6, 8, 10]);
        assert!(fig10a.iter().all(|v| v.config.targets.count == 20 && v.config.comms.range == 40.0));
        let fig10b = preset_variants("fig10b", &base).unwrap();
        assert_eq!(fig10b.iter().map(|v| v.config.overlap.enabled).collect::<Vec<_>>(), [true, false]);
    }

    #[test]
    fn unknown_preset_lists_the_available_ones() {
        match preset_variants("fig99", &ScenarioConfig::default()) {
            Err(Error::UnknownPreset { name, available }) => {
                assert_eq!(name, "fig99");
                assert!(available.contains("fig6") && available.contains("fig10a"));
            }
            other => panic!("expected an unknown-preset error, got {other:?}"),
        }
    }

    #[test]
    fn zero_trials_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { trials: 0, seed: 1, out_dir: dir.path().into(), jobs: Some(1), write_logs: false };
        assert!(matches!(run_experiment("fig6", &ScenarioConfig::default(), &opts), Err(Error::NoTrials)));
    }
}

//! Evaluation metrics and Monte-Carlo aggregation.

use std::io::Write;

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::overlap::ospa;
use crate::search::SearchGrid;
use crate::sim::{simulate, StepRecord, TrialRecord};
use crate::world::Position;

/// Fraction of cells whose search value is at least `threshold`.
pub fn searched_fraction(grid: &SearchGrid, threshold: f64) -> f64 {
    let searched = (0..grid.len()).filter(|&c| grid.value(c) >= threshold).count();
    searched as f64 / grid.len() as f64
}

/// OSPA between the estimates and the live targets at every step.
pub fn ospa_timeseries(steps: &[StepRecord], cutoff: f64) -> Vec<f64> {
    steps
        .iter()
        .map(|s| {
            let truth: Vec<Position> = s.truth.iter().map(|t| t.1).collect();
            ospa(&s.estimates, &truth, cutoff)
        })
        .collect()
}

/// Per-target `(id, steps alive, steps tracked)`, ordered by id.
///
/// A target counts as tracked at a step when some estimate lies within
/// `radius` of its true position.
pub fn target_tracking(steps: &[StepRecord], radius: f64) -> Vec<(usize, usize, usize)> {
    let mut table: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    for s in steps {
        for &(id, p) in &s.truth {
            let entry = table.entry(id).or_default();
            entry.0 += 1;
            if s.estimates.iter().any(|e| e.distance(&p) <= radius) {
                entry.1 += 1;
            }
        }
    }
    table.into_iter().map(|(id, (alive, tracked))| (id, alive, tracked)).collect()
}

/// Mean over targets of tracked time divided by lifetime; `None` without targets.
pub fn tracking_ratio(steps: &[StepRecord], radius: f64) -> Option<f64> {
    let per_target = target_tracking(steps, radius);
    if per_target.is_empty() {
        return None;
    }
    let sum: f64 = per_target.iter().map(|&(_, alive, tracked)| tracked as f64 / alive as f64).sum();
    Some(sum / per_target.len() as f64)
}

/// Metric series of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub seed: u64,
    pub searched: Vec<f64>,
    pub ospa: Vec<f64>,
    pub tracking_ratio: Option<f64>,
}

impl TrialMetrics {
    pub fn from_record(config: &ScenarioConfig, seed: u64, record: &TrialRecord) -> Self {
        Self {
            seed,
            searched: record.steps.iter().map(|s| s.searched).collect(),
            ospa: ospa_timeseries(&record.steps, config.metrics.ospa_cutoff),
            tracking_ratio: tracking_ratio(&record.steps, config.metrics.track_radius),
        }
    }
}

/// Per-step mean and sample standard deviation across trials.
pub fn mean_and_std(series: &[&[f64]]) -> Vec<(f64, f64)> {
    let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
    let n = series.len() as f64;
    (0..len)
        .map(|k| {
            let mean = series.iter().map(|s| s[k]).sum::<f64>() / n;
            let var = if series.len() > 1 {
                series.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (mean, var.sqrt())
        })
        .collect()
}

/// Mean and standard deviation of a scalar sample.
pub fn scalar_mean_and_std(values: &[f64]) -> (f64, f64) {
    let series: Vec<[f64; 1]> = values.iter().map(|v| [*v]).collect();
    let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
    mean_and_std(&refs).first().copied().unwrap_or((f64::NAN, f64::NAN))
}

/// Seed of trial `trial` in a batch started from `base`.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

/// Aggregated Monte-Carlo outcome of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub trials: Vec<TrialMetrics>,
    pub searched: Vec<(f64, f64)>,
    pub ospa: Vec<(f64, f64)>,
    /// Across trials that had at least one target.
    pub tracking_ratio: Option<(f64, f64)>,
}

impl MonteCarlo {
    pub fn from_trials(trials: Vec<TrialMetrics>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::NoTrials);
        }
        let searched: Vec<&[f64]> = trials.iter().map(|t| t.searched.as_slice()).collect();
        let ospa: Vec<&[f64]> = trials.iter().map(|t| t.ospa.as_slice()).collect();
        let ratios: Vec<f64> = trials.iter().filter_map(|t| t.tracking_ratio).collect();
        Ok(Self {
            searched: mean_and_std(&searched),
            ospa: mean_and_std(&ospa),
            tracking_ratio: (!ratios.is_empty()).then(|| scalar_mean_and_std(&ratios)),
            trials,
        })
    }

    /// Mean searched fraction at the final step.
    pub fn final_searched(&self) -> f64 {
        self.searched.last().map_or(f64::NAN, |s| s.0)
    }

    /// Mean OSPA over the 1-based, inclusive step range.
    pub fn mean_ospa(&self, first: usize, last: usize) -> f64 {
        let slice = &self.ospa[first - 1..last.min(self.ospa.len())];
        slice.iter().map(|s| s.0).sum::<f64>() / slice.len() as f64
    }
}

/// Runs one trial per seed, in parallel, and aggregates them.
///
/// The result depends only on the seed list, not on scheduling.
pub fn monte_carlo(config: &ScenarioConfig, seeds: &[u64]) -> Result<MonteCarlo> {
    if seeds.is_empty() {
        return Err(Error::NoTrials);
    }
    let trials = seeds
        .par_iter()
        .map(|&seed| simulate(config, seed).map(|r| TrialMetrics::from_record(config, seed, &r)))
        .collect::<Result<Vec<_>>>()?;
    MonteCarlo::from_trials(trials)
}

/// Appends `experiment_id, trial, step, metric, value` rows.
///
/// Per-step series use steps 1..=K; the scalar tracking ratio is reported at step K.
pub fn write_results_rows<W: Write>(w: &mut csv::Writer<W>, experiment: &str, mc: &MonteCarlo) -> Result<()> {
    for (trial, t) in mc.trials.iter().enumerate() {
        for (metric, series) in [("searched_fraction", &t.searched), ("ospa", &t.ospa)] {
            for (k, v) in series.iter().enumerate() {
                w.write_record([experiment, &trial.to_string(), &(k + 1).to_string(), metric, &v.to_string()])?;
            }
        }
        if let Some(r) = t.tracking_ratio {
            let k = t.searched.len();
            w.write_record([experiment, &trial.to_string(), &k.to_string(), "tracking_ratio", &r.to_string()])?;
        }
    }
    Ok(())
}

/// Appends `experiment_id, metric, step, mean, std` rows.
pub fn write_summary_rows<W: Write>(w: &mut csv::Writer<W>, experiment: &str, mc: &MonteCarlo) -> Result<()> {
    for (metric, series) in [("searched_fraction", &mc.searched), ("ospa", &mc.ospa)] {
        for (k, (mean, std)) in series.iter().enumerate() {
            w.write_record([experiment, metric, &(k + 1).to_string(), &mean.to_string(), &std.to_string()])?;
        }
    }
    if let Some((mean, std)) = mc.tracking_ratio {
        let k = mc.searched.len();
        w.write_record([experiment, "tracking_ratio", &k.to_string(), &mean.to_string(), &std.to_string()])?;
    }
    Ok(())
}

pub const RESULTS_HEADER: [&str; 5] = ["experiment_id", "trial", "step", "metric", "value"];
pub const SUMMARY_HEADER: [&str; 5] = ["experiment_id", "metric", "step", "mean", "std"];

//! Scenario configuration.
//!
//! Configurations are TOML files with one table per subsystem. Every field
//! is optional: an empty file yields the reference scenario. Unknown keys
//! are rejected and parse errors name the offending field path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phd::PhdParams;
use crate::planner::Connectivity;
use crate::search::GridGeometry;
use crate::world::{ControlModel, MotionModel, Position, Rect, SensorModel};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("cannot serialise configuration: {0}")]
    Serialize(String),

    #[error("configuration violates rule: {0}")]
    Invalid(String),
}

/// Target motion model used by the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    /// Sampling interval (s).
    pub dt: f64,
    /// Per-step survival probability.
    pub survival: f64,
    /// Multiplier on the constant-velocity process-noise covariance.
    pub noise_scale: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self { dt: 1.0, survival: 0.99, noise_scale: 1.0 }
    }
}

impl MotionConfig {
    pub fn model(&self) -> Result<MotionModel> {
        MotionModel::constant_velocity(self.dt, self.survival, self.noise_scale)
    }
}

/// How searching agents choose their next move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchPolicy {
    /// Follow greedy / jointly planned walks over the unvisited cells.
    #[default]
    Planned,
    /// Uniformly random among the moves that approach the nearest unvisited cell.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Side of a square grid cell (m); must tile the area.
    pub cell_size: f64,
    /// Per-step decay of unvisited cells.
    pub decay: f64,
    /// Cells at or below this search value need (re)visiting.
    pub threshold: f64,
    /// Search value of every cell at the start.
    pub initial_value: f64,
    pub connectivity: Connectivity,
    /// Replan once the unvisited set has changed by more than this fraction.
    pub replan_fraction: f64,
    pub policy: SearchPolicy,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            cell_size: 10.0,
            decay: 0.999,
            threshold: 0.5,
            initial_value: 0.01,
            connectivity: Connectivity::Eight,
            replan_fraction: 0.25,
            policy: SearchPolicy::Planned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    /// When false agents only search and run no target filter.
    pub enabled: bool,
    /// Rényi divergence order.
    pub alpha: f64,
    /// Consecutive empty estimates before a tracker returns to search.
    pub lost_steps: usize,
    /// Steps a released agent keeps searching before it may track again.
    pub release_steps: usize,
    /// Extra margin (m) around the footprint within which an agent keeps particles.
    pub window_margin: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self { enabled: true, alpha: 0.5, lost_steps: 5, release_steps: 5, window_margin: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapConfig {
    pub enabled: bool,
    /// Number of consecutive steps in the scoring window.
    pub window: usize,
    /// Cumulative score (m) at or below which two trackers are deemed redundant.
    pub threshold: f64,
    /// OSPA cutoff (m).
    pub cutoff: f64,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self { enabled: true, window: 3, threshold: 0.9, cutoff: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommsConfig {
    /// Communication range (m).
    pub range: f64,
}

impl Default for CommsConfig {
    fn default() -> Self {
        Self { range: 50.0 }
    }
}

/// Where scripted targets appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnRegion {
    #[default]
    Uniform,
    Center,
}

/// How long scripted targets live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifetimeLaw {
    /// Die each step with probability `1 - motion.survival`.
    #[default]
    Survival,
    /// Live exactly `mean_lifetime` steps.
    Fixed,
    /// Geometric lifetime with mean `mean_lifetime`.
    Geometric,
}

/// Ground-truth target population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetScript {
    pub count: usize,
    pub spawn: SpawnRegion,
    /// Births are drawn uniformly from the steps `birth_first..=birth_last`.
    pub birth_first: usize,
    pub birth_last: usize,
    pub lifetime: LifetimeLaw,
    pub mean_lifetime: f64,
    /// Initial speed (m/s) along a uniformly random heading.
    pub speed: f64,
    /// Multiplier on the constant-velocity process noise of the true targets.
    pub noise_scale: f64,
}

impl Default for TargetScript {
    fn default() -> Self {
        Self {
            count: 0,
            spawn: SpawnRegion::Uniform,
            birth_first: 1,
            birth_last: 1,
            lifetime: LifetimeLaw::Survival,
            mean_lifetime: 60.0,
            speed: std::f64::consts::SQRT_2,
            noise_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Search value above which a cell counts as searched.
    pub searched_threshold: f64,
    /// OSPA cutoff (m) for the estimation error.
    pub ospa_cutoff: f64,
    /// Distance (m) within which an estimate counts as tracking a target.
    pub track_radius: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { searched_threshold: 0.5, ospa_cutoff: 50.0, track_radius: 5.0 }
    }
}

/// Everything needed to run one simulation, apart from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of simulated steps.
    pub horizon: usize,
    pub agents: usize,
    /// Side of the square surveillance area (m), with its corner at the origin.
    pub area_side: f64,
    pub motion: MotionConfig,
    pub sensor: SensorModel,
    pub control: ControlModel,
    pub search: SearchConfig,
    pub phd: PhdParams,
    pub tracking: TrackingConfig,
    pub overlap: OverlapConfig,
    pub comms: CommsConfig,
    pub targets: TargetScript,
    pub metrics: MetricsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            agents: 4,
            area_side: 100.0,
            motion: MotionConfig::default(),
            sensor: SensorModel::default(),
            control: ControlModel::default(),
            search: SearchConfig::default(),
            phd: PhdParams::default(),
            tracking: TrackingConfig::default(),
            overlap: OverlapConfig::default(),
            comms: CommsConfig::default(),
            targets: TargetScript::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

fn invalid(rule: impl Into<String>) -> Error {
    Error::Config(ConfigError::Invalid(rule.into()))
}

fn require(ok: bool, rule: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(invalid(rule()))
    }
}

impl ScenarioConfig {
    pub fn area(&self) -> Rect {
        Rect::new(Position::new(0.0, 0.0), Position::new(self.area_side, self.area_side))
    }

    pub fn grid_geometry(&self) -> Result<GridGeometry> {
        GridGeometry::covering(&self.area(), self.search.cell_size)
    }

    /// Checks every cross-field constraint.
    pub fn validate(&self) -> Result<()> {
        require(self.horizon >= 1, || "horizon must be at least 1 step".into())?;
        require(self.agents >= 1, || "at least one agent is required".into())?;
        require(self.area_side > 0.0, || format!("area_side must be positive, got {}", self.area_side))?;
        self.sensor.validate().map_err(|e| invalid(format!("sensor: {e}")))?;
        self.motion.model().map_err(|e| invalid(format!("motion: {e}")))?;

        let min_range = std::f64::consts::SQRT_2 * self.sensor.side / 2.0;
        require(self.comms.range >= min_range, || {
            format!(
                "comms.range = {} must be at least the sensing half-diagonal √2·a/2 = {min_range:.3}",
                self.comms.range
            )
        })?;
        require(self.tracking.alpha > 0.0 && self.tracking.alpha < 1.0, || {
            format!("tracking.alpha must lie in (0, 1), got {}", self.tracking.alpha)
        })?;
        require(self.control.radial_step > 0.0, || "control.radial_step must be positive".into())?;
        require(self.control.angular_divisions >= 1, || "control.angular_divisions must be at least 1".into())?;

        self.grid_geometry().map_err(|e| invalid(format!("search: {e}")))?;
        let s = &self.search;
        require(s.decay > 0.0 && s.decay <= 1.0, || format!("search.decay must lie in (0, 1], got {}", s.decay))?;
        require(s.threshold > 0.0 && s.threshold < 1.0, || {
            format!("search.threshold must lie in (0, 1), got {}", s.threshold)
        })?;
        require(s.initial_value > 0.0 && s.initial_value <= 1.0, || {
            format!("search.initial_value must lie in (0, 1], got {}", s.initial_value)
        })?;
        require(s.replan_fraction >= 0.0, || "search.replan_fraction must be non-negative".into())?;

        let p = &self.phd;
        require(p.birth_rate >= 0.0, || "phd.birth_rate must be non-negative".into())?;
        require(p.birth_particles >= 1, || "phd.birth_particles must be at least 1".into())?;
        require(p.particles_per_target > 0.0, || "phd.particles_per_target must be positive".into())?;
        require(p.birth_velocity_std >= 0.0, || "phd.birth_velocity_std must be non-negative".into())?;
        require(self.tracking.window_margin >= 0.0, || "tracking.window_margin must be non-negative".into())?;

        let o = &self.overlap;
        require(o.window >= 1, || "overlap.window must be at least 1".into())?;
        require(o.threshold >= 0.0, || "overlap.threshold must be non-negative".into())?;
        require(o.cutoff > 0.0, || "overlap.cutoff must be positive".into())?;

        let t = &self.targets;
        require(t.birth_first <= t.birth_last, || "targets.birth_first must not exceed targets.birth_last".into())?;
        require(t.speed >= 0.0, || "targets.speed must be non-negative".into())?;
        require(t.noise_scale >= 0.0, || "targets.noise_scale must be non-negative".into())?;
        require(t.lifetime == LifetimeLaw::Survival || t.mean_lifetime >= 1.0, || {
            "targets.mean_lifetime must be at least 1 step".into()
        })?;

        let m = &self.metrics;
        require(m.searched_threshold > 0.0 && m.searched_threshold <= 1.0, || {
            "metrics.searched_threshold must lie in (0, 1]".into()
        })?;
        require(m.ospa_cutoff > 0.0, || "metrics.ospa_cutoff must be positive".into())?;
        require(m.track_radius > 0.0, || "metrics.track_radius must be positive".into())?;
        Ok(())
    }

    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| {
            Error::Config(ConfigError::Parse { path: ".".into(), message: e.message().to_string() })
        })?;
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::Config(ConfigError::Parse { path: e.path().to_string(), message: e.inner().message().to_string() })
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(ConfigError::Serialize(e.to_string())))
    }
}

/// Reads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&text)
}

/// Writes a scenario file that [`load_config`] reads back unchanged.
pub fn save_config(config: &ScenarioConfig, path: &Path) -> Result<()> {
    std::fs::write(path, config.to_toml_string()?)?;
    Ok(())
}

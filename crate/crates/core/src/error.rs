use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("virtual targets have no detection probability; use the sensing indicator instead")]
    VirtualTarget,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("inconsistent clutter model: measurement {index} has zero clutter intensity and zero target evidence but a nonzero numerator")]
    InconsistentClutter { index: usize },

    #[error("search grid geometries differ")]
    GeometryMismatch,

    #[error("renyi parameter alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("densities must share the same particle support ({0} vs {1} particles)")]
    SupportMismatch(usize, usize),

    #[error("exhaustive planner accepts at most {max} target nodes, got {got}")]
    TooManyTargets { max: usize, got: usize },

    #[error("node {0} is not part of the search graph")]
    UnknownNode(usize),

    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),

    #[error("unknown preset `{name}`; available presets: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("at least one Monte-Carlo trial is required")]
    NoTrials,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A closed-form evaluation left the representable range.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fully detached: modal parameters are undefined with zero attached pads")]
    FullyDetached,
    #[error("resonance singularity: undamped rod driven exactly at omega = {omega}")]
    ResonanceSingularity { omega: f64 },
    #[error("{what} = {value} is out of range; allowed: {allowed}")]
    OutOfRange {
        what: &'static str,
        value: String,
        allowed: &'static str,
    },
    #[error("unresolvable mode: natural frequency {freq_hz:.3} Hz is above Nyquist {nyquist_hz:.3} Hz")]
    UnresolvableMode { freq_hz: f64, nyquist_hz: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("degenerate stream: standard deviation {std:e} is below 1e-12")]
    DegenerateStream { std: f64 },
    #[error("stratification error: label {label} has {count} rows, at least 2 required")]
    Stratification { label: String, count: usize },
    #[error("no features selected")]
    NoFeatures,
    #[error("invalid action {action}: feature already selected")]
    InvalidAction { action: usize },
    #[error("terminal state: no valid actions remain")]
    Terminal,
    #[error("non-finite loss during update: {0}")]
    NonFinite(String),
    #[error("ingestion error: no data for condition tag `{0}`")]
    MissingCondition(String),
    #[error("episode {episode}: {source}")]
    Episode {
        episode: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

/// Errors raised by model construction, grid handling and the solver pipeline.
#[derive(Debug, Error)]
pub enum GameError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error(
        "point leaves the space domain on axis {axis}: coordinate {value} outside [{lo}, {hi}]{}",
        step.map(|s| format!(" at step {s}")).unwrap_or_default()
    )]
    OutOfDomain {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
        step: Option<usize>,
    },

    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl GameError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        GameError::Config(msg.into())
    }

    /// Attach the offending trajectory step to an out-of-domain error.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            GameError::OutOfDomain {
                axis, value, lo, hi, ..
            } => GameError::OutOfDomain {
                axis,
                value,
                lo,
                hi,
                step: Some(step),
            },
            other => other,
        }
    }

    pub fn is_out_of_domain(&self) -> bool {
        matches!(self, GameError::OutOfDomain { .. })
    }
}

pub type Result<T, E = GameError> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown wavelet `{name}` (available: {available})")]
    UnknownWavelet { name: String, available: String },

    /// The scale leaves fewer usable shifts than required.
    #[error("scale {scale} too large for sample length {n}: N_a = {usable} < {required}")]
    ScaleTooLarge {
        scale: usize,
        n: usize,
        usable: i64,
        required: i64,
    },

    #[error("shift {shift} out of range 1..={max} at scale {scale}")]
    ShiftOutOfRange {
        shift: usize,
        max: usize,
        scale: usize,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(
        "circulant embedding failed: eigenvalue {eigenvalue:e} below tolerance -{tolerance:e}"
    )]
    EmbeddingFailure { eigenvalue: f64, tolerance: f64 },

    /// The requested limit regime does not apply to the given (H, Q).
    #[error("regime violation: {0}")]
    Regime(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// Config validation collects every violation rather than stopping at the first.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Error::File {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects H outside the open interval (lo, hi).
pub(crate) fn check_open_interval(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_finite() && value > lo && value < hi {
        Ok(())
    } else {
        Err(Error::param(name, format!("{value} not in ({lo}, {hi})")))
    }
}

use thiserror::Error;

/// Errors produced anywhere in the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical instability at t = {time} s: non-finite temperature in cell ({i}, {j})")]
    Instability { time: f64, i: usize, j: usize },

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("no oscillatory mode with period in [{band_min_s}, {band_max_s}] s and |Re nu| <= {max_damping}; nearest candidates: {candidates}")]
    ModeNotFound {
        band_min_s: f64,
        band_max_s: f64,
        max_damping: f64,
        candidates: String,
    },

    #[error("controller fault: {0}")]
    ControllerFault(String),

    #[error("calibration failed: {reason}; achieved (D, norm) pairs: {achieved:?}")]
    Calibration {
        reason: String,
        achieved: Vec<(f64, f64)>,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Process exit code for this error class. Stage failures report their cause.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Config(_) | Error::TomlDe(_) | Error::TomlSer(_) => 3,
            Error::Ingestion(_) | Error::Io(_) | Error::Csv(_) => 4,
            Error::Instability { .. } | Error::Numerical(_) | Error::DegenerateData(_) => 5,
            Error::ModeNotFound { .. } => 6,
            Error::Calibration { .. } => 7,
            Error::ControllerFault(_) => 8,
            Error::UndefinedMetric(_) | Error::InsufficientData(_) => 9,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

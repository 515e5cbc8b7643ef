use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("qubit count {n} outside supported range 1..={max}")]
    QubitCount { n: usize, max: usize },

    #[error("bit mask {bits:#x} does not fit in {n} qubits")]
    MaskOutOfRange { bits: u64, n: usize },

    #[error("{what} needs n <= {max}, got n = {n}")]
    TooLarge { what: &'static str, n: usize, max: usize },

    #[error("invalid noise model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index set is empty")]
    EmptyIndexSet,

    #[error("data set is empty")]
    EmptyDataSet,

    #[error("calibration too noisy: |lambda_hat| = {lambda_hat:.6} below guard {guard}")]
    CalibrationTooNoisy { lambda_hat: f64, guard: f64 },

    #[error("per-qubit correction factor {factor:.6} on qubit {qubit} below guard {guard}")]
    WeakQubitFactor { qubit: usize, factor: f64, guard: f64 },

    #[error("state-preparation error on qubit {qubit} is 1/2; calibration vector cannot be corrected")]
    NonInvertiblePrep { qubit: usize },

    #[error("calibration matrix is singular or ill-conditioned (pivot ratio estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("outside ratio-bound regime: alpha = {alpha} must lie in [0, |y|/2] with |y| = {y}")]
    OutsideRatioRegime { alpha: f64, y: f64 },

    #[error("data file checksum mismatch (stored {stored}, recomputed {computed})")]
    Checksum { stored: String, computed: String },

    #[error("malformed data file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code category used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidModel(_) => 2,
            Error::CalibrationTooNoisy { .. }
            | Error::WeakQubitFactor { .. }
            | Error::Singular { .. }
            | Error::OutsideRatioRegime { .. } => 3,
            Error::Io { .. } | Error::Checksum { .. } | Error::Format(_) | Error::Json(_) | Error::Csv(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

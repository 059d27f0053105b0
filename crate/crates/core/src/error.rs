use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {context} (layer {layer})")]
    NonFinite { context: &'static str, layer: usize },

    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("malformed {what}: field `{field}`: {reason}")]
    Parse {
        what: &'static str,
        field: String,
        reason: String,
    },

    #[error("unsupported activation {activation} in layer {layer}: {reason}")]
    UnsupportedActivation {
        layer: usize,
        activation: String,
        reason: &'static str,
    },

    #[error("zero-norm weight row {neuron} in layer {layer}")]
    ZeroNormWeight { layer: usize, neuron: usize },

    #[error("non-finite gradient at PGD step {step} (sample {sample})")]
    NonFiniteGradient { step: usize, sample: usize },

    #[error("training diverged at step {step}: non-finite loss")]
    Diverged {
        step: u64,
        log: Box<crate::learn::TrajectoryLog>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid class registry: {0}")]
    InvalidRegistry(String),

    #[error("unknown class label '{0}'")]
    UnknownLabel(String),

    #[error("model '{0}' appears more than once in the record")]
    DuplicateModel(String),

    #[error("model '{model}': bad distribution: {reason}")]
    BadDistribution { model: String, reason: String },

    #[error("model '{model}': confidence {value} outside [0, 1]")]
    ConfidenceOutOfRange { model: String, value: f64 },

    #[error("record carries no model predictions")]
    EmptyEnsemble,

    #[error("ensemble size {found} differs from the expected {expected}")]
    InconsistentEnsembleSize { expected: usize, found: usize },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("'{0}' is not a minority class")]
    NotMinorityClass(String),

    #[error("class_balanced needs class priors in the registry")]
    MissingPriors,

    #[error("model '{0}' carries no probability distribution")]
    MissingDistribution(String),

    #[error("no training record carries a gold label")]
    NoGoldLabels,

    #[error("meta-ensemble has not been fitted")]
    UnfittedMeta,

    #[error("model set mismatch: {0}")]
    ModelMismatch(String),

    #[error("lenient evaluation requested without a lenient map")]
    MissingLenientMap,

    #[error("record '{0}' has no gold label")]
    MissingGold(String),

    #[error("unknown key '{0}'")]
    UnknownKey(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}, instance '{instance_id}': {source}")]
    Validation {
        line: usize,
        instance_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// True for failures of the environment (filesystem) rather than of the input data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

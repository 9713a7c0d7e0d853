use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("factor dimension must be at least 1 (factor `{0}`)")]
    ZeroDimension(String),

    #[error("duplicate factor label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),

    #[error("cannot trace out every factor of the space")]
    TraceAllFactors,

    #[error("no factor labels given")]
    NoLabels,

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("columns are not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("energy window [{energy}, {energy}+{delta}) contains no eigenvalue")]
    EmptyShell { energy: f64, delta: f64 },

    #[error("shell dimension {found} is below the configured floor {floor}")]
    ShellTooSmall { found: usize, floor: usize },

    #[error("target energy {target} lies outside the open spectral range ({min}, {max})")]
    TargetOutOfRange { target: f64, min: f64, max: f64 },

    #[error("spectrum has a single distinct level; no temperature can be matched")]
    SingleLevel,

    #[error("conditional vector has zero norm for outcome {0}")]
    ZeroConditionalNorm(usize),

    #[error("rejection sampler starved: no acceptance after {attempts} attempts (cap {cap})")]
    AcceptanceStarvation { attempts: u64, cap: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("matrix asymmetry {0:.3e} exceeds the symmetrization bound")]
    Asymmetric(f64),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("invalid config value for `{key}`: {reason}")]
    ConfigValidation { key: String, reason: String },

    #[error("unknown experiment `{name}`; available: {available}")]
    UnknownExperiment { name: String, available: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigValidation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

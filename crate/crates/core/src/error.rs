use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configured value breaks a documented constraint. `key` is the
    /// dotted config path of the offending value.
    #[error("invalid value for `{key}`: {constraint}")]
    Invariant { key: String, constraint: String },

    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("spectrum wavelengths must be strictly increasing (line {line}: {wavelength_nm} nm)")]
    SpectrumNonMonotone { line: usize, wavelength_nm: f64 },

    #[error("spectrum file is missing metadata line `# {0}=<value>`")]
    SpectrumMissingMetadata(&'static str),

    #[error("spectrum needs at least 2 samples, found {0}")]
    SpectrumTooShort(usize),

    #[error("calibration infeasible: {target} target {value:e} outside achievable range [{lo:e}, {hi:e}]")]
    CalibrationInfeasible {
        target: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invariant(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Invariant {
            key: key.into(),
            constraint: constraint.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::UnknownKey(_) => 3,
            Error::InvalidArgument(_)
            | Error::Invariant { .. }
            | Error::SpectrumNonMonotone { .. }
            | Error::SpectrumMissingMetadata(_)
            | Error::SpectrumTooShort(_) => 4,
            Error::CalibrationInfeasible { .. } | Error::ModelInconsistency(_) => 5,
            Error::Io(_) => 1,
        }
    }
}

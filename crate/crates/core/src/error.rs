use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector is not unit length: norm = {norm:.3e}")]
    NotUnit { norm: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("{what} = {value} is outside the supported range {min}..={max}")]
    Capacity {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("party index {party} out of range for {n} parties")]
    PartyOutOfRange { party: usize, n: usize },

    #[error("angle {name} = {value} outside [{min}, {max}]")]
    AngleRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("trace has imaginary residue {residue:.3e}; operator or state is not Hermitian")]
    ImaginaryResidue { residue: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("correlator contract violated: |C| = {value} exceeds 1")]
    CorrelatorContract { value: f64 },

    #[error("model soundness violated: {0}")]
    Soundness(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

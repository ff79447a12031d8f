use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Whether a failure came from bad input or from a numerically degenerate
/// computation. The CLI maps these onto distinct exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown spatial label `{0}`")]
    UnknownArm(String),
    #[error("identical spatial labels `{0}`: one photon per input arm is supported")]
    IdenticalArms(String),
    #[error("duplicate mode {0}")]
    DuplicateMode(String),
    #[error("registry mismatch between Fock states")]
    RegistryMismatch,
    #[error("polarization amplitudes exceed unit norm ({0})")]
    AmplitudeNorm(f64),
    #[error("input qubit is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("transform dimension {matrix} does not match {modes} modes")]
    TransformShape { matrix: usize, modes: usize },
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("invalid circuit: {0}")]
    Circuit(String),
    #[error("invalid truth table: {0}")]
    TruthTable(String),
    #[error("invalid marginals: {0}")]
    Marginals(String),
    #[error("invalid process matrix: {0}")]
    ProcessMatrix(String),
    #[error("invalid density matrix: {0}")]
    DensityMatrix(String),
    #[error("basis mismatch: expected {expected}, found {found}")]
    BasisMismatch { expected: String, found: String },
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("missing cell {input} -> {output}")]
    MissingCell { input: String, output: String },
    #[error("duplicate cell {0}")]
    DuplicateCell(String),
    #[error("negative count {count} in cell {cell}")]
    NegativeCount { cell: String, count: i64 },
    #[error("non-integer count `{value}` in cell {cell}")]
    NonIntegerCount { cell: String, value: String },
    #[error("zero total count for input state {0}")]
    ZeroRow(String),
    #[error("zero coincidence probability for input state {0} (degenerate circuit)")]
    DegenerateRow(String),
    #[error("degenerate process: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DegenerateRow(_) | Error::Degenerate(_) => ErrorClass::Numeric,
            _ => ErrorClass::Validation,
        }
    }
}

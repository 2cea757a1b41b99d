use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("subsystem index {index} out of range for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("invalid dimension {0}: must be at least 2")]
    InvalidDimension(usize),

    #[error("unknown Pauli label {0:?}")]
    UnknownPauliLabel(char),

    #[error("empty Pauli string")]
    EmptyPauliString,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("unitary does not square to the identity (max deviation {deviation:.3e})")]
    NotInvolution { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("{name} = {value} is out of range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("vanishing denominator: Tr(ρ Λ̃[1]) = {value:.3e}")]
    VanishingDenominator { value: f64 },

    #[error("not accessible: {0}")]
    NotAccessible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

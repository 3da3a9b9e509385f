use thiserror::Error;

/// Errors shared across the mixture algebra, the solvers and the harness.
#[derive(Debug, Clone, Error)]
pub enum MixtureError {
    #[error("non-positive density {value} for species {species}")]
    NonPositiveDensity { species: usize, value: f64 },

    #[error("invalid mixture spec: {0}")]
    InvalidSpec(String),

    #[error("singular matrix while {0}")]
    SingularMatrix(&'static str),

    #[error("invalid conserved state: {0}")]
    InvalidConserved(String),

    #[error("frequency vector must be nonzero")]
    ZeroFrequency,

    #[error("omega weights must not sum to zero")]
    DegenerateOmega,

    #[error("degenerate order fit: {0}")]
    DegenerateFit(String),

    #[error("cfl number {0} outside (0, 1]")]
    CflViolation(f64),

    #[error("positivity lost in cell {cell}: species {species} density {value}")]
    PositivityLoss {
        cell: usize,
        species: usize,
        value: f64,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, MixtureError>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("coefficient error: {0}")]
    Coefficients(String),

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error("CFL violation: {0}")]
    Cfl(String),

    #[error("linear solver did not converge: {0}")]
    SolverDiverged(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("support violation: {0}")]
    Support(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("nothing to report: {0}")]
    EmptyReport(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

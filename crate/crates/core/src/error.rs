use thiserror::Error;

/// Failures raised by the forward and inverse solvers.
///
/// The variant name doubles as the diagnostic tag printed by the CLI, so keep
/// the names stable.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("BandEdge: spectral parameter {mu} is within {eps:e} of the threshold {edge}")]
    BandEdge { mu: f64, edge: f64, eps: f64 },

    #[error("NonIntegrableDeviation: {0}")]
    NonIntegrableDeviation(String),

    #[error("InvalidPotential: {0}")]
    InvalidPotential(String),

    #[error("NoConvergence: {0}")]
    NoConvergence(String),

    #[error("GrowingChannel: channel j={j} on side {side} grows at infinity for mu={mu}")]
    GrowingChannel { mu: f64, side: &'static str, j: u8 },

    #[error("DegenerateConnection: connection matrix singular at mu={mu} (|det|={det:e})")]
    DegenerateConnection { mu: f64, det: f64 },

    #[error("ScanTooCoarse: more than one eigenvalue in ({lo}, {hi})")]
    ScanTooCoarse { lo: f64, hi: f64 },

    #[error("NotABoundState: normalized Wronskian {wronskian:e} at mu={mu}")]
    NotABoundState { mu: f64, wronskian: f64 },

    #[error("NotUnitary: |U U* - I| = {defect:e}")]
    NotUnitary { defect: f64 },

    #[error("TailTooShort: {0}")]
    TailTooShort(String),

    #[error("MethodMismatch: methods A and B differ by {diff:e} (tolerance {tol:e})")]
    MethodMismatch { diff: f64, tol: f64 },

    #[error("IllConditioned: condition estimate {cond:e} at x={x}")]
    IllConditioned { x: f64, cond: f64 },

    #[error("InvalidData: {0}")]
    InvalidData(String),

    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
}

impl Error {
    /// Short variant name, used on the diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::BandEdge { .. } => "BandEdge",
            Error::NonIntegrableDeviation(_) => "NonIntegrableDeviation",
            Error::InvalidPotential(_) => "InvalidPotential",
            Error::NoConvergence(_) => "NoConvergence",
            Error::GrowingChannel { .. } => "GrowingChannel",
            Error::DegenerateConnection { .. } => "DegenerateConnection",
            Error::ScanTooCoarse { .. } => "ScanTooCoarse",
            Error::NotABoundState { .. } => "NotABoundState",
            Error::NotUnitary { .. } => "NotUnitary",
            Error::TailTooShort(_) => "TailTooShort",
            Error::MethodMismatch { .. } => "MethodMismatch",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::InvalidData(_) => "InvalidData",
            Error::InvalidGrid(_) => "InvalidGrid",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

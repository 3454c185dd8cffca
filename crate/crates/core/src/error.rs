use thiserror::Error;

/// Errors raised by synthesis, verification and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} fails the PBH test at eigenvalue {re:+.6e}{im:+.6e}i")]
    Pbh { what: &'static str, re: f64, im: f64 },

    #[error("weight {0} is not positive definite")]
    IndefiniteWeight(&'static str),

    #[error("weight {0} is not symmetric")]
    AsymmetricWeight(&'static str),

    #[error("{what} is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { what: String, abscissa: f64 },

    #[error("{what}: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    Residual { what: &'static str, residual: f64, tol: f64 },

    #[error("{0} is singular or too ill-conditioned")]
    Singular(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("SDP infeasible: most violated constraint {constraint} (max eigenvalue {max_eig:.3e})")]
    Infeasible { constraint: String, max_eig: f64 },

    #[error("SDP solver stopped after {iterations} iterations (gap {gap:.3e}, Newton decrement {decrement:.3e})")]
    SdpNotConverged { iterations: usize, gap: f64, decrement: f64 },

    #[error("non-finite state at step {0}")]
    NonFinite(usize),

    #[error("design has not passed verification")]
    UnverifiedDesign,
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Real-valued payloads are carried as `f64` regardless of the working
/// scalar so that the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("Jacobi eigensolver did not converge within {budget} sweeps (off-diagonal mass {off_diagonal:.3e})")]
    NoConvergence { budget: usize, off_diagonal: f64 },

    #[error("singular 2x2 matrix: det = {det:.3e}")]
    Singular { det: f64 },

    #[error("{0} is out of its domain")]
    Domain(String),

    #[error("quadrature did not converge after {doublings} doublings (last two values {previous:.16e}, {last:.16e})")]
    QuadratureNoConvergence {
        doublings: usize,
        previous: f64,
        last: f64,
    },

    #[error("coefficient c12 = {c12} requires n != 2p")]
    SingularParameter { c12: f64 },

    #[error("span invariance violated: coupling of Q_N into Q_(N+1) is {coupling:.3e}")]
    SpanInvariance { coupling: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("spectral parameter must have a nonzero imaginary part")]
    RealSpectralParameter,

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("too close to a spectral edge: {0}")]
    EdgeProximity(String),

    #[error("extrapolation disagreement: {0}")]
    Extrapolation(String),

    #[error("quadrature grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("test function does not decay on the grid boundary: {0}")]
    NonDecaying(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("zero norm")]
    ZeroNorm,

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::EdgeProximity(_)
                | Error::Extrapolation(_)
                | Error::GridTooCoarse(_)
                | Error::NonFinite(_)
        )
    }
}

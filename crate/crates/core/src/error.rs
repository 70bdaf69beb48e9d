use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is singular at the rank tolerance{0}")]
    Singular(String),

    #[error("resolvent (sI - A) is singular at s = {0}")]
    SingularResolvent(Complex64),

    #[error("state matrix is not Hurwitz (largest real part of spectrum {0:e})")]
    NotHurwitz(f64),

    #[error("matrix is not skew-symmetric (relative asymmetry {0:e})")]
    NotSkew(f64),

    #[error("degenerate subspace: {0}")]
    Degenerate(String),

    #[error("invalid interpolation data: {0}")]
    Interpolation(String),

    #[error("skew Gram matrix of the interpolation subspace is singular (condition number {0:e})")]
    SkewGramSingular(f64),

    #[error("Schur iteration did not converge")]
    NoConvergence,

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

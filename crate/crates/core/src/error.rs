use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("pole at {0}")]
    Pole(Complex64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("step mismatch: {0} vs {1}")]
    StepMismatch(f64, f64),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("resonant spectrum: {0}; pre-shear the system so that no two eigenvalues of A(inf) differ by a nonzero integer")]
    Resonant(String),
    #[error("ill-conditioned eigenbasis (condition number {0:.3e}); supply explicit Jordan data")]
    IllConditioned(f64),
    #[error("entry ({0},{1}) is not proper at infinity")]
    NonProper(usize, usize),
    #[error("Re x = {re} is outside the certified half-plane Re x > {bound}")]
    OutOfHalfPlane { re: f64, bound: f64 },
    #[error("near-singular Sylvester operator (smallest singular value {0:.3e})")]
    NearSingular(f64),
    #[error("singular step matrix at x = {0}")]
    SingularStep(Complex64),
    #[error("inadmissible continuation path: {0}")]
    Path(String),
    #[error("strip hypothesis violated by poles {0} and {1}")]
    StripHypothesis(Complex64, Complex64),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

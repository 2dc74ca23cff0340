//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric: asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },

    #[error("Lyapunov system is numerically singular: some eigenvalue pair of A sums to zero")]
    SingularSystem,

    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),

    #[error("unphysical covariance: det(2V) = {det:.6e} violates the purity bound")]
    InvalidCovariance { det: f64 },

    #[error("conditioned covariance is singular")]
    SingularOmega,

    #[error("initial covariance is not pure: det(2 Omega) = {det:.6e}")]
    ImpureInitial { det: f64 },

    #[error("no root found: target not reached within t_max = {t_max:.6e}")]
    NoRoot { t_max: f64 },

    #[error("non-decohering ensemble: omega rate {omega:.3e} <= 0")]
    NonDecohering { omega: f64 },

    #[error("no physically realizable candidate in the search region")]
    EmptyFeasibleSet,

    #[error("sum of covariances is singular")]
    SingularSum,

    #[error("drift matrix is not Hurwitz: max Re eigenvalue = {max_re:.6e}")]
    NotHurwitz { max_re: f64 },

    #[error("gamma must be positive, got {0}")]
    NonpositiveGamma(f64),

    #[error("no admissible boundary root for beta = {beta}")]
    NoRealRoot { beta: f64 },

    #[error("survival denominator is non-positive at tau = {tau:.6e}; outside the validity regime")]
    NegativeDiscriminant { tau: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("trajectory diverged at step {step}: |mean| exceeded {limit:.1e}")]
    Divergence { step: usize, limit: f64 },

    #[error("insufficient samples: path length {len} does not exceed burn-in {burn_in}")]
    InsufficientSamples { len: usize, burn_in: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

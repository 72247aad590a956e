//! Error taxonomy shared by every engine in the crate.
//!
//! Errors fall into three broad groups that the CLI maps onto exit codes:
//! configuration problems (bad parameters, unsupported materials, geometry
//! violations), numerical failures (non-convergence, truncation overflow,
//! unstable integration), and physicality violations (covariance matrices
//! breaking the uncertainty bound, density matrices with negative weight).

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A scalar input violates a documented precondition (sign, range, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Geometric preconditions violated (surfaces touching, r > r_s, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Material data outside the supported table (e.g. ε_r without a tabulated
    /// dielectric factor, or a non-diamagnetic χ_V where levitation is asked).
    #[error("unsupported material: {0}")]
    UnsupportedMaterial(String),

    /// Mode labels or matrix dimensions do not line up.
    #[error("composition error: {0}")]
    Composition(String),

    /// A state failed its physicality check (σ + iΩ/2 ⪰ 0, trace one, ...).
    #[error("non-physical state: {0}")]
    NonPhysicalState(String),

    /// Numerical routine failed to converge / bracket / remain stable.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Fock-space truncation budget exceeded.
    #[error("truncation error: tail population {tail:.3e} exceeds budget; suggest N ≥ {suggested}")]
    Truncation { tail: f64, suggested: usize },
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    /// True for errors caused by scenario input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            CoreError::InvalidParameter(_)
                | CoreError::Geometry(_)
                | CoreError::UnsupportedMaterial(_)
                | CoreError::Composition(_)
        )
    }
}

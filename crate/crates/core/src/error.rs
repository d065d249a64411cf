//! Error type shared by the synthesis and simulation pipeline.

use thiserror::Error;

/// Errors surfaced by the synthesis pipeline and the simulators.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Mode indices are 1-based; there is no eigenpair for k = 0.
    #[error("mode index must be >= 1")]
    ZeroModeIndex,

    /// Doubling the quadrature resolution moved a projection coefficient
    /// by more than the accepted relative drift.
    #[error("quadrature under-resolved at mode {mode}: relative drift {drift:.3e}")]
    QuadratureUnderresolved { mode: usize, drift: f64 },

    /// The dipolar moment violates the endpoint condition
    /// mu'(1) != mu'(0) and mu'(1) != -mu'(0).
    #[error("dipolar moment endpoint slopes degenerate: mu'(0) = {dmu0:.6e}, mu'(1) = {dmu1:.6e}")]
    DegenerateSlopes { dmu0: f64, dmu1: f64 },

    /// The moment-coefficient sweep found k^3 |m_k| at or below the
    /// tolerance, so the gain formulas divide by (numerically) zero.
    #[error("moment hypothesis fails at k = {worst_k}: k^3 |m_k| = {c_lower:.3e}")]
    HypothesisViolation { worst_k: usize, c_lower: f64 },

    /// The basis Gram matrix is numerically rank deficient.
    #[error("basis family near singular: sigma_min/sigma_max = {ratio:.3e}")]
    NearSingularBasis { ratio: f64 },

    /// A dense factorization failed where the inputs should have made it
    /// succeed (reported with context instead of panicking).
    #[error("singular matrix in {context}")]
    SingularMatrix { context: &'static str },

    /// An input matrix does not satisfy a structural assumption
    /// (controllability, simple spectrum, shifted invertibility).
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    /// The closed-loop norm exceeded the instability guard.
    #[error("closed loop unstable: norm ratio {ratio:.3e} at t = {t:.3}")]
    Unstable { t: f64, ratio: f64 },

    /// Mismatched truncation orders or incompatible shift modes.
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

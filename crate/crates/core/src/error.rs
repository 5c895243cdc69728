use thiserror::Error;

/// Errors raised by the collar numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollarError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow evaluating mode k = {mode}: exponent {exponent:.3} exceeds the representable range")]
    Overflow { mode: i32, exponent: f64 },

    #[error("power mismatch: {0}")]
    PowerMismatch(String),

    #[error("quadrature did not converge to rel_tol {rel_tol:e}: last estimates {previous:e} and {last:e}")]
    Accuracy {
        rel_tol: f64,
        previous: f64,
        last: f64,
    },

    #[error("aliasing: {samples} samples cannot resolve modes up to |k| = {k_max} (need at least {needed})")]
    Aliasing {
        samples: usize,
        k_max: usize,
        needed: usize,
    },

    #[error("evaluation at {distance:e} from the singular point {which}")]
    Singularity { which: &'static str, distance: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ill-conditioned Gram system (condition {condition:e}); try a smaller k_max")]
    Conditioning { condition: f64 },

    #[error("denominator floor violated: sum of generator norms {value:e} < {floor:e} at rho = {rho:.6}, theta = {theta:.6}")]
    DenominatorFloor {
        value: f64,
        floor: f64,
        rho: f64,
        theta: f64,
    },

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CollarError>;

impl CollarError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CollarError::Domain(msg.into())
    }
}

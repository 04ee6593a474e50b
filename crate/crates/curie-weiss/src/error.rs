use thiserror::Error;

/// Errors produced by the curie-weiss library.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The separation condition between the high- and low-temperature
    /// statistic intervals fails, i.e. the group is too small for the
    /// chosen regime boundaries.
    #[error(
        "separation violated for N={group_size}, b1={b1}, b2={b2}: \
         J_h upper bound {j_h_upper} >= J_l lower bound {j_l_lower}"
    )]
    SeparationViolated {
        b1: f64,
        b2: f64,
        group_size: u64,
        j_h_upper: f64,
        j_l_lower: f64,
    },

    /// Argument lies in the excluded critical gap of a regime-split function.
    #[error("argument {value} lies in the excluded gap ({gap_lo}, {gap_hi})")]
    OutOfDomain { value: f64, gap_lo: f64, gap_hi: f64 },

    /// Statistic value outside the attainable range.
    #[error("value {value} outside the attainable range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    /// Approximation-error constants missing or unusable.
    #[error("error constants not calibrated: {0}")]
    ConstantsUncalibrated(String),

    /// A requested tail bound is degenerate (rate zero), usually a sign of
    /// misconfigured intervals or a boundary parameter value.
    #[error("degenerate tail bound: {0}")]
    DegenerateBound(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature failed: estimated relative error {estimated} exceeds tolerance {tolerance}")]
    QuadratureFailure { tolerance: f64, estimated: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

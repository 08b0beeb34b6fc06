use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// A physical input violates its documented bound.
    InvalidParameter {
        field: &'static str,
        value: f64,
        bound: &'static str,
    },
    /// Port counts or Hilbert-space dimensions of two operands disagree.
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    /// A linear system was numerically singular.
    Singular {
        context: &'static str,
        condition: f64,
    },
    /// `(1 - A22)` could not be inverted at this drive frequency.
    FeedbackSingular { omega_d_ghz: f64, condition: f64 },
    /// An iterative solver did not converge.
    NonConvergence {
        context: &'static str,
        residual: f64,
    },
    /// The Liouvillian kernel is not one dimensional.
    DegenerateKernel {
        smallest: f64,
        second_smallest: f64,
    },
    /// `dt` does not resolve the fastest rate of the generator.
    StepTooLarge { dt: f64, limit: f64 },
    /// The charge-ground matrix element used for the lifetime vanishes.
    VanishingMatrixElement,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter {
                field,
                value,
                bound,
            } => write!(f, "invalid {field} = {value}: must be {bound}"),
            Error::DimensionMismatch {
                context,
                left,
                right,
            } => write!(f, "{context}: dimension mismatch ({left} vs {right})"),
            Error::Singular { context, condition } => {
                write!(f, "{context}: singular system (condition estimate {condition:.3e})")
            }
            Error::FeedbackSingular {
                omega_d_ghz,
                condition,
            } => write!(
                f,
                "feedback resolvent (1 - A22) singular at drive frequency {omega_d_ghz} GHz \
                 (condition estimate {condition:.3e})"
            ),
            Error::NonConvergence { context, residual } => {
                write!(f, "{context} did not converge (residual norm {residual:.3e})")
            }
            Error::DegenerateKernel {
                smallest,
                second_smallest,
            } => write!(
                f,
                "Liouvillian kernel is not one dimensional (singular values {smallest:.3e}, \
                 {second_smallest:.3e}); check for a symmetry or degeneracy that decouples \
                 part of the loop spectrum"
            ),
            Error::StepTooLarge { dt, limit } => {
                write!(f, "time step {dt} exceeds the stability limit {limit:.3e}")
            }
            Error::VanishingMatrixElement => {
                write!(f, "ground-to-excited charge matrix element vanishes")
            }
        }
    }
}

impl core::error::Error for Error {}

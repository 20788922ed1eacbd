use alloc::string::String;

/// Errors raised by the core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Geometry for which the row-time formulas are undefined (e.g. `H < 2`).
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    /// An argument outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Mismatched image, flow or map dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Frame timestamps inconsistent with the camera timing.
    #[error("timing error: {0}")]
    Timing(String),
    /// A loss or objective evaluated to NaN or infinity.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

impl Error {
    /// True for errors caused by the caller's inputs rather than by the
    /// computation itself.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::NonFinite(_))
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $kind:ident, $($arg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err($crate::Error::$kind(alloc::format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;

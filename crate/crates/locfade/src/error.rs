//! Shared error type. Every fallible operation in the crate returns [`Result`].

use std::fmt;

/// Crate-wide error enumeration.
#[derive(Debug)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    Domain { context: String },
    /// An iterative routine exhausted its budget. `partial` carries the best
    /// estimate available when the budget ran out, when one exists.
    Convergence { context: String, partial: Option<f64> },
    /// A fading realization makes the conditional measurement variance
    /// infinite (zero envelope, or a phase at the singular point).
    DegenerateChannel { context: String },
    /// The anchor geometry makes the Fisher matrix numerically singular.
    SingularGeometry { condition: f64 },
    /// The requested combination of regime and parameters has no supported
    /// closed form or sampler.
    UnsupportedRegime { context: String },
    /// No feasible configuration exists (for example no fusion threshold
    /// reaches the requested false-alarm level).
    Infeasible { context: String },
    /// The config document is not syntactically valid.
    Parse { line: usize, column: usize, message: String },
    /// The config document is well-formed but semantically invalid; `field`
    /// names the offending key.
    Validation { field: String, message: String },
    /// Filesystem failure while reading configs or writing results.
    Io(std::io::Error),
}

impl Error {
    pub fn domain(context: impl Into<String>) -> Self {
        Error::Domain { context: context.into() }
    }

    pub fn convergence(context: impl Into<String>, partial: Option<f64>) -> Self {
        Error::Convergence { context: context.into(), partial }
    }

    pub fn degenerate_channel(context: impl Into<String>) -> Self {
        Error::DegenerateChannel { context: context.into() }
    }

    pub fn unsupported_regime(context: impl Into<String>) -> Self {
        Error::UnsupportedRegime { context: context.into() }
    }

    pub fn infeasible(context: impl Into<String>) -> Self {
        Error::Infeasible { context: context.into() }
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { context } => write!(f, "domain error: {context}"),
            Error::Convergence { context, partial } => match partial {
                Some(p) => write!(f, "failed to converge: {context} (partial estimate {p})"),
                None => write!(f, "failed to converge: {context}"),
            },
            Error::DegenerateChannel { context } => {
                write!(f, "degenerate channel: {context}")
            }
            Error::SingularGeometry { condition } => write!(
                f,
                "singular geometry: Fisher matrix condition number {condition:.3e} exceeds 1e12"
            ),
            Error::UnsupportedRegime { context } => {
                write!(f, "unsupported regime: {context}")
            }
            Error::Infeasible { context } => write!(f, "infeasible: {context}"),
            Error::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            Error::Validation { field, message } => {
                write!(f, "invalid config field `{field}`: {message}")
            }
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_names_the_offending_field() {
        let e = Error::validation("sigm", "unknown key");
        assert!(
            e.to_string().contains("sigm"),
            "validation errors must name the field, got: {e}"
        );
    }

    #[test]
    fn convergence_error_carries_partial_estimate() {
        let e = Error::convergence("integral", Some(0.25));
        assert!(e.to_string().contains("0.25"), "partial estimate should be reported");
    }
}

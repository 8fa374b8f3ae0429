use core::fmt;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    InvalidArgument(&'static str),
    /// A documented precondition did not hold for the given input.
    Precondition(&'static str),
    /// An element name did not match any known optical element.
    UnknownElement,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::UnknownElement => f.write_str("invalid argument: unknown optical element kind"),
        }
    }
}

impl core::error::Error for Error {}

use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A configuration value violates its invariant.
    Config(String),
    InvalidAction { action: usize, num_actions: usize },
    /// A question names a color that no object in the scene carries.
    MissingObject { color: usize },
    /// Question text does not match the canonical template.
    Parse {
        token_index: usize,
        found: String,
        expected: String,
    },
    Shape(String),
    /// A loss became non-finite; `at` names the epoch or update.
    Diverged { at: String },
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::InvalidAction {
                action,
                num_actions,
            } => write!(f, "invalid action {action} (action space has {num_actions})"),
            Error::MissingObject { color } => {
                write!(f, "no object with color id {color} in the scene")
            }
            Error::Parse {
                token_index,
                found,
                expected,
            } => write!(
                f,
                "parse error at token {token_index}: found {found:?}, expected {expected}"
            ),
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Diverged { at } => write!(f, "training diverged at {at}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

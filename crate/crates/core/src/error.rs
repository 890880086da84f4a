use std::path::PathBuf;

use thiserror::Error;

use crate::grounder::CycleError;
use crate::parser::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{0}")]
    Parse(#[from] ParseError),

    /// A parse error inside a called subprogram; `origin` is the file path
    /// or `<embedded>`.
    #[error("{origin}:{error}")]
    SubprogramParse { origin: String, error: ParseError },

    #[error(transparent)]
    Cycle(#[from] CycleError),

    #[error("unknown external atom &{0}")]
    UnknownOracle(String),

    #[error("external atom &{0} is already registered")]
    DuplicateOracle(String),

    #[error("&{oracle} expects {expected} {what}, got {found}")]
    ArityMismatch {
        oracle: String,
        what: &'static str,
        expected: String,
        found: usize,
    },

    #[error("external atom &{0} occurs under negation as failure")]
    NafExternal(String),

    #[error("variable {variable} is unbound when evaluating {element}")]
    Unbound { variable: String, element: String },

    #[error("arithmetic error: {0}")]
    Arithmetic(String),

    #[error("&{oracle}: {message}")]
    Oracle { oracle: String, message: String },

    #[error("cannot read {}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    #[error("subprogram file not found: {0}")]
    FileNotFound(String),

    #[error("nesting depth exceeded (max depth {max_depth})")]
    DepthExceeded { max_depth: usize },

    #[error("subprogram {identity} calls itself with identical input")]
    RecursiveCall { identity: String },

    #[error("unknown handle {0}")]
    UnknownHandle(String),

    #[error("{count} undetermined atoms on one search branch exceed the enumeration bound of {limit}")]
    TooManyAtoms { count: usize, limit: usize },
}

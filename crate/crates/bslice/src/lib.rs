//! Scenario files, builtin examples and JSON reports on top of
//! [`bslice_core`], plus the `bslice` command line tool.

pub mod builtins;
pub mod commands;
pub mod report;
pub mod scenario;

use bslice_core::actions::ActionError;
use bslice_core::bcalc::BcalcError;
use bslice_core::expr::ExprError;
use bslice_core::moser::MoserError;
use bslice_core::slice::SliceError;
use bslice_core::torus::TorusError;

pub use commands::{run_task, Options};
pub use report::{Report, Status};
pub use scenario::{parse_scenario, Scenario, Task};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Moser(#[from] MoserError),
    #[error(transparent)]
    Bcalc(#[from] BcalcError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    /// 4 for unreadable input, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Parse { .. } | Error::UnknownBuiltin(_) | Error::Io(_) => 4,
            _ => 2,
        }
    }
}

/// Scenario text from a path, or from `builtin:<name>`.
pub fn load(source: &str) -> Result<Scenario, Error> {
    let text = match source.strip_prefix("builtin:") {
        Some(name) => builtins::source(name)?.to_string(),
        None => std::fs::read_to_string(source)?,
    };
    parse_scenario(&text)
}

use std::time::Duration;

use crate::host::ast::{BlockId, Span};
use crate::host::{ParseError, RuntimeError};

/// Failures attributed to the agent rather than the program.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("no script rule matches block {block} at step {position}")]
    NoRule { block: BlockId, position: usize },
    #[error("trace mismatch at step {step}: recorded {recorded}, live {live}")]
    TraceMismatch {
        step: usize,
        recorded: String,
        live: String,
    },
    #[error("trace exhausted at step {step}")]
    TraceExhausted { step: usize },
    #[error("malformed agent output: {0}")]
    Malformed(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("natural block finished without defining: {0}")]
    Incomplete(String),
    #[error("effect {0} is not available in this mode")]
    WrongMode(String),
    #[error("cache store: {0}")]
    Store(String),
}

/// A failure that stops the program.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Fault {
    #[error("{}{error}", at.map(|s| format!("{s}: ")).unwrap_or_default())]
    Runtime {
        error: RuntimeError,
        at: Option<Span>,
    },
    #[error("block {block}: effect budget of {limit} exceeded")]
    Budget { block: BlockId, limit: usize },
    #[error("block {block}: timed out after {limit:?}")]
    Timeout { block: BlockId, limit: Duration },
    #[error("block {block}: {error}")]
    Agent { block: BlockId, error: AgentError },
}

impl Fault {
    pub fn runtime(error: RuntimeError) -> Self {
        Fault::Runtime { error, at: None }
    }
}

/// Error classes and their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorClass {
    Usage,
    Parse,
    Runtime,
    Budget,
    Timeout,
    Agent,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Parse => 2,
            ErrorClass::Runtime => 3,
            ErrorClass::Budget => 4,
            ErrorClass::Timeout => 5,
            ErrorClass::Agent => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage error",
            ErrorClass::Parse => "parse error",
            ErrorClass::Runtime => "runtime error",
            ErrorClass::Budget => "budget exceeded",
            ErrorClass::Timeout => "timeout",
            ErrorClass::Agent => "agent error",
        }
    }
}

impl Fault {
    pub fn class(&self) -> ErrorClass {
        match self {
            Fault::Runtime { .. } => ErrorClass::Runtime,
            Fault::Budget { .. } => ErrorClass::Budget,
            Fault::Timeout { .. } => ErrorClass::Timeout,
            Fault::Agent { .. } => ErrorClass::Agent,
        }
    }
}

/// Anything that can stop `njr run`.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Fault(#[from] Fault),
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn class(&self) -> ErrorClass {
        match self {
            RunError::Parse(_) => ErrorClass::Parse,
            RunError::Fault(f) => f.class(),
            RunError::Usage(_) | RunError::Io(_) => ErrorClass::Usage,
        }
    }
}

//! Interpreter for a small host language whose programs embed natural-code
//! blocks. An agent executes each block by emitting effects that read and
//! write host variables, mutate the heap through references, and jump to
//! host labels.

pub mod agent;
pub mod bench;
pub mod config;
pub mod error;
pub mod host;
pub mod nfi;
pub mod run;
pub mod trace;

pub use error::{AgentError, ErrorClass, Fault, RunError};
pub use run::{run, run_lines, RunOptions, RunResult};

//! The host language: syntax, values, state and the evaluator.

pub mod ast;
pub mod env;
pub mod heap;
pub mod machine;
pub mod parse;
pub mod state;
pub mod value;

pub use ast::{BlockId, Expr, NaturalBlock, Program};
pub use env::Env;
pub use heap::{DanglingRef, Heap};
pub use machine::{enclosing_labels, BlockOutcome, Limits, Machine, NaturalDriver, UnknownBlock};
pub use parse::{parse_expression, parse_program, ParseError};
pub use state::{HostState, InputSource, LabelFrame, Output, RuntimeError};
pub use value::{Address, Cell, LabelKind, LabelName, Value, VarName};

//! The natural function interface: values on the wire, effects, and the
//! handlers that perform them against host state.

pub mod effect;
pub mod session;
pub mod tools;
pub mod wire;

pub use effect::{AgentStep, Effect, EffectResponse, ErrorCode, StepError, TraceEntry};
pub use session::{
    finalize_session, handle_effect, run_natural_block, Handled, HandlerEnv, HandlerMode,
    NaturalRuntime, NfiConfig, Session, SessionRecord, SessionStatus, THOUGHT_VAR,
};
pub use tools::{DuplicateTool, ToolInfo, ToolRegistry};
pub use wire::{reify, reify_alloc, reify_cell, serialize, serialize_cell, WireError, WireValue};

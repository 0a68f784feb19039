//! Agents: implementations of the natural-code evaluation function.
//!
//! An agent is pull-based. Each call receives the full session context
//! (block, eager variables, and every prior effect with its response) and
//! returns exactly one step.

use serde::Serialize;

use crate::host::{Cell, HostState, NaturalBlock, RuntimeError, Value};
use crate::nfi::{serialize, AgentStep, HandlerMode, ToolInfo, TraceEntry, WireValue};

pub mod llm;
pub mod replay;
pub mod scripted;

pub use crate::error::AgentError;
pub use llm::{LlmAgent, LlmConfig};
pub use replay::ReplayAgent;
pub use scripted::{Rule, Script, ScriptedAgent};

/// A variable loaded into the context at block entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EagerVar {
    pub name: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub value: WireValue,
    /// Shallow description of a composite: record field names or list length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preview: Option<String>,
}

/// Everything an agent may see when choosing its next step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentContext {
    pub block_id: String,
    pub text: String,
    pub mode: HandlerMode,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub eager_vars: Vec<EagerVar>,
    pub labels: Vec<String>,
    pub tools: Vec<ToolInfo>,
    pub max_effects: usize,
    pub history: Vec<TraceEntry>,
    /// Set when the previous output could not be understood.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format_error: Option<String>,
}

pub trait Agent {
    fn next_step(&mut self, ctx: &AgentContext) -> Result<AgentStep, AgentError>;

    /// Called once when a session opens, before the first `next_step`.
    fn begin_session(&mut self, _ctx: &AgentContext) -> Result<(), AgentError> {
        Ok(())
    }

    /// Identifies the agent's configuration (prompt, model) for cache keys.
    fn fingerprint(&self) -> String;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn next_step(&mut self, ctx: &AgentContext) -> Result<AgentStep, AgentError> {
        (**self).next_step(ctx)
    }

    fn begin_session(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        (**self).begin_session(ctx)
    }

    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

/// Host type name of a value, looking through addresses to the cell kind.
pub fn host_type_name(v: &Value, state: &HostState) -> &'static str {
    match v {
        Value::Addr(a) => state.heap.get(*a).map(Cell::type_name).unwrap_or("Addr"),
        other => other.type_name(),
    }
}

fn preview(v: &Value, state: &HostState) -> Option<String> {
    let Value::Addr(a) = v else { return None };
    match state.heap.get(*a).ok()? {
        Cell::Record(fields) => {
            let mut names: Vec<&str> = fields.keys().map(String::as_str).collect();
            names.sort_unstable();
            Some(format!("fields: {}", names.join(", ")))
        }
        Cell::List(items) => Some(format!("length: {}", items.len())),
        Cell::Value(inner) => Some(format!("reference to {}", host_type_name(inner, state))),
    }
}

/// Values, types and previews of the block's inputs.
pub fn build_eager_context(
    block: &NaturalBlock,
    state: &HostState,
) -> Result<Vec<EagerVar>, RuntimeError> {
    block
        .inputs
        .iter()
        .map(|x| {
            let v = state
                .env
                .lookup(x.as_str())
                .ok_or_else(|| RuntimeError::UndefinedVar(x.to_string()))?;
            Ok(EagerVar {
                name: x.to_string(),
                type_name: host_type_name(v, state).to_string(),
                value: serialize(v),
                preview: preview(v, state),
            })
        })
        .collect()
}

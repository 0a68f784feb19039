//! Natural-block sessions and the effect handlers.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use super::effect::{AgentStep, Effect, EffectResponse, ErrorCode, TraceEntry};
use super::tools::ToolRegistry;
use super::wire::{reify_alloc, reify_cell, serialize, serialize_cell, WireError, WireValue};
use crate::agent::{build_eager_context, Agent, AgentContext};
use crate::error::{AgentError, Fault};
use crate::host::ast::{BlockId, FunctionDef};
use crate::host::env::Frame;
use crate::host::machine::{enclosing_labels, BlockOutcome, Limits, Machine, NaturalDriver};
use crate::host::{Address, HostState, LabelKind, LabelName, NaturalBlock, Program, RuntimeError};

/// Which effects natural code may perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandlerMode {
    /// Variables, references and labels.
    Shared,
    /// `Shared` plus evaluation of host expressions over the shared state.
    Eval,
    /// Registered tools only.
    Tools,
    /// No effects; natural code only returns a value.
    Isolated,
}

impl HandlerMode {
    pub const ALL: [HandlerMode; 4] = [
        HandlerMode::Shared,
        HandlerMode::Eval,
        HandlerMode::Tools,
        HandlerMode::Isolated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HandlerMode::Shared => "shared",
            HandlerMode::Eval => "eval",
            HandlerMode::Tools => "tools",
            HandlerMode::Isolated => "isolated",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn allows(self, effect: &Effect) -> bool {
        match (self, effect) {
            (HandlerMode::Isolated, _) => false,
            (HandlerMode::Tools, e) => matches!(e, Effect::Call { .. }),
            (_, Effect::Call { .. }) => false,
            (HandlerMode::Shared, Effect::SharedEval { .. }) => false,
            _ => true,
        }
    }

    /// Whether output variables are required at the end of a block.
    pub fn checks_outputs(self) -> bool {
        matches!(self, HandlerMode::Shared | HandlerMode::Eval)
    }
}

/// Name natural code may always assign as a planning scratchpad.
pub const THOUGHT_VAR: &str = "nj__thought";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NfiConfig {
    pub max_effects: usize,
    pub timeout: Duration,
    pub max_malformed: usize,
    pub max_finalize_retries: usize,
    pub eager: bool,
    pub eval_step_limit: u64,
}

impl Default for NfiConfig {
    fn default() -> Self {
        NfiConfig {
            max_effects: 300,
            timeout: Duration::from_secs(1000),
            max_malformed: 3,
            max_finalize_retries: 1,
            eager: true,
            eval_step_limit: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Running,
    Finished,
    Cancelled,
    Failed,
}

/// A suspended natural-code evaluation.
#[derive(Debug, Clone)]
pub struct Session<'b> {
    pub block: &'b NaturalBlock,
    pub labels: IndexSet<LabelName>,
    pub mode: HandlerMode,
    /// Context handed to the agent; its history is the session trace.
    pub ctx: AgentContext,
    pub effects_used: usize,
    pub agent_calls: usize,
    pub finalize_failures: usize,
    pub terminal: Option<AgentStep>,
    pub status: SessionStatus,
    /// Scope depth of the block frame.
    pub frame_depth: usize,
}

/// What the handler decided for one effect.
#[derive(Debug, Clone, PartialEq)]
pub enum Handled {
    Resume(EffectResponse),
    Transfer(LabelName, Option<crate::host::Value>),
}

/// Completed session, as stored in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub block_id: String,
    pub mode: HandlerMode,
    pub entries: Vec<TraceEntry>,
    pub terminal: Option<AgentStep>,
    pub status: SessionStatus,
}

/// Shared, per-run inputs to the handlers.
pub struct HandlerEnv<'p> {
    pub functions: &'p IndexMap<String, FunctionDef>,
    pub tools: &'p ToolRegistry,
    pub config: NfiConfig,
}

fn wire_err(e: WireError) -> EffectResponse {
    match e {
        WireError::Dangling(a) => {
            EffectResponse::err(ErrorCode::DanglingRef, format!("reference {a} is not live"))
        }
        other => EffectResponse::err(ErrorCode::TypeError, other.to_string()),
    }
}

fn expect_ref(w: &WireValue, state: &HostState) -> Result<Address, EffectResponse> {
    match w {
        WireValue::Ref(a) if state.heap.is_live(Address(*a)) => Ok(Address(*a)),
        WireValue::Ref(a) => Err(EffectResponse::err(
            ErrorCode::DanglingRef,
            format!("reference {a} is not live"),
        )),
        other => Err(EffectResponse::err(
            ErrorCode::TypeError,
            format!("expected a reference, got {}", other.kind_name()),
        )),
    }
}

/// Performs one effect. Error responses leave the host state untouched.
pub fn handle_effect(
    effect: &Effect,
    state: &mut HostState,
    session: &Session<'_>,
    env: &HandlerEnv<'_>,
) -> Handled {
    if !session.mode.allows(effect) {
        return Handled::Resume(EffectResponse::err(
            ErrorCode::TypeError,
            format!(
                "{} is not available in {} mode",
                effect.kind(),
                session.mode.name()
            ),
        ));
    }
    let block = session.block;
    let r = match effect {
        Effect::Lookup { var } => {
            if !block.inputs.iter().any(|x| x.as_str() == var) {
                EffectResponse::err(
                    ErrorCode::ForbiddenVar,
                    format!("variable '{var}' is not readable here"),
                )
            } else {
                match state.env.lookup(var) {
                    Some(v) => EffectResponse::Ok(serialize(v)),
                    None => EffectResponse::err(
                        ErrorCode::UndefinedVar,
                        format!("variable '{var}' is undefined"),
                    ),
                }
            }
        }
        Effect::Assign { var, value } => {
            let writable = var == THOUGHT_VAR
                || block
                    .outputs
                    .iter()
                    .chain(&block.inputs)
                    .any(|x| x.as_str() == var);
            if !writable {
                EffectResponse::err(
                    ErrorCode::ForbiddenVar,
                    format!("variable '{var}' is not writable here"),
                )
            } else {
                match reify_alloc(value, &mut state.heap) {
                    Ok(v) => {
                        state.env.bind(var.clone(), v);
                        EffectResponse::Ok(WireValue::Null)
                    }
                    Err(e) => wire_err(e),
                }
            }
        }
        Effect::Deref { reference } => match expect_ref(reference, state) {
            Ok(a) => EffectResponse::Ok(serialize_cell(state.heap.get(a).expect("live"))),
            Err(r) => r,
        },
        Effect::Ref { value } => match reify_cell(value, &mut state.heap) {
            Ok(cell) => EffectResponse::Ok(WireValue::Ref(state.heap.alloc(cell).0)),
            Err(e) => wire_err(e),
        },
        Effect::Set { addr, value } => match expect_ref(addr, state) {
            Err(r) => r,
            Ok(a) => match reify_cell(value, &mut state.heap) {
                Ok(cell) => {
                    state.heap.set(a, cell).expect("live");
                    EffectResponse::Ok(WireValue::Null)
                }
                Err(e) => wire_err(e),
            },
        },
        Effect::Goto { label, value } => {
            let Some(l) = session.labels.iter().find(|l| l.as_str() == label) else {
                return Handled::Resume(EffectResponse::err(
                    ErrorCode::BadLabel,
                    format!("label '{label}' is not available here"),
                ));
            };
            match value {
                Some(_) if !l.kind().takes_payload() => EffectResponse::err(
                    ErrorCode::TypeError,
                    format!("label '{label}' cannot carry a value"),
                ),
                None => return Handled::Transfer(l.clone(), None),
                Some(w) => match reify_alloc(w, &mut state.heap) {
                    Ok(v) => return Handled::Transfer(l.clone(), Some(v)),
                    Err(e) => wire_err(e),
                },
            }
        }
        Effect::Call { tool, arg } => match env.tools.get(tool) {
            None => EffectResponse::err(ErrorCode::TypeError, format!("unknown tool '{tool}'")),
            Some(t) => match (t.func)(arg) {
                Ok(w) => EffectResponse::Ok(w),
                Err(msg) => EffectResponse::err(ErrorCode::EvalError, format!("{tool}: {msg}")),
            },
        },
        Effect::SharedEval { src } => shared_eval(src, state, env),
    };
    Handled::Resume(r)
}

fn shared_eval(src: &str, state: &mut HostState, env: &HandlerEnv<'_>) -> EffectResponse {
    let expr = match crate::host::parse_expression(src, env.functions) {
        Ok(e) => e,
        Err(e) => return EffectResponse::err(ErrorCode::EvalError, e.to_string()),
    };
    let saved_env = state.env.clone();
    let saved_heap = state.heap.clone();
    let saved_control = state.control.clone();
    let limits = Limits {
        max_steps: Some(env.config.eval_step_limit),
        io: false,
        ..Limits::default()
    };
    match Machine::new(env.functions, state, None, limits).eval(&expr) {
        Ok(v) => EffectResponse::Ok(serialize(&v)),
        Err(fault) => {
            state.env = saved_env;
            state.heap = saved_heap;
            state.control = saved_control;
            let msg = match fault {
                Fault::Runtime { error, .. } => error.to_string(),
                other => other.to_string(),
            };
            EffectResponse::err(ErrorCode::EvalError, msg)
        }
    }
}

/// Checks output completeness for a `Return`. On success the block frame
/// is merged and the reified return value produced.
pub fn finalize_session(
    session: &mut Session<'_>,
    w: &WireValue,
    state: &mut HostState,
) -> Result<crate::host::Value, EffectResponse> {
    if session.mode.checks_outputs() {
        let frame = state.env.frames().get(session.frame_depth - 1);
        let missing: Vec<&str> = session
            .block
            .outputs
            .iter()
            .map(|x| x.as_str())
            .filter(|x| !frame.is_some_and(|f| f.contains_key(*x)))
            .collect();
        if !missing.is_empty() {
            let msg = missing
                .iter()
                .map(|x| format!("output variable {x} undefined"))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(EffectResponse::err(ErrorCode::UndefinedVar, msg));
        }
    }
    let value = reify_alloc(w, &mut state.heap).map_err(wire_err)?;
    let frame = close_frame(session, state);
    for x in &session.block.outputs {
        if let Some(v) = frame.get(x.as_str()) {
            if !state.env.rebind(x.as_str(), v.clone()) {
                state.env.bind(x.to_string(), v.clone());
            }
        }
    }
    session.status = SessionStatus::Finished;
    Ok(value)
}

fn close_frame(session: &Session<'_>, state: &mut HostState) -> Frame {
    let frame = state
        .env
        .frames()
        .get(session.frame_depth - 1)
        .cloned()
        .unwrap_or_default();
    state.env.truncate(session.frame_depth - 1);
    frame
}

/// Runs one natural block to completion, transfer or failure. The session
/// record is returned in every case.
pub fn run_natural_block(
    block: &NaturalBlock,
    labels: IndexSet<LabelName>,
    state: &mut HostState,
    agent: &mut dyn Agent,
    mode: HandlerMode,
    env: &HandlerEnv<'_>,
) -> (Result<BlockOutcome, Fault>, SessionRecord) {
    let fault_block = block.id.clone();
    let eager_vars = match build_eager_context(block, state) {
        Ok(v) => v,
        Err(error) => {
            let record = SessionRecord {
                block_id: block.id.0.clone(),
                mode,
                entries: vec![],
                terminal: None,
                status: SessionStatus::Failed,
            };
            return (
                Err(Fault::Runtime {
                    error,
                    at: Some(block.span),
                }),
                record,
            );
        }
    };
    let ctx = AgentContext {
        block_id: block.id.0.clone(),
        text: block.text.clone(),
        mode,
        inputs: block.inputs.iter().map(|x| x.to_string()).collect(),
        outputs: block.outputs.iter().map(|x| x.to_string()).collect(),
        eager_vars: if env.config.eager { eager_vars } else { vec![] },
        labels: labels.iter().map(|l| l.to_string()).collect(),
        tools: if mode == HandlerMode::Tools {
            env.tools.infos()
        } else {
            vec![]
        },
        max_effects: env.config.max_effects,
        history: vec![],
        format_error: None,
    };
    state.env.push(Frame::new());
    let mut session = Session {
        block,
        labels,
        mode,
        ctx,
        effects_used: 0,
        agent_calls: 0,
        finalize_failures: 0,
        terminal: None,
        status: SessionStatus::Running,
        frame_depth: state.env.depth(),
    };
    let result = drive(&mut session, state, agent, env);
    if session.status == SessionStatus::Running {
        session.status = SessionStatus::Failed;
    }
    if state.env.depth() >= session.frame_depth {
        state.env.truncate(session.frame_depth - 1);
    }
    let record = SessionRecord {
        block_id: block.id.0.clone(),
        mode,
        entries: std::mem::take(&mut session.ctx.history),
        terminal: session.terminal.take(),
        status: session.status,
    };
    (
        result.map_err(|e| match e {
            Stop::Fault(f) => f,
            Stop::Agent(error) => Fault::Agent {
                block: fault_block.clone(),
                error,
            },
        }),
        record,
    )
}

enum Stop {
    Fault(Fault),
    Agent(AgentError),
}

fn drive(
    session: &mut Session<'_>,
    state: &mut HostState,
    agent: &mut dyn Agent,
    env: &HandlerEnv<'_>,
) -> Result<BlockOutcome, Stop> {
    let start = Instant::now();
    let config = env.config;
    let block_id = session.block.id.clone();
    let timed_out = || {
        (start.elapsed() > config.timeout).then(|| {
            Stop::Fault(Fault::Timeout {
                block: block_id.clone(),
                limit: config.timeout,
            })
        })
    };
    agent.begin_session(&session.ctx).map_err(Stop::Agent)?;
    let mut malformed = 0;
    loop {
        if let Some(t) = timed_out() {
            return Err(t);
        }
        session.agent_calls += 1;
        let step = agent.next_step(&session.ctx);
        if let Some(t) = timed_out() {
            return Err(t);
        }
        let step = match step {
            Ok(step) => {
                malformed = 0;
                session.ctx.format_error = None;
                step
            }
            Err(AgentError::Malformed(msg)) if malformed < config.max_malformed => {
                malformed += 1;
                session.ctx.format_error = Some(msg);
                continue;
            }
            Err(e) => return Err(Stop::Agent(e)),
        };
        match &step {
            AgentStep::Emit(effect) => {
                session.effects_used += 1;
                if session.effects_used > config.max_effects {
                    return Err(Stop::Fault(Fault::Budget {
                        block: session.block.id.clone(),
                        limit: config.max_effects,
                    }));
                }
                match handle_effect(effect, state, session, env) {
                    Handled::Resume(response) => {
                        session.ctx.history.push(TraceEntry {
                            effect: step,
                            response,
                        });
                    }
                    Handled::Transfer(label, payload) => {
                        close_frame(session, state);
                        session.status = SessionStatus::Cancelled;
                        session.terminal = Some(step);
                        return Ok(BlockOutcome::Transfer { label, payload });
                    }
                }
            }
            AgentStep::Finish(w) => match finalize_session(session, w, state) {
                Ok(v) => {
                    session.terminal = Some(step);
                    return Ok(BlockOutcome::Completed(v));
                }
                Err(response) => {
                    let incomplete = matches!(
                        response,
                        EffectResponse::Err {
                            code: ErrorCode::UndefinedVar,
                            ..
                        }
                    );
                    if incomplete {
                        session.finalize_failures += 1;
                        if session.finalize_failures > config.max_finalize_retries {
                            let msg = match &response {
                                EffectResponse::Err { message, .. } => message.clone(),
                                _ => unreachable!(),
                            };
                            session.ctx.history.push(TraceEntry {
                                effect: step,
                                response,
                            });
                            return Err(Stop::Agent(AgentError::Incomplete(msg)));
                        }
                    }
                    session.ctx.history.push(TraceEntry {
                        effect: step,
                        response,
                    });
                }
            },
        }
    }
}

/// Drives natural blocks for the host machine and collects their traces.
pub struct NaturalRuntime<'p, 'a> {
    functions: &'p IndexMap<String, FunctionDef>,
    labels: HashMap<BlockId, IndexSet<LabelName>>,
    agent: &'a mut dyn Agent,
    mode: HandlerMode,
    tools: &'p ToolRegistry,
    config: NfiConfig,
    pub sessions: Vec<SessionRecord>,
}

impl<'p, 'a> NaturalRuntime<'p, 'a> {
    pub fn new(
        program: &'p Program,
        agent: &'a mut dyn Agent,
        mode: HandlerMode,
        tools: &'p ToolRegistry,
        config: NfiConfig,
    ) -> Self {
        let labels = program
            .natural_blocks()
            .into_iter()
            .map(|b| {
                let mut ls = enclosing_labels(program, &b.id).expect("block comes from program");
                ls.insert(LabelName::raise());
                (b.id.clone(), ls)
            })
            .collect();
        NaturalRuntime {
            functions: &program.functions,
            labels,
            agent,
            mode,
            tools,
            config,
            sessions: Vec::new(),
        }
    }

    /// Effects emitted across all sessions so far.
    pub fn effect_count(&self) -> usize {
        self.sessions
            .iter()
            .map(|s| {
                s.entries
                    .iter()
                    .filter(|e| matches!(e.effect, AgentStep::Emit(_)))
                    .count()
                    + usize::from(matches!(s.terminal, Some(AgentStep::Emit(_))))
            })
            .sum()
    }
}

impl NaturalDriver for NaturalRuntime<'_, '_> {
    fn run_block(
        &mut self,
        block: &NaturalBlock,
        state: &mut HostState,
    ) -> Result<BlockOutcome, Fault> {
        let labels = self.labels.get(&block.id).cloned().unwrap_or_default();
        let env = HandlerEnv {
            functions: self.functions,
            tools: self.tools,
            config: self.config,
        };
        let (result, record) = run_natural_block(block, labels, state, self.agent, self.mode, &env);
        self.sessions.push(record);
        match result? {
            BlockOutcome::Transfer { label, payload } if label.kind() == LabelKind::Raise => {
                let shown = payload.map(|v| state.display(&v)).unwrap_or_default();
                Err(Fault::Runtime {
                    error: RuntimeError::Raised(shown),
                    at: Some(block.span),
                })
            }
            outcome => Ok(outcome),
        }
    }
}

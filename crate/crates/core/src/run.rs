//! Whole-program execution.

use std::time::{Duration, Instant};

use serde_json::json;

use crate::agent::{Agent, AgentContext};
use crate::error::{AgentError, Fault};
use crate::host::machine::{Limits, Machine};
use crate::host::{HostState, InputSource, Program, Value};
use crate::nfi::{AgentStep, HandlerMode, NaturalRuntime, NfiConfig, ToolRegistry};
use crate::trace::{program_hash, sha256_hex, TraceFile, TraceHeader};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: HandlerMode,
    pub nfi: NfiConfig,
    pub limits: Limits,
    pub tools: ToolRegistry,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: HandlerMode::Shared,
            nfi: NfiConfig::default(),
            limits: Limits::default(),
            tools: ToolRegistry::standard(),
        }
    }
}

impl RunOptions {
    /// Digest of the settings that influence agent-visible behaviour.
    pub fn digest(&self) -> String {
        let j = json!({
            "mode": self.mode,
            "max_effects": self.nfi.max_effects,
            "eager": self.nfi.eager,
            "max_malformed": self.nfi.max_malformed,
            "max_finalize_retries": self.nfi.max_finalize_retries,
            "tools": self.tools.infos(),
        });
        sha256_hex(j.to_string().as_bytes())
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub outcome: Result<Value, Fault>,
    pub stdout: String,
    pub trace: TraceFile,
    pub effects: usize,
    pub agent_calls: usize,
    pub wall_time: Duration,
    /// Host state at the end of the run.
    pub state: HostState,
}

impl RunResult {
    pub fn value(&self) -> Option<&Value> {
        self.outcome.as_ref().ok()
    }

    pub fn display_value(&self) -> Option<String> {
        self.value().map(|v| self.state.display(v))
    }
}

struct Counting<'a> {
    inner: &'a mut dyn Agent,
    calls: usize,
}

impl Agent for Counting<'_> {
    fn next_step(&mut self, ctx: &AgentContext) -> Result<AgentStep, AgentError> {
        self.calls += 1;
        self.inner.next_step(ctx)
    }

    fn begin_session(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.inner.begin_session(ctx)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

/// Runs `program` over `state` (which supplies input and output).
pub fn run(
    program: &Program,
    mut state: HostState,
    agent: &mut dyn Agent,
    opts: &RunOptions,
) -> RunResult {
    let start = Instant::now();
    let mut counting = Counting {
        inner: agent,
        calls: 0,
    };
    let mut runtime = NaturalRuntime::new(program, &mut counting, opts.mode, &opts.tools, opts.nfi);
    let outcome = Machine::new(
        &program.functions,
        &mut state,
        Some(&mut runtime),
        opts.limits,
    )
    .eval(&program.body);
    let effects = runtime.effect_count();
    let sessions = std::mem::take(&mut runtime.sessions);
    drop(runtime);
    let trace = TraceFile {
        header: TraceHeader {
            program: program_hash(program),
            mode: opts.mode,
            config: opts.digest(),
        },
        sessions,
    };
    RunResult {
        outcome,
        stdout: state.out.take(),
        trace,
        effects,
        agent_calls: counting.calls,
        wall_time: start.elapsed(),
        state,
    }
}

/// Runs with scripted input lines and captured output.
pub fn run_lines<I, S>(
    program: &Program,
    lines: I,
    agent: &mut dyn Agent,
    opts: &RunOptions,
) -> RunResult
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    run(
        program,
        HostState::new(InputSource::lines(lines)),
        agent,
        opts,
    )
}

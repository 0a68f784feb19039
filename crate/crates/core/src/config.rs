//! Run configuration shared by `njr run` and `njr bench`.

use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::agent::{Agent, LlmAgent, LlmConfig, ReplayAgent, Script, ScriptedAgent};
use crate::error::RunError;
use crate::host::{parse_program, HostState, InputSource, Output, Program};
use crate::nfi::{HandlerMode, NfiConfig, ToolRegistry};
use crate::run::{run, RunOptions, RunResult};
use crate::trace::cache::DEFAULT_CACHE_FILE;
use crate::trace::{CacheStore, CachingAgent, TraceFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Scripted,
    Replay,
    Llm,
}

impl AgentKind {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "scripted" => Some(AgentKind::Scripted),
            "replay" => Some(AgentKind::Replay),
            "llm" => Some(AgentKind::Llm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StdinSource {
    /// No input; `input()` fails.
    Empty,
    /// Lines of a file, echoed into the transcript.
    File(PathBuf),
    /// The process's own standard input.
    Terminal,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub mode: HandlerMode,
    pub max_effects: usize,
    pub timeout: Duration,
    pub eager: bool,
    pub cache: bool,
    pub script: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub model: String,
    pub stdin: StdinSource,
    /// Mirror program output to the process's stdout as it happens.
    pub live_output: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            agent: AgentKind::Scripted,
            mode: HandlerMode::Shared,
            max_effects: 300,
            timeout: Duration::from_secs(1000),
            eager: true,
            cache: false,
            script: None,
            trace: None,
            trace_out: None,
            cache_path: None,
            model: "gpt-4o-mini".into(),
            stdin: StdinSource::Empty,
            live_output: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.max_effects < 1 {
            return Err(RunError::Usage("--max-effects must be at least 1".into()));
        }
        if self.timeout.is_zero() {
            return Err(RunError::Usage("--timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            mode: self.mode,
            nfi: NfiConfig {
                max_effects: self.max_effects,
                timeout: self.timeout,
                eager: self.eager,
                ..NfiConfig::default()
            },
            tools: ToolRegistry::standard(),
            ..RunOptions::default()
        }
    }

    pub fn cache_store(&self) -> Result<CacheStore, RunError> {
        let path = self
            .cache_path
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_FILE));
        CacheStore::open(path).map_err(|e| RunError::Usage(e.to_string()))
    }

    pub fn build_agent(&self) -> Result<Box<dyn Agent>, RunError> {
        Ok(match self.agent {
            AgentKind::Scripted => {
                let script = match &self.script {
                    Some(p) => Script::load(p)
                        .map_err(|e| RunError::Usage(format!("{}: {e}", p.display())))?,
                    None => Script::default(),
                };
                Box::new(ScriptedAgent::new(script))
            }
            AgentKind::Replay => {
                let path = self
                    .trace
                    .as_ref()
                    .ok_or_else(|| RunError::Usage("--agent replay needs --trace".into()))?;
                let file = TraceFile::load(path)
                    .map_err(|e| RunError::Usage(format!("{}: {e}", path.display())))?;
                Box::new(ReplayAgent::new(file.sessions))
            }
            AgentKind::Llm => {
                let cfg = LlmConfig::from_env(self.model.clone())
                    .map_err(|e| RunError::Usage(e.to_string()))?;
                Box::new(LlmAgent::new(cfg).map_err(|e| RunError::Usage(e.to_string()))?)
            }
        })
    }

    fn host_state(&self) -> Result<HostState, RunError> {
        let input = match &self.stdin {
            StdinSource::Empty => InputSource::empty(),
            StdinSource::File(p) => {
                InputSource::lines(std::fs::read_to_string(p)?.lines().map(str::to_owned))
            }
            StdinSource::Terminal => {
                InputSource::Reader(Box::new(BufReader::new(std::io::stdin())))
            }
        };
        let mut state = HostState::new(input);
        if self.live_output {
            state.out = Output::with_live(Box::new(std::io::stdout()));
        }
        Ok(state)
    }
}

/// Outcome of [`execute`] plus cache statistics.
#[derive(Debug)]
pub struct Execution {
    pub result: RunResult,
    /// Steps answered by the cache (0 when caching is off).
    pub cache_hits: usize,
    /// Calls that reached the underlying agent.
    pub inner_agent_calls: usize,
}

pub fn load_program(path: &Path) -> Result<Program, RunError> {
    let source = std::fs::read_to_string(path)?;
    Ok(parse_program(&source)?)
}

/// Parses and runs a program according to `config`. When caching is on and
/// no `store` is supplied, the store named by the config is opened.
pub fn execute(
    config: &RunConfig,
    program_path: &Path,
    store: Option<&CacheStore>,
) -> Result<Execution, RunError> {
    config.validate()?;
    let program = load_program(program_path)?;
    execute_program(config, &program, store)
}

pub fn execute_program(
    config: &RunConfig,
    program: &Program,
    store: Option<&CacheStore>,
) -> Result<Execution, RunError> {
    let state = config.host_state()?;
    let opts = config.options();
    let agent = config.build_agent()?;
    let opened;
    let store = match (config.cache, store) {
        (false, _) => None,
        (true, Some(s)) => Some(s),
        (true, None) => {
            opened = config.cache_store()?;
            Some(&opened)
        }
    };
    let execution = match store {
        None => {
            let mut agent = agent;
            let result = run(program, state, &mut agent, &opts);
            let calls = result.agent_calls;
            Execution {
                result,
                cache_hits: 0,
                inner_agent_calls: calls,
            }
        }
        Some(store) => {
            let mut caching = CachingAgent::new(agent, store);
            let result = run(program, state, &mut caching, &opts);
            Execution {
                result,
                cache_hits: caching.hits,
                inner_agent_calls: caching.inner_calls,
            }
        }
    };
    if let Some(path) = &config.trace_out {
        let mut f = std::fs::File::create(path)?;
        f.write_all(execution.result.trace.to_jsonl().as_bytes())?;
    }
    Ok(execution)
}

//! Replays recorded sessions, checking that the host answers every effect
//! exactly as it did when the trace was recorded.

use super::{Agent, AgentContext, AgentError};
use crate::nfi::{AgentStep, SessionRecord};

#[derive(Debug, Clone)]
pub struct ReplayAgent {
    sessions: Vec<SessionRecord>,
    /// Index of the session in progress; `None` before the first.
    current: Option<usize>,
}

impl ReplayAgent {
    pub fn new(sessions: Vec<SessionRecord>) -> Self {
        ReplayAgent {
            sessions,
            current: None,
        }
    }

    fn session(&self) -> Result<&SessionRecord, AgentError> {
        self.current
            .and_then(|i| self.sessions.get(i))
            .ok_or(AgentError::TraceExhausted { step: 0 })
    }
}

impl Agent for ReplayAgent {
    fn begin_session(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        let next = self.current.map_or(0, |i| i + 1);
        self.current = Some(next);
        let recorded = self.session()?;
        if recorded.block_id != ctx.block_id {
            return Err(AgentError::TraceMismatch {
                step: 0,
                recorded: format!("session for block {}", recorded.block_id),
                live: format!("session for block {}", ctx.block_id),
            });
        }
        Ok(())
    }

    fn next_step(&mut self, ctx: &AgentContext) -> Result<AgentStep, AgentError> {
        let recorded = self.session()?;
        let p = ctx.history.len();
        if p > 0 {
            let live = ctx.history[p - 1].to_canonical();
            let want = recorded
                .entries
                .get(p - 1)
                .map(|e| e.to_canonical())
                .ok_or(AgentError::TraceExhausted { step: p - 1 })?;
            if live != want {
                return Err(AgentError::TraceMismatch {
                    step: p - 1,
                    recorded: want,
                    live,
                });
            }
        }
        match recorded.entries.get(p) {
            Some(entry) => Ok(entry.effect.clone()),
            None if p == recorded.entries.len() => recorded
                .terminal
                .clone()
                .ok_or(AgentError::TraceExhausted { step: p }),
            None => Err(AgentError::TraceExhausted { step: p }),
        }
    }

    fn fingerprint(&self) -> String {
        "replay".into()
    }
}

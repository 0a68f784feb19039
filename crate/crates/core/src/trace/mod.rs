//! Trace files: one JSON object per line.
//!
//! ```text
//! {"njr_trace":1,"program":"<sha256>","mode":"shared","config":"<sha256>"}
//! {"session":{"block_id":"n0","mode":"shared"}}
//! {"effect":{...},"response":{...}}
//! {"terminal":{...},"status":"cancelled"}
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::host::Program;
use crate::nfi::{AgentStep, HandlerMode, SessionRecord, SessionStatus, TraceEntry};

pub mod cache;

pub use cache::{CacheStore, CachingAgent};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub program: String,
    pub mode: HandlerMode,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub sessions: Vec<SessionRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {message}")]
    Format { line: usize, message: String },
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the program's canonical form; layout and comments do not count.
pub fn program_hash(program: &Program) -> String {
    sha256_hex(program.canonical().as_bytes())
}

impl TraceFile {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |j: Json| {
            out.push_str(&j.to_string());
            out.push('\n');
        };
        line(json!({
            "njr_trace": FORMAT_VERSION,
            "program": self.header.program,
            "mode": self.header.mode,
            "config": self.header.config,
        }));
        for s in &self.sessions {
            line(json!({"session": {"block_id": s.block_id, "mode": s.mode}}));
            for e in &s.entries {
                line(serde_json::to_value(e).expect("entries serialize"));
            }
            line(json!({
                "terminal": s.terminal.as_ref().map(AgentStep::to_json),
                "status": s.status,
            }));
        }
        out
    }

    pub fn write(&self, mut w: impl Write) -> Result<(), TraceError> {
        w.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self, TraceError> {
        let mut header = None;
        let mut sessions: Vec<SessionRecord> = Vec::new();
        let mut open = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            let fail = |message: String| TraceError::Format { line: n, message };
            if line.trim().is_empty() {
                continue;
            }
            let j: Json = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
            if header.is_none() {
                if j.get("njr_trace").and_then(Json::as_u64) != Some(u64::from(FORMAT_VERSION)) {
                    return Err(fail("missing or unsupported trace header".into()));
                }
                header = Some(serde_json::from_value(j).map_err(|e| fail(e.to_string()))?);
                continue;
            }
            if let Some(s) = j.get("session") {
                if open {
                    return Err(fail("session started before the previous one ended".into()));
                }
                let block_id = s
                    .get("block_id")
                    .and_then(Json::as_str)
                    .ok_or_else(|| fail("session without block_id".into()))?;
                let mode = serde_json::from_value(s.get("mode").cloned().unwrap_or(Json::Null))
                    .map_err(|e| fail(e.to_string()))?;
                sessions.push(SessionRecord {
                    block_id: block_id.to_string(),
                    mode,
                    entries: vec![],
                    terminal: None,
                    status: SessionStatus::Running,
                });
                open = true;
            } else if j.get("terminal").is_some() {
                let s = sessions
                    .last_mut()
                    .filter(|_| open)
                    .ok_or_else(|| fail("terminal outside a session".into()))?;
                s.terminal = match &j["terminal"] {
                    Json::Null => None,
                    t => Some(AgentStep::from_json(t).map_err(|e| fail(e.to_string()))?),
                };
                s.status = serde_json::from_value(j.get("status").cloned().unwrap_or(Json::Null))
                    .map_err(|e| fail(e.to_string()))?;
                open = false;
            } else {
                let s = sessions
                    .last_mut()
                    .filter(|_| open)
                    .ok_or_else(|| fail("entry outside a session".into()))?;
                s.entries.push(
                    serde_json::from_value::<TraceEntry>(j).map_err(|e| fail(e.to_string()))?,
                );
            }
        }
        if open {
            return Err(TraceError::Format {
                line: 0,
                message: "last session has no terminal line".into(),
            });
        }
        let header = header.ok_or(TraceError::Format {
            line: 1,
            message: "empty trace file".into(),
        })?;
        Ok(TraceFile { header, sessions })
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }
}

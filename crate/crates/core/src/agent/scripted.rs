//! Deterministic agent driven by a JSON script.
//!
//! ```json
//! {"blocks": {"n0": [{"guard": "Exit, please.", "steps": [...]}, {"guard": null, "steps": [...]}]}}
//! ```
//!
//! At step position `p` (the number of prior effects in the session), the
//! first rule whose guard occurs in the context haystack and which has a
//! step at `p` fires. The haystack is the serialized eager variables plus
//! every prior response. A step may contain `{"$resp": k, "path": [...]}`,
//! which is replaced by the Ok value of history entry `k`, optionally
//! followed into lists and records.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use super::{Agent, AgentContext, AgentError};
use crate::host::ast::BlockId;
use crate::nfi::{AgentStep, WireValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub guard: Option<String>,
    pub steps: Vec<Json>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub blocks: IndexMap<String, Vec<Rule>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("reading script: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing script: {0}")]
    Json(#[from] serde_json::Error),
}

impl Script {
    pub fn from_json_str(text: &str) -> Result<Self, ScriptError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    script: Script,
    digest: String,
}

impl ScriptedAgent {
    pub fn new(script: Script) -> Self {
        let text = serde_json::to_string(&script).expect("scripts serialize");
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        ScriptedAgent { script, digest }
    }
}

fn haystack(ctx: &AgentContext) -> String {
    let mut out = serde_json::to_string(&ctx.eager_vars).expect("eager vars serialize");
    for entry in &ctx.history {
        out.push('\n');
        out.push_str(&entry.response.to_json().to_string());
    }
    out
}

fn resolve(template: &Json, ctx: &AgentContext) -> Result<Json, AgentError> {
    match template {
        Json::Object(obj) if obj.contains_key("$resp") => {
            let k = obj["$resp"]
                .as_u64()
                .ok_or_else(|| AgentError::Malformed(format!("bad placeholder {template}")))?
                as usize;
            let value = ctx
                .history
                .get(k)
                .and_then(|e| e.response.ok_value())
                .ok_or_else(|| {
                    AgentError::Malformed(format!("placeholder refers to missing response {k}"))
                })?;
            let path: Vec<String> = match obj.get("path") {
                None => vec![],
                Some(Json::Array(items)) => items
                    .iter()
                    .map(|i| match i {
                        Json::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect(),
                Some(other) => {
                    return Err(AgentError::Malformed(format!(
                        "bad placeholder path {other}"
                    )))
                }
            };
            let found: &WireValue = value.at_path(&path).ok_or_else(|| {
                AgentError::Malformed(format!("path {path:?} not found in response {k}"))
            })?;
            Ok(found.to_json())
        }
        Json::Object(obj) => Ok(Json::Object(
            obj.iter()
                .map(|(key, v)| Ok((key.clone(), resolve(v, ctx)?)))
                .collect::<Result<_, AgentError>>()?,
        )),
        Json::Array(items) => Ok(Json::Array(
            items
                .iter()
                .map(|i| resolve(i, ctx))
                .collect::<Result<_, _>>()?,
        )),
        other => Ok(other.clone()),
    }
}

impl Agent for ScriptedAgent {
    fn next_step(&mut self, ctx: &AgentContext) -> Result<AgentStep, AgentError> {
        let position = ctx.history.len();
        let no_rule = || AgentError::NoRule {
            block: BlockId(ctx.block_id.clone()),
            position,
        };
        let rules = self.script.blocks.get(&ctx.block_id).ok_or_else(no_rule)?;
        let hay = haystack(ctx);
        let rule = rules
            .iter()
            .filter(|r| r.guard.as_deref().is_none_or(|g| hay.contains(g)))
            .find(|r| r.steps.len() > position)
            .ok_or_else(no_rule)?;
        let step = resolve(&rule.steps[position], ctx)?;
        AgentStep::from_json(&step).map_err(|e| AgentError::Malformed(e.to_string()))
    }

    fn fingerprint(&self) -> String {
        format!("scripted:{}", self.digest)
    }
}

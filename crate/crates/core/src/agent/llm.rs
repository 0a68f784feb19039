//! Agent backed by a chat-completions endpoint with tool calling.
//!
//! Every effect kind is exposed as its own tool. The session history is
//! replayed to the model as tool-call/tool-result pairs on every request,
//! so the agent itself keeps no conversation state.

use std::time::Duration;

use serde_json::{json, Map, Value as Json};
use sha2::{Digest, Sha256};

use super::{Agent, AgentContext, AgentError};
use crate::nfi::{AgentStep, Effect, EffectResponse, HandlerMode, WireValue};

pub const BASE_URL_VAR: &str = "NJR_LLM_BASE_URL";
pub const API_KEY_VAR: &str = "NJR_LLM_API_KEY";

/// Default system prompt. `{max_tool_calls}` is replaced by the budget.
pub const DEFAULT_SYSTEM_PROMPT: &str = "\
You execute a block of natural-language code that is embedded in a program. \
The program is paused while you work. You interact with it only through the \
tools provided; each tool call performs one operation on the running program \
and returns its result.

How to work:
1. Read the instructions in the block and the variable values already loaded for you.
2. Read any further state you need. Composite values (lists, records) are \
   references of the form {\"$ref\": n}; use deref to see their contents.
3. Carry out the instructions. Write variables with assign. Change lists and \
   records in place with set, so the rest of the program sees the change.
4. Finish. If the instructions say to break, continue, return or raise, call \
   goto with that label. Otherwise call done. Every variable listed as an \
   output must be assigned before done.

Rules:
- Values are JSON. Plain numbers, strings, booleans, null, arrays and objects \
  are accepted. References are {\"$ref\": n}.
- Never guess values you have not read.
- If a tool returns an error, fix the problem and try again. If done reports \
  an undefined output variable, assign it and call done again.
- You may use at most {max_tool_calls} tool calls.
- You may assign nj__thought to write down a plan.";

#[derive(Debug, Clone)]
pub struct LlmConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub system_prompt: String,
    pub attempts: usize,
    pub backoff: Duration,
    pub request_timeout: Duration,
}

impl LlmConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        LlmConfig {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
            attempts: 3,
            backoff: Duration::from_secs(1),
            request_timeout: Duration::from_secs(300),
        }
    }

    /// Endpoint and key from `NJR_LLM_BASE_URL` / `NJR_LLM_API_KEY`.
    pub fn from_env(model: impl Into<String>) -> Result<Self, AgentError> {
        let base = std::env::var(BASE_URL_VAR)
            .map_err(|_| AgentError::Transport(format!("{BASE_URL_VAR} is not set")))?;
        let mut cfg = LlmConfig::new(base, model);
        cfg.api_key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }
}

pub struct LlmAgent {
    config: LlmConfig,
    client: reqwest::blocking::Client,
    requests: usize,
}

impl LlmAgent {
    pub fn new(config: LlmConfig) -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        Ok(LlmAgent {
            config,
            client,
            requests: 0,
        })
    }

    /// HTTP requests sent so far, retries included.
    pub fn requests(&self) -> usize {
        self.requests
    }

    fn post(&mut self, body: &Json) -> Result<Json, AgentError> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let mut last = String::new();
        for attempt in 0..self.config.attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * (1 << (attempt - 1)));
            }
            self.requests += 1;
            let mut req = self.client.post(&url).json(body);
            if let Some(key) = &self.config.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp
                        .json::<Json>()
                        .map_err(|e| AgentError::Transport(e.to_string()));
                }
                Ok(resp) if resp.status().is_server_error() || resp.status().as_u16() == 429 => {
                    last = format!("HTTP {}", resp.status());
                }
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().unwrap_or_default();
                    return Err(AgentError::Transport(format!("HTTP {status}: {text}")));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(AgentError::Transport(format!(
            "{} attempts failed; last error: {last}",
            self.config.attempts
        )))
    }
}

/// Accepts plain JSON as well as the tagged wire encoding.
pub fn loose_wire(j: &Json) -> WireValue {
    match j {
        Json::Null => WireValue::Null,
        Json::Bool(b) => WireValue::Bool(*b),
        Json::Number(n) => match n.as_i64() {
            Some(i) => WireValue::Int(i),
            None => WireValue::Float(n.as_f64().unwrap_or(f64::NAN)),
        },
        Json::String(s) => WireValue::String(s.clone()),
        Json::Array(items) => WireValue::List(items.iter().map(loose_wire).collect()),
        Json::Object(obj) => WireValue::from_json(j).unwrap_or_else(|_| {
            WireValue::Record(
                obj.iter()
                    .map(|(k, v)| (k.clone(), loose_wire(v)))
                    .collect(),
            )
        }),
    }
}

fn ref_arg(j: Option<&Json>) -> Result<WireValue, String> {
    match j {
        Some(Json::Number(n)) => n
            .as_u64()
            .map(WireValue::Ref)
            .ok_or_else(|| format!("bad reference {n}")),
        Some(other) => Ok(loose_wire(other)),
        None => Err("missing argument 'ref'".into()),
    }
}

fn tool(name: &str, description: &str, props: Json, required: &[&str]) -> Json {
    json!({
        "type": "function",
        "function": {
            "name": name,
            "description": description,
            "parameters": {"type": "object", "properties": props, "required": required},
        }
    })
}

fn tool_specs(ctx: &AgentContext) -> Vec<Json> {
    let any = json!({"description": "any JSON value"});
    let done = tool(
        "done",
        "Finish the block. All output variables must be assigned first.",
        json!({"value": any}),
        &[],
    );
    match ctx.mode {
        HandlerMode::Isolated => vec![done],
        HandlerMode::Tools => ctx
            .tools
            .iter()
            .map(|t| tool(&t.name, &t.description, json!({"arg": any}), &["arg"]))
            .chain([done])
            .collect(),
        HandlerMode::Shared | HandlerMode::Eval => {
            let name = json!({"type": "string"});
            let reference = json!({"type": "integer", "description": "reference id"});
            let mut specs = vec![
                tool(
                    "lookup",
                    "Read a variable.",
                    json!({"name": name}),
                    &["name"],
                ),
                tool(
                    "assign",
                    "Bind a variable to a value.",
                    json!({"name": name, "value": any}),
                    &["name", "value"],
                ),
                tool(
                    "deref",
                    "Read the contents of a reference.",
                    json!({"ref": reference}),
                    &["ref"],
                ),
                tool(
                    "ref",
                    "Allocate a new reference holding a value.",
                    json!({"value": any}),
                    &["value"],
                ),
                tool(
                    "set",
                    "Overwrite the contents of a reference in place.",
                    json!({"ref": reference, "value": any}),
                    &["ref", "value"],
                ),
                tool(
                    "goto",
                    "Jump to a program label. Ends the block immediately.",
                    json!({"label": {"type": "string", "enum": ctx.labels}, "value": any}),
                    &["label"],
                ),
            ];
            if ctx.mode == HandlerMode::Eval {
                specs.push(tool(
                    "eval",
                    "Evaluate an expression of the host language over the program state.",
                    json!({"src": {"type": "string"}}),
                    &["src"],
                ));
            }
            specs.push(done);
            specs
        }
    }
}

/// Tool name and arguments for a step already taken.
fn step_to_call(step: &AgentStep) -> (String, Json) {
    let (name, args) = match step {
        AgentStep::Finish(w) => ("done", json!({"value": w.to_json()})),
        AgentStep::Emit(e) => match e {
            Effect::Lookup { var } => ("lookup", json!({"name": var})),
            Effect::Assign { var, value } => {
                ("assign", json!({"name": var, "value": value.to_json()}))
            }
            Effect::Deref { reference } => ("deref", json!({"ref": reference.to_json()})),
            Effect::Ref { value } => ("ref", json!({"value": value.to_json()})),
            Effect::Set { addr, value } => (
                "set",
                json!({"ref": addr.to_json(), "value": value.to_json()}),
            ),
            Effect::Goto { label, value } => {
                let mut m = Map::new();
                m.insert("label".into(), json!(label));
                if let Some(v) = value {
                    m.insert("value".into(), v.to_json());
                }
                ("goto", Json::Object(m))
            }
            Effect::Call { tool, arg } => return (tool.clone(), json!({"arg": arg.to_json()})),
            Effect::SharedEval { src } => ("eval", json!({"src": src})),
        },
    };
    (name.to_string(), args)
}

/// Maps a tool call from the model onto a step for the active mode.
fn call_to_step(name: &str, args: &Json, ctx: &AgentContext) -> Result<AgentStep, String> {
    let text = |k: &str| {
        args.get(k)
            .and_then(Json::as_str)
            .map(str::to_owned)
            .ok_or_else(|| format!("tool '{name}' needs a string argument '{k}'"))
    };
    let value = |k: &str| {
        args.get(k)
            .map(loose_wire)
            .ok_or_else(|| format!("tool '{name}' needs an argument '{k}'"))
    };
    if name == "done" {
        return Ok(AgentStep::Finish(
            args.get("value").map(loose_wire).unwrap_or(WireValue::Null),
        ));
    }
    let effect = match (ctx.mode, name) {
        (HandlerMode::Tools, _) if ctx.tools.iter().any(|t| t.name == name) => Effect::Call {
            tool: name.to_string(),
            arg: args.get("arg").map(loose_wire).unwrap_or(WireValue::Null),
        },
        (HandlerMode::Shared | HandlerMode::Eval, "lookup") => {
            Effect::Lookup { var: text("name")? }
        }
        (HandlerMode::Shared | HandlerMode::Eval, "assign") => Effect::Assign {
            var: text("name")?,
            value: value("value")?,
        },
        (HandlerMode::Shared | HandlerMode::Eval, "deref") => Effect::Deref {
            reference: ref_arg(args.get("ref"))?,
        },
        (HandlerMode::Shared | HandlerMode::Eval, "ref") => Effect::Ref {
            value: value("value")?,
        },
        (HandlerMode::Shared | HandlerMode::Eval, "set") => Effect::Set {
            addr: ref_arg(args.get("ref"))?,
            value: value("value")?,
        },
        (HandlerMode::Shared | HandlerMode::Eval, "goto") => Effect::Goto {
            label: text("label")?,
            value: args.get("value").filter(|v| !v.is_null()).map(loose_wire),
        },
        (HandlerMode::Eval, "eval") => Effect::SharedEval { src: text("src")? },
        _ => return Err(format!("unknown tool '{name}'")),
    };
    Ok(AgentStep::Emit(effect))
}

fn render_response(r: &EffectResponse) -> String {
    match r {
        EffectResponse::Ok(w) => w.to_canonical(),
        EffectResponse::Err { code, message } => format!("error ({code:?}): {message}"),
    }
}

fn render_task(ctx: &AgentContext) -> String {
    let list = |xs: &[String]| {
        if xs.is_empty() {
            "(none)".to_string()
        } else {
            xs.join(", ")
        }
    };
    let mut out = format!("Natural code (block {}):\n{}\n\n", ctx.block_id, ctx.text);
    out.push_str(&format!("Readable variables: {}\n", list(&ctx.inputs)));
    out.push_str(&format!(
        "Output variables to assign: {}\n",
        list(&ctx.outputs)
    ));
    if matches!(ctx.mode, HandlerMode::Shared | HandlerMode::Eval) {
        out.push_str(&format!("Labels: {}\n", list(&ctx.labels)));
    }
    if !ctx.eager_vars.is_empty() {
        out.push_str("\nLoaded variables:\n");
        for v in &ctx.eager_vars {
            out.push_str(&format!(
                "{} [type: {}]: {}",
                v.name,
                v.type_name,
                v.value.to_canonical()
            ));
            if let Some(p) = &v.preview {
                out.push_str(&format!(" ({p})"));
            }
            out.push('\n');
        }
    }
    out
}

/// Chat request body for a context; exposed for tests.
pub fn request_body(model: &str, system_prompt: &str, ctx: &AgentContext) -> Json {
    let system = system_prompt.replace("{max_tool_calls}", &ctx.max_effects.to_string());
    let mut messages = vec![
        json!({"role": "system", "content": system}),
        json!({"role": "user", "content": render_task(ctx)}),
    ];
    for (i, entry) in ctx.history.iter().enumerate() {
        let id = format!("call_{i}");
        let (name, args) = step_to_call(&entry.effect);
        messages.push(json!({
            "role": "assistant",
            "content": null,
            "tool_calls": [{"id": id, "type": "function", "function": {"name": name, "arguments": args.to_string()}}],
        }));
        messages.push(json!({"role": "tool", "tool_call_id": id, "content": render_response(&entry.response)}));
    }
    if let Some(err) = &ctx.format_error {
        messages.push(json!({
            "role": "user",
            "content": format!("Your last reply could not be used: {err}. Reply with exactly one tool call."),
        }));
    }
    json!({
        "model": model,
        "messages": messages,
        "tools": tool_specs(ctx),
        "tool_choice": "required",
    })
}

/// Extracts the first tool call of a chat-completions reply.
fn parse_reply(reply: &Json, ctx: &AgentContext) -> Result<AgentStep, AgentError> {
    let message = reply
        .pointer("/choices/0/message")
        .ok_or_else(|| AgentError::Transport(format!("unexpected reply shape: {reply}")))?;
    let Some(call) = message.pointer("/tool_calls/0/function") else {
        return Err(AgentError::Malformed(
            "the reply contained no tool call".into(),
        ));
    };
    let name = call.get("name").and_then(Json::as_str).unwrap_or_default();
    let args = match call.get("arguments") {
        Some(Json::String(s)) if s.trim().is_empty() => json!({}),
        Some(Json::String(s)) => serde_json::from_str(s).map_err(|e| {
            AgentError::Malformed(format!("arguments of '{name}' are not JSON: {e}"))
        })?,
        Some(obj @ Json::Object(_)) => obj.clone(),
        _ => json!({}),
    };
    call_to_step(name, &args, ctx).map_err(AgentError::Malformed)
}

impl Agent for LlmAgent {
    fn next_step(&mut self, ctx: &AgentContext) -> Result<AgentStep, AgentError> {
        let body = request_body(&self.config.model, &self.config.system_prompt, ctx);
        let reply = self.post(&body)?;
        parse_reply(&reply, ctx)
    }

    fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.config.model.as_bytes());
        h.update([0]);
        h.update(self.config.system_prompt.as_bytes());
        format!("llm:{}", hex::encode(h.finalize()))
    }
}

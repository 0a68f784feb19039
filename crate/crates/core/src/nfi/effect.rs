//! Effects, responses and agent steps, with their canonical JSON encoding.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value as Json};

use super::wire::WireValue;

/// A request from natural code to the host.
///
/// Names are kept as raw strings: an agent asking for an invalid name gets
/// an error response rather than being treated as malformed.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Lookup {
        var: String,
    },
    Assign {
        var: String,
        value: WireValue,
    },
    Deref {
        reference: WireValue,
    },
    Ref {
        value: WireValue,
    },
    Set {
        addr: WireValue,
        value: WireValue,
    },
    Goto {
        label: String,
        value: Option<WireValue>,
    },
    Call {
        tool: String,
        arg: WireValue,
    },
    SharedEval {
        src: String,
    },
}

impl Effect {
    pub fn kind(&self) -> &'static str {
        match self {
            Effect::Lookup { .. } => "Lookup",
            Effect::Assign { .. } => "Assign",
            Effect::Deref { .. } => "Deref",
            Effect::Ref { .. } => "Ref",
            Effect::Set { .. } => "Set",
            Effect::Goto { .. } => "Goto",
            Effect::Call { .. } => "Call",
            Effect::SharedEval { .. } => "SharedEval",
        }
    }
}

/// One agent step: an effect to perform, or the final `Return`.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentStep {
    Emit(Effect),
    Finish(WireValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    ForbiddenVar,
    UndefinedVar,
    DanglingRef,
    BadLabel,
    TypeError,
    EvalError,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EffectResponse {
    Ok(WireValue),
    Err { code: ErrorCode, message: String },
}

impl EffectResponse {
    pub fn err(code: ErrorCode, message: impl Into<String>) -> Self {
        EffectResponse::Err {
            code,
            message: message.into(),
        }
    }

    pub fn ok_value(&self) -> Option<&WireValue> {
        match self {
            EffectResponse::Ok(w) => Some(w),
            EffectResponse::Err { .. } => None,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            EffectResponse::Ok(w) => json!({ "ok": w.to_json() }),
            EffectResponse::Err { code, message } => {
                json!({ "err": { "code": code, "message": message } })
            }
        }
    }

    pub fn from_json(j: &Json) -> Result<Self, StepError> {
        let obj = j
            .as_object()
            .filter(|o| o.len() == 1)
            .ok_or_else(|| StepError::new(j))?;
        if let Some(w) = obj.get("ok") {
            return Ok(EffectResponse::Ok(
                WireValue::from_json(w).map_err(|_| StepError::new(j))?,
            ));
        }
        let err = obj
            .get("err")
            .and_then(Json::as_object)
            .ok_or_else(|| StepError::new(j))?;
        let code = err
            .get("code")
            .and_then(|c| serde_json::from_value(c.clone()).ok())
            .ok_or_else(|| StepError::new(j))?;
        let message = err
            .get("message")
            .and_then(Json::as_str)
            .ok_or_else(|| StepError::new(j))?;
        Ok(EffectResponse::err(code, message))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("not a valid step: {0}")]
pub struct StepError(pub String);

impl StepError {
    fn new(j: &Json) -> Self {
        StepError(j.to_string())
    }
}

impl AgentStep {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentStep::Emit(e) => e.kind(),
            AgentStep::Finish(_) => "Return",
        }
    }

    pub fn to_json(&self) -> Json {
        let mut m = Map::new();
        m.insert("kind".into(), Json::String(self.kind().into()));
        let mut put = |k: &str, v: Json| {
            m.insert(k.into(), v);
        };
        match self {
            AgentStep::Finish(w) => put("value", w.to_json()),
            AgentStep::Emit(e) => match e {
                Effect::Lookup { var } => put("var", json!(var)),
                Effect::Assign { var, value } => {
                    put("var", json!(var));
                    put("value", value.to_json());
                }
                Effect::Deref { reference } => put("ref", reference.to_json()),
                Effect::Ref { value } => put("value", value.to_json()),
                Effect::Set { addr, value } => {
                    put("addr", addr.to_json());
                    put("value", value.to_json());
                }
                Effect::Goto { label, value } => {
                    put("label", json!(label));
                    if let Some(v) = value {
                        put("value", v.to_json());
                    }
                }
                Effect::Call { tool, arg } => {
                    put("tool", json!(tool));
                    put("arg", arg.to_json());
                }
                Effect::SharedEval { src } => put("src", json!(src)),
            },
        }
        Json::Object(m)
    }

    pub fn from_json(j: &Json) -> Result<Self, StepError> {
        let bad = || StepError::new(j);
        let obj = j.as_object().ok_or_else(bad)?;
        let kind = obj.get("kind").and_then(Json::as_str).ok_or_else(bad)?;
        let allowed: &[&str] = match kind {
            "Lookup" => &["var"],
            "Assign" => &["var", "value"],
            "Deref" => &["ref"],
            "Ref" | "Return" => &["value"],
            "Set" => &["addr", "value"],
            "Goto" => &["label", "value"],
            "Call" => &["tool", "arg"],
            "SharedEval" => &["src"],
            _ => return Err(bad()),
        };
        if obj
            .keys()
            .any(|k| k != "kind" && !allowed.contains(&k.as_str()))
        {
            return Err(bad());
        }
        let text = |k: &str| {
            obj.get(k)
                .and_then(Json::as_str)
                .map(str::to_owned)
                .ok_or_else(bad)
        };
        let wire = |k: &str| {
            obj.get(k)
                .ok_or_else(bad)
                .and_then(|v| WireValue::from_json(v).map_err(|_| bad()))
        };
        let effect = match kind {
            "Return" => return Ok(AgentStep::Finish(wire("value")?)),
            "Lookup" => Effect::Lookup { var: text("var")? },
            "Assign" => Effect::Assign {
                var: text("var")?,
                value: wire("value")?,
            },
            "Deref" => Effect::Deref {
                reference: wire("ref")?,
            },
            "Ref" => Effect::Ref {
                value: wire("value")?,
            },
            "Set" => Effect::Set {
                addr: wire("addr")?,
                value: wire("value")?,
            },
            "Goto" => Effect::Goto {
                label: text("label")?,
                value: match obj.get("value") {
                    None => None,
                    Some(_) => Some(wire("value")?),
                },
            },
            "Call" => Effect::Call {
                tool: text("tool")?,
                arg: wire("arg")?,
            },
            _ => Effect::SharedEval { src: text("src")? },
        };
        Ok(AgentStep::Emit(effect))
    }
}

macro_rules! json_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                self.to_json().serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let j = Json::deserialize(d)?;
                <$ty>::from_json(&j).map_err(serde::de::Error::custom)
            }
        }
    };
}

json_serde!(AgentStep);
json_serde!(EffectResponse);

/// One resumed step of a session and the host's answer to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub effect: AgentStep,
    pub response: EffectResponse,
}

impl TraceEntry {
    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("trace entries always serialize")
    }
}

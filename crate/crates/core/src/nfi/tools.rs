use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;

use super::wire::WireValue;

pub type ToolFn = Arc<dyn Fn(&WireValue) -> Result<WireValue, String> + Send + Sync>;

#[derive(Clone)]
pub struct Tool {
    pub description: String,
    pub func: ToolFn,
}

/// Name and description of a registered tool, as shown to agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("tool '{0}' is already registered")]
pub struct DuplicateTool(pub String);

/// Host functions callable from natural code in tool-use mode.
#[derive(Clone, Default)]
pub struct ToolRegistry {
    tools: IndexMap<String, Tool>,
}

impl fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.tools.keys()).finish()
    }
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<F>(
        &mut self,
        name: impl Into<String>,
        description: impl Into<String>,
        func: F,
    ) -> Result<(), DuplicateTool>
    where
        F: Fn(&WireValue) -> Result<WireValue, String> + Send + Sync + 'static,
    {
        let name = name.into();
        if self.tools.contains_key(&name) {
            return Err(DuplicateTool(name));
        }
        self.tools.insert(
            name,
            Tool {
                description: description.into(),
                func: Arc::new(func),
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tool> {
        self.tools.get(name)
    }

    pub fn infos(&self) -> Vec<ToolInfo> {
        self.tools
            .iter()
            .map(|(name, t)| ToolInfo {
                name: name.clone(),
                description: t.description.clone(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// A small set of pure tools available to `njr run --mode tools`.
    pub fn standard() -> Self {
        let mut r = ToolRegistry::new();
        let num = |w: &WireValue| match w {
            WireValue::Int(i) => Ok(*i as f64),
            WireValue::Float(x) => Ok(*x),
            other => Err(format!("expected a number, got {}", other.kind_name())),
        };
        r.register("add", "Sum of a list of numbers.", move |w| match w {
            WireValue::List(items) => {
                if items.iter().all(|i| matches!(i, WireValue::Int(_))) {
                    items
                        .iter()
                        .try_fold(0i64, |acc, i| match i {
                            WireValue::Int(n) => acc.checked_add(*n).ok_or("overflow".to_string()),
                            _ => unreachable!(),
                        })
                        .map(WireValue::Int)
                } else {
                    items
                        .iter()
                        .map(num)
                        .sum::<Result<f64, _>>()
                        .map(WireValue::Float)
                }
            }
            other => Err(format!("expected a list, got {}", other.kind_name())),
        })
        .expect("fresh registry");
        r.register("upper", "Uppercases a string.", |w| match w {
            WireValue::String(s) => Ok(WireValue::String(s.to_uppercase())),
            other => Err(format!("expected a string, got {}", other.kind_name())),
        })
        .expect("fresh registry");
        r.register("length", "Number of characters in a string.", |w| match w {
            WireValue::String(s) => Ok(WireValue::Int(s.chars().count() as i64)),
            other => Err(format!("expected a string, got {}", other.kind_name())),
        })
        .expect("fresh registry");
        r
    }
}

//! Host runtime values.
//!
//! Immutable values are passed around directly. Lists and records only ever
//! live in heap cells and are reached through an [`Address`].

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Heap address. Allocated monotonically, never reused within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Address(pub u64);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Returns true if `s` matches `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A variable name. Always a valid identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VarName(String);

impl VarName {
    pub fn new(name: impl Into<String>) -> Option<Self> {
        let name = name.into();
        is_identifier(&name).then_some(VarName(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for VarName {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        VarName::new(value.clone()).ok_or_else(|| format!("invalid variable name '{value}'"))
    }
}

impl From<VarName> for String {
    fn from(v: VarName) -> String {
        v.0
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelKind {
    User,
    LoopBreak,
    LoopContinue,
    FunctionReturn,
    Raise,
}

impl LabelKind {
    /// Whether a jump to a label of this kind may carry a value.
    pub fn takes_payload(self) -> bool {
        !matches!(self, LabelKind::LoopBreak | LabelKind::LoopContinue)
    }
}

/// A program label. The reserved names `break`, `continue`, `return` and
/// `raise` select the built-in kinds; any other identifier is a user label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LabelName(String);

impl LabelName {
    pub const BREAK: &'static str = "break";
    pub const CONTINUE: &'static str = "continue";
    pub const RETURN: &'static str = "return";
    pub const RAISE: &'static str = "raise";

    pub fn new(name: impl Into<String>) -> Option<Self> {
        let name = name.into();
        is_identifier(&name).then_some(LabelName(name))
    }

    pub fn loop_break() -> Self {
        LabelName(Self::BREAK.into())
    }

    pub fn loop_continue() -> Self {
        LabelName(Self::CONTINUE.into())
    }

    pub fn function_return() -> Self {
        LabelName(Self::RETURN.into())
    }

    pub fn raise() -> Self {
        LabelName(Self::RAISE.into())
    }

    pub fn kind(&self) -> LabelKind {
        match self.0.as_str() {
            Self::BREAK => LabelKind::LoopBreak,
            Self::CONTINUE => LabelKind::LoopContinue,
            Self::RETURN => LabelKind::FunctionReturn,
            Self::RAISE => LabelKind::Raise,
            _ => LabelKind::User,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LabelName {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        LabelName::new(value.clone()).ok_or_else(|| format!("invalid label name '{value}'"))
    }
}

impl From<LabelName> for String {
    fn from(l: LabelName) -> String {
        l.0
    }
}

impl fmt::Display for LabelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone)]
pub enum Value {
    Unit,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Label(LabelName),
    Addr(Address),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Unit => "Unit",
            Value::Bool(_) => "Bool",
            Value::Int(_) => "Int",
            Value::Float(_) => "Float",
            Value::Str(_) => "Str",
            Value::Label(_) => "Label",
            Value::Addr(_) => "Addr",
        }
    }

    /// Structural identity: floats compare by bit pattern, addresses by id.
    /// Used for snapshots and round-trip checks, not for the `==` operator.
    pub fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            _ => self == other,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Unit, Value::Unit) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Label(a), Value::Label(b)) => a == b,
            (Value::Addr(a), Value::Addr(b)) => a == b,
            _ => false,
        }
    }
}

/// Contents of a heap cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// A plain reference cell created by `ref e`.
    Value(Value),
    List(Vec<Value>),
    Record(IndexMap<String, Value>),
}

impl Cell {
    pub fn type_name(&self) -> &'static str {
        match self {
            Cell::Value(_) => "Ref",
            Cell::List(_) => "List",
            Cell::Record(_) => "Record",
        }
    }

    pub fn same(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Value(a), Cell::Value(b)) => a.same(b),
            (Cell::List(a), Cell::List(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same(y))
            }
            (Cell::Record(a), Cell::Record(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|((ka, va), (kb, vb))| ka == kb && va.same(vb))
            }
            _ => false,
        }
    }
}

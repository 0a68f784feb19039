//! Values as they cross the boundary between the host and an agent.
//!
//! Canonical JSON: `null`, `{"bool":b}`, `{"int":n}`, `{"float":x}`,
//! `{"string":s}`, `{"$ref":n}`, `{"$label":l}`. Heap-cell contents also use
//! `{"list":[..]}` and `{"record":{..}}`; those never appear as plain values.

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Number, Value as Json};

use crate::host::{Address, Cell, Heap, LabelName, Value};

#[derive(Debug, Clone)]
pub enum WireValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    String(String),
    Label(LabelName),
    Ref(u64),
    List(Vec<WireValue>),
    Record(IndexMap<String, WireValue>),
}

impl PartialEq for WireValue {
    /// Floats compare by bit pattern so NaN payloads survive equality checks.
    fn eq(&self, other: &Self) -> bool {
        use WireValue::*;
        match (self, other) {
            (Null, Null) => true,
            (Bool(a), Bool(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            (Float(a), Float(b)) => a.to_bits() == b.to_bits(),
            (String(a), String(b)) => a == b,
            (Label(a), Label(b)) => a == b,
            (Ref(a), Ref(b)) => a == b,
            (List(a), List(b)) => a == b,
            (Record(a), Record(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WireError {
    #[error("malformed wire value: {0}")]
    Malformed(String),
    #[error("dangling reference {0}")]
    Dangling(u64),
    #[error("{0} cannot be used as a plain value; allocate it with Ref")]
    Composite(&'static str),
}

impl WireValue {
    pub fn is_scalar(&self) -> bool {
        !matches!(self, WireValue::List(_) | WireValue::Record(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            WireValue::Null => "null",
            WireValue::Bool(_) => "bool",
            WireValue::Int(_) => "int",
            WireValue::Float(_) => "float",
            WireValue::String(_) => "string",
            WireValue::Label(_) => "label",
            WireValue::Ref(_) => "ref",
            WireValue::List(_) => "list",
            WireValue::Record(_) => "record",
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            WireValue::Null => Json::Null,
            WireValue::Bool(b) => json!({ "bool": b }),
            WireValue::Int(i) => json!({ "int": i }),
            WireValue::Float(x) => {
                let v = match Number::from_f64(*x) {
                    Some(n) => Json::Number(n),
                    None if x.is_nan() => Json::String("NaN".into()),
                    None if *x > 0.0 => Json::String("inf".into()),
                    None => Json::String("-inf".into()),
                };
                json!({ "float": v })
            }
            WireValue::String(s) => json!({ "string": s }),
            WireValue::Label(l) => json!({ "$label": l.as_str() }),
            WireValue::Ref(a) => json!({ "$ref": a }),
            WireValue::List(items) => {
                json!({ "list": items.iter().map(WireValue::to_json).collect::<Vec<_>>() })
            }
            WireValue::Record(fields) => {
                let map: Map<String, Json> = fields
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_json()))
                    .collect();
                json!({ "record": map })
            }
        }
    }

    pub fn from_json(j: &Json) -> Result<WireValue, WireError> {
        let bad = || WireError::Malformed(j.to_string());
        let obj = match j {
            Json::Null => return Ok(WireValue::Null),
            Json::Object(obj) if obj.len() == 1 => obj,
            _ => return Err(bad()),
        };
        let (tag, v) = obj.iter().next().expect("one entry");
        Ok(match (tag.as_str(), v) {
            ("bool", Json::Bool(b)) => WireValue::Bool(*b),
            ("int", Json::Number(n)) => WireValue::Int(n.as_i64().ok_or_else(bad)?),
            ("float", Json::Number(n)) => WireValue::Float(n.as_f64().ok_or_else(bad)?),
            ("float", Json::String(s)) => WireValue::Float(match s.as_str() {
                "NaN" => f64::NAN,
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                _ => return Err(bad()),
            }),
            ("string", Json::String(s)) => WireValue::String(s.clone()),
            ("$label", Json::String(s)) => {
                WireValue::Label(LabelName::new(s.clone()).ok_or_else(bad)?)
            }
            ("$ref", Json::Number(n)) => WireValue::Ref(n.as_u64().ok_or_else(bad)?),
            ("list", Json::Array(items)) => WireValue::List(
                items
                    .iter()
                    .map(WireValue::from_json)
                    .collect::<Result<_, _>>()?,
            ),
            ("record", Json::Object(fields)) => WireValue::Record(
                fields
                    .iter()
                    .map(|(k, v)| Ok((k.clone(), WireValue::from_json(v)?)))
                    .collect::<Result<_, WireError>>()?,
            ),
            _ => return Err(bad()),
        })
    }

    /// Canonical byte encoding.
    pub fn to_canonical(&self) -> String {
        self.to_json().to_string()
    }

    /// Follows `path` through lists (by index) and records (by key).
    pub fn at_path<S: AsRef<str>>(&self, path: &[S]) -> Option<&WireValue> {
        let mut cur = self;
        for step in path {
            let step = step.as_ref();
            cur = match cur {
                WireValue::List(items) => items.get(step.parse::<usize>().ok()?)?,
                WireValue::Record(fields) => fields.get(step)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    fn refs(&self, out: &mut Vec<u64>) {
        match self {
            WireValue::Ref(a) => out.push(*a),
            WireValue::List(items) => items.iter().for_each(|i| i.refs(out)),
            WireValue::Record(fields) => fields.values().for_each(|i| i.refs(out)),
            _ => {}
        }
    }
}

impl Serialize for WireValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for WireValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = Json::deserialize(d)?;
        WireValue::from_json(&j).map_err(serde::de::Error::custom)
    }
}

/// Serialization α: immutables map to their wire twins, composites to refs.
pub fn serialize(v: &Value) -> WireValue {
    match v {
        Value::Unit => WireValue::Null,
        Value::Bool(b) => WireValue::Bool(*b),
        Value::Int(i) => WireValue::Int(*i),
        Value::Float(x) => WireValue::Float(*x),
        Value::Str(s) => WireValue::String(s.clone()),
        Value::Label(l) => WireValue::Label(l.clone()),
        Value::Addr(a) => WireValue::Ref(a.0),
    }
}

/// Contents of a heap cell, one level deep.
pub fn serialize_cell(cell: &Cell) -> WireValue {
    match cell {
        Cell::Value(v) => serialize(v),
        Cell::List(items) => WireValue::List(items.iter().map(serialize).collect()),
        Cell::Record(fields) => WireValue::Record(
            fields
                .iter()
                .map(|(k, v)| (k.clone(), serialize(v)))
                .collect(),
        ),
    }
}

/// Reification γ for plain values. Composite wire values are rejected.
pub fn reify(w: &WireValue, heap: &Heap) -> Result<Value, WireError> {
    Ok(match w {
        WireValue::Null => Value::Unit,
        WireValue::Bool(b) => Value::Bool(*b),
        WireValue::Int(i) => Value::Int(*i),
        WireValue::Float(x) => Value::Float(*x),
        WireValue::String(s) => Value::Str(s.clone()),
        WireValue::Label(l) => Value::Label(l.clone()),
        WireValue::Ref(a) => {
            if !heap.is_live(Address(*a)) {
                return Err(WireError::Dangling(*a));
            }
            Value::Addr(Address(*a))
        }
        WireValue::List(_) => return Err(WireError::Composite("a list")),
        WireValue::Record(_) => return Err(WireError::Composite("a record")),
    })
}

fn check_refs(w: &WireValue, heap: &Heap) -> Result<(), WireError> {
    let mut refs = Vec::new();
    w.refs(&mut refs);
    match refs.into_iter().find(|a| !heap.is_live(Address(*a))) {
        Some(a) => Err(WireError::Dangling(a)),
        None => Ok(()),
    }
}

fn alloc_nested(w: &WireValue, heap: &mut Heap) -> Value {
    match w {
        WireValue::List(_) | WireValue::Record(_) => {
            let cell = build_cell(w, heap);
            Value::Addr(heap.alloc(cell))
        }
        other => reify(other, heap).expect("checked before allocation"),
    }
}

fn build_cell(w: &WireValue, heap: &mut Heap) -> Cell {
    match w {
        WireValue::List(items) => Cell::List(items.iter().map(|i| alloc_nested(i, heap)).collect()),
        WireValue::Record(fields) => Cell::Record(
            fields
                .iter()
                .map(|(k, v)| (k.clone(), alloc_nested(v, heap)))
                .collect(),
        ),
        other => Cell::Value(reify(other, heap).expect("checked before allocation")),
    }
}

/// Reifies a value, allocating any list or record it contains. The heap is
/// untouched when an error is returned.
pub fn reify_alloc(w: &WireValue, heap: &mut Heap) -> Result<Value, WireError> {
    check_refs(w, heap)?;
    Ok(alloc_nested(w, heap))
}

/// Reifies the contents for a heap cell: a top-level list or record becomes
/// the cell itself; anything else becomes a plain reference cell.
pub fn reify_cell(w: &WireValue, heap: &mut Heap) -> Result<Cell, WireError> {
    check_refs(w, heap)?;
    Ok(build_cell(w, heap))
}

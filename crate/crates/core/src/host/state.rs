use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::env::Env;
use super::heap::{DanglingRef, Heap};
use super::value::{Address, Cell, LabelKind, LabelName, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("type error: {0}")]
    Type(String),
    #[error("dangling reference {0}")]
    Dangling(Address),
    #[error("undefined variable '{0}'")]
    UndefinedVar(String),
    #[error("integer overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0}")]
    Index(String),
    #[error("input exhausted")]
    InputExhausted,
    #[error("label '{0}' is not active")]
    DeadLabel(LabelName),
    #[error("label '{0}' cannot carry a value")]
    PayloadNotAllowed(LabelName),
    #[error("raised: {0}")]
    Raised(String),
    #[error("evaluation exceeded {0} steps")]
    StepLimit(u64),
    #[error("continuation stack exceeded {0} frames")]
    StackOverflow(usize),
    #[error("input and output are not available here")]
    IoUnavailable,
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<DanglingRef> for RuntimeError {
    fn from(d: DanglingRef) -> Self {
        RuntimeError::Dangling(d.0)
    }
}

/// One active label: the label and the scope depth at which it was entered.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFrame {
    pub label: LabelName,
    pub scope_depth: usize,
}

/// Captured program output, optionally mirrored to a live writer.
#[derive(Default)]
pub struct Output {
    buffer: String,
    live: Option<Box<dyn Write + Send>>,
}

impl Output {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_live(writer: Box<dyn Write + Send>) -> Self {
        Output {
            buffer: String::new(),
            live: Some(writer),
        }
    }

    pub fn write_str(&mut self, s: &str) -> Result<(), RuntimeError> {
        self.buffer.push_str(s);
        if let Some(w) = self.live.as_mut() {
            w.write_all(s.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| RuntimeError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.buffer
    }

    pub fn take(&mut self) -> String {
        std::mem::take(&mut self.buffer)
    }
}

impl std::fmt::Debug for Output {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Output")
            .field("buffer", &self.buffer)
            .finish()
    }
}

/// Line-oriented program input.
pub enum InputSource {
    /// Scripted lines. Each line read is echoed into the output so the
    /// transcript reads like an interactive console session.
    Lines(VecDeque<String>),
    /// A live reader (terminal). Lines are not echoed.
    Reader(Box<dyn BufRead + Send>),
}

impl InputSource {
    pub fn lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        InputSource::Lines(lines.into_iter().map(Into::into).collect())
    }

    pub fn empty() -> Self {
        InputSource::Lines(VecDeque::new())
    }

    /// Returns the next line (without its terminator) and whether to echo it.
    fn next_line(&mut self) -> Result<Option<(String, bool)>, RuntimeError> {
        match self {
            InputSource::Lines(lines) => Ok(lines.pop_front().map(|l| (l, true))),
            InputSource::Reader(r) => {
                let mut line = String::new();
                let n = r
                    .read_line(&mut line)
                    .map_err(|e| RuntimeError::Io(e.to_string()))?;
                if n == 0 {
                    return Ok(None);
                }
                while line.ends_with(['\n', '\r']) {
                    line.pop();
                }
                Ok(Some((line, false)))
            }
        }
    }
}

impl std::fmt::Debug for InputSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InputSource::Lines(l) => f.debug_tuple("Lines").field(l).finish(),
            InputSource::Reader(_) => f.write_str("Reader"),
        }
    }
}

/// The host program state: scopes, heap and active labels, plus program I/O.
#[derive(Debug)]
pub struct HostState {
    pub env: Env,
    pub heap: Heap,
    pub control: Vec<LabelFrame>,
    pub out: Output,
    pub input: InputSource,
}

impl HostState {
    pub fn new(input: InputSource) -> Self {
        HostState {
            env: Env::new(),
            heap: Heap::new(),
            control: Vec::new(),
            out: Output::new(),
            input,
        }
    }

    /// Reads a line for `input(prompt)`.
    pub fn read_line(&mut self, prompt: &str) -> Result<String, RuntimeError> {
        self.out.write_str(prompt)?;
        match self.input.next_line()? {
            Some((line, echo)) => {
                if echo {
                    self.out.write_str(&line)?;
                    self.out.write_str("\n")?;
                }
                Ok(line)
            }
            None => Err(RuntimeError::InputExhausted),
        }
    }

    /// Checks that a jump to `label` is legal right now.
    pub fn check_jump(&self, label: &LabelName, has_payload: bool) -> Result<(), RuntimeError> {
        if has_payload && !label.kind().takes_payload() {
            return Err(RuntimeError::PayloadNotAllowed(label.clone()));
        }
        if label.kind() == LabelKind::Raise || self.control.iter().any(|f| &f.label == label) {
            Ok(())
        } else {
            Err(RuntimeError::DeadLabel(label.clone()))
        }
    }

    /// Renders a value the way `print` shows it.
    pub fn display(&self, v: &Value) -> String {
        format_value(v, &self.heap)
    }
}

/// Human-readable rendering: strings are bare at the top level and quoted
/// inside containers; composites are followed through the heap.
pub fn format_value(v: &Value, heap: &Heap) -> String {
    let mut out = String::new();
    let mut visiting = HashSet::new();
    write_value(&mut out, v, heap, &mut visiting, true);
    out
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

pub fn quote_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_value(
    out: &mut String,
    v: &Value,
    heap: &Heap,
    visiting: &mut HashSet<Address>,
    top: bool,
) {
    match v {
        Value::Unit => out.push_str("()"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(x) => out.push_str(&format_float(*x)),
        Value::Str(s) if top => out.push_str(s),
        Value::Str(s) => out.push_str(&quote_str(s)),
        Value::Label(l) => {
            let _ = write!(out, "<label {l}>");
        }
        Value::Addr(a) => {
            let Ok(cell) = heap.get(*a) else {
                let _ = write!(out, "<dangling {a}>");
                return;
            };
            if !visiting.insert(*a) {
                out.push_str("...");
                return;
            }
            match cell {
                Cell::Value(inner) => {
                    out.push_str("ref(");
                    write_value(out, inner, heap, visiting, false);
                    out.push(')');
                }
                Cell::List(items) => {
                    out.push('[');
                    for (i, item) in items.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        write_value(out, item, heap, visiting, false);
                    }
                    out.push(']');
                }
                Cell::Record(fields) => {
                    out.push('{');
                    for (i, (k, item)) in fields.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        out.push_str(k);
                        out.push_str(": ");
                        write_value(out, item, heap, visiting, false);
                    }
                    out.push('}');
                }
            }
            visiting.remove(a);
        }
    }
}

use indexmap::IndexMap;

use super::value::Value;

pub type Frame = IndexMap<String, Value>;

/// Lexical scope stack. Lookups resolve to the innermost binding.
#[derive(Debug, Clone)]
pub struct Env {
    frames: Vec<Frame>,
}

impl Default for Env {
    fn default() -> Self {
        Env::new()
    }
}

impl Env {
    /// A scope with a single (global) frame.
    pub fn new() -> Self {
        Env {
            frames: vec![Frame::new()],
        }
    }

    pub fn with_frame(frame: Frame) -> Self {
        Env {
            frames: vec![frame],
        }
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn push(&mut self, frame: Frame) {
        self.frames.push(frame);
    }

    pub fn pop(&mut self) -> Option<Frame> {
        self.frames.pop()
    }

    /// Drops frames above `depth`.
    pub fn truncate(&mut self, depth: usize) {
        self.frames.truncate(depth);
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        self.frames.iter().rev().find_map(|f| f.get(name))
    }

    /// Binds `name` in the innermost frame.
    pub fn bind(&mut self, name: impl Into<String>, value: Value) {
        if self.frames.is_empty() {
            self.frames.push(Frame::new());
        }
        self.frames
            .last_mut()
            .expect("non-empty")
            .insert(name.into(), value);
    }

    /// Overwrites the innermost existing binding of `name`. Returns false if unbound.
    pub fn rebind(&mut self, name: &str, value: Value) -> bool {
        match self.frames.iter_mut().rev().find_map(|f| f.get_mut(name)) {
            Some(slot) => {
                *slot = value;
                true
            }
            None => false,
        }
    }

    pub fn top(&self) -> Option<&Frame> {
        self.frames.last()
    }

    pub fn top_mut(&mut self) -> Option<&mut Frame> {
        self.frames.last_mut()
    }

    pub fn global(&self) -> Option<&Frame> {
        self.frames.first()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn same(&self, other: &Env) -> bool {
        self.frames.len() == other.frames.len()
            && self.frames.iter().zip(&other.frames).all(|(a, b)| {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|((ka, va), (kb, vb))| ka == kb && va.same(vb))
            })
    }
}

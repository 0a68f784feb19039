//! Small-step evaluator with an explicit continuation stack.
//!
//! Labels are marker frames on the stack; a jump pops frames until it
//! reaches the matching marker and truncates the scope stack to the depth
//! recorded when the label was entered. `while` is two nested markers
//! (`break` around the loop, `continue` around each body run), and a
//! function call is a `return` marker above a saved caller scope.

use indexmap::IndexMap;

use super::ast::{BinOp, Builtin, Callee, Expr, ExprKind, FunctionDef, NaturalBlock, Span, UnOp};
use super::env::{Env, Frame as ScopeFrame};
use super::state::{format_value, HostState, LabelFrame, RuntimeError};
use super::value::{Cell, LabelKind, LabelName, Value, VarName};
use crate::error::Fault;

/// Result of running one natural block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockOutcome {
    /// The block finished; its value is the reified `Return` payload.
    Completed(Value),
    /// The block jumped to a label; evaluation continues there.
    Transfer {
        label: LabelName,
        payload: Option<Value>,
    },
}

/// Runs natural blocks on behalf of the machine.
pub trait NaturalDriver {
    fn run_block(
        &mut self,
        block: &NaturalBlock,
        state: &mut HostState,
    ) -> Result<BlockOutcome, Fault>;
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_steps: Option<u64>,
    pub max_frames: usize,
    /// Whether `print`/`input` are available.
    pub io: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: None,
            max_frames: 1 << 20,
            io: true,
        }
    }
}

enum Frame<'a> {
    LetBind {
        name: &'a VarName,
        body: &'a Expr,
    },
    PopScope {
        depth: usize,
    },
    Seq {
        rest: &'a [Expr],
    },
    If {
        then: &'a Expr,
        els: Option<&'a Expr>,
    },
    WhileTest {
        cond: &'a Expr,
        body: &'a Expr,
    },
    WhileNext {
        cond: &'a Expr,
        body: &'a Expr,
    },
    /// Marker for the innermost entry of `HostState::control`.
    Label,
    BinLeft {
        op: BinOp,
        rhs: &'a Expr,
    },
    BinRight {
        op: BinOp,
        lhs: Value,
    },
    Unary(UnOp),
    RefAlloc,
    Deref,
    AssignRef {
        value: &'a Expr,
    },
    AssignRefValue {
        target: Value,
    },
    AssignIndexColl {
        key: &'a Expr,
        value: &'a Expr,
    },
    AssignIndexKey {
        coll: Value,
        value: &'a Expr,
    },
    AssignIndexValue {
        coll: Value,
        key: Value,
    },
    IndexColl {
        key: &'a Expr,
    },
    IndexKey {
        coll: Value,
    },
    Args {
        callee: &'a Callee,
        rest: &'a [Expr],
        done: Vec<Value>,
    },
    ListItems {
        rest: &'a [Expr],
        done: Vec<Value>,
    },
    RecordFields {
        rest: &'a [(String, Expr)],
        done: Vec<(String, Value)>,
        key: &'a str,
    },
    GotoPayload {
        label: &'a LabelName,
    },
    FnReturn {
        caller: Env,
    },
}

enum Ctl<'a> {
    Eval(&'a Expr),
    Ret(Value),
    Jump(LabelName, Option<Value>),
}

pub struct Machine<'a, 's> {
    functions: &'a IndexMap<String, FunctionDef>,
    state: &'s mut HostState,
    driver: Option<&'s mut dyn NaturalDriver>,
    kont: Vec<Frame<'a>>,
    limits: Limits,
    steps: u64,
    span: Span,
}

impl<'a, 's> Machine<'a, 's> {
    pub fn new(
        functions: &'a IndexMap<String, FunctionDef>,
        state: &'s mut HostState,
        driver: Option<&'s mut dyn NaturalDriver>,
        limits: Limits,
    ) -> Self {
        Machine {
            functions,
            state,
            driver,
            kont: Vec::new(),
            limits,
            steps: 0,
            span: Span::default(),
        }
    }

    fn fail(&self, error: RuntimeError) -> Fault {
        Fault::Runtime {
            error,
            at: Some(self.span),
        }
    }

    fn push_label(&mut self, label: LabelName) {
        self.state.control.push(LabelFrame {
            label,
            scope_depth: self.state.env.depth(),
        });
        self.kont.push(Frame::Label);
    }

    /// Evaluates `expr` to a value. Jumps that escape every label are
    /// reported as errors (an uncaught `raise` as [`RuntimeError::Raised`]).
    pub fn eval(mut self, expr: &'a Expr) -> Result<Value, Fault> {
        let base_control = self.state.control.len();
        let base_depth = self.state.env.depth();
        let result = self.drive(expr);
        if result.is_err() {
            // Leave the state shaped as it was on entry.
            self.state.control.truncate(base_control);
            self.state.env.truncate(base_depth.max(1));
        }
        result
    }

    fn drive(&mut self, expr: &'a Expr) -> Result<Value, Fault> {
        let mut ctl = Ctl::Eval(expr);
        loop {
            self.steps += 1;
            if let Some(max) = self.limits.max_steps {
                if self.steps > max {
                    return Err(self.fail(RuntimeError::StepLimit(max)));
                }
            }
            if self.kont.len() > self.limits.max_frames {
                return Err(self.fail(RuntimeError::StackOverflow(self.limits.max_frames)));
            }
            ctl = match ctl {
                Ctl::Eval(e) => {
                    self.span = e.span;
                    self.step(e)?
                }
                Ctl::Ret(v) => match self.kont.pop() {
                    None => return Ok(v),
                    Some(frame) => self.apply(frame, v)?,
                },
                Ctl::Jump(label, payload) => self.unwind(label, payload)?,
            };
        }
    }

    fn unwind(&mut self, label: LabelName, payload: Option<Value>) -> Result<Ctl<'a>, Fault> {
        loop {
            match self.kont.pop() {
                None => {
                    let error = if label.kind() == LabelKind::Raise {
                        let shown = payload
                            .as_ref()
                            .map(|v| format_value(v, &self.state.heap))
                            .unwrap_or_default();
                        RuntimeError::Raised(shown)
                    } else {
                        RuntimeError::DeadLabel(label)
                    };
                    return Err(self.fail(error));
                }
                Some(Frame::Label) => {
                    let frame = self
                        .state
                        .control
                        .pop()
                        .expect("label marker without frame");
                    if frame.label == label {
                        self.state.env.truncate(frame.scope_depth);
                        return Ok(Ctl::Ret(payload.unwrap_or(Value::Unit)));
                    }
                }
                Some(Frame::FnReturn { caller }) => {
                    self.state.env = caller;
                }
                Some(_) => {}
            }
        }
    }

    fn step(&mut self, e: &'a Expr) -> Result<Ctl<'a>, Fault> {
        Ok(match &e.kind {
            ExprKind::Unit => Ctl::Ret(Value::Unit),
            ExprKind::Bool(b) => Ctl::Ret(Value::Bool(*b)),
            ExprKind::Int(i) => Ctl::Ret(Value::Int(*i)),
            ExprKind::Float(x) => Ctl::Ret(Value::Float(*x)),
            ExprKind::Str(s) => Ctl::Ret(Value::Str(s.clone())),
            ExprKind::Var(x) => match self.state.env.lookup(x.as_str()) {
                Some(v) => Ctl::Ret(v.clone()),
                None => return Err(self.fail(RuntimeError::UndefinedVar(x.to_string()))),
            },
            ExprKind::Let(name, value, body) => {
                self.kont.push(Frame::LetBind { name, body });
                Ctl::Eval(value)
            }
            ExprKind::Seq(items) => match items.split_first() {
                None => Ctl::Ret(Value::Unit),
                Some((first, rest)) => {
                    if !rest.is_empty() {
                        self.kont.push(Frame::Seq { rest });
                    }
                    Ctl::Eval(first)
                }
            },
            ExprKind::If(c, t, f) => {
                self.kont.push(Frame::If {
                    then: t,
                    els: f.as_deref(),
                });
                Ctl::Eval(c)
            }
            ExprKind::While(cond, body) => {
                self.push_label(LabelName::loop_break());
                self.kont.push(Frame::WhileTest { cond, body });
                Ctl::Eval(cond)
            }
            ExprKind::Binary(op, lhs, rhs) => {
                self.kont.push(Frame::BinLeft { op: *op, rhs });
                Ctl::Eval(lhs)
            }
            ExprKind::Unary(op, a) => {
                self.kont.push(Frame::Unary(*op));
                Ctl::Eval(a)
            }
            ExprKind::Ref(a) => {
                self.kont.push(Frame::RefAlloc);
                Ctl::Eval(a)
            }
            ExprKind::Deref(a) => {
                self.kont.push(Frame::Deref);
                Ctl::Eval(a)
            }
            ExprKind::Assign(target, value) => match &target.kind {
                ExprKind::Index(coll, key) => {
                    self.kont.push(Frame::AssignIndexColl { key, value });
                    Ctl::Eval(coll)
                }
                _ => {
                    self.kont.push(Frame::AssignRef { value });
                    Ctl::Eval(target)
                }
            },
            ExprKind::Label(label, body) => {
                self.push_label(label.clone());
                Ctl::Eval(body)
            }
            ExprKind::Goto(label, None) => self.jump(label.clone(), None)?,
            ExprKind::Goto(label, Some(p)) => {
                self.kont.push(Frame::GotoPayload { label });
                Ctl::Eval(p)
            }
            ExprKind::Call(callee, args) => self.next_arg(callee, args, Vec::new())?,
            ExprKind::Index(coll, key) => {
                self.kont.push(Frame::IndexColl { key });
                Ctl::Eval(coll)
            }
            ExprKind::List(items) => self.next_item(items, Vec::new()),
            ExprKind::Record(fields) => self.next_field(fields, Vec::new()),
            ExprKind::Natural(block) => {
                let Some(driver) = self.driver.as_deref_mut() else {
                    return Err(
                        self.fail(RuntimeError::Type("natural blocks cannot run here".into()))
                    );
                };
                match driver.run_block(block, self.state)? {
                    BlockOutcome::Completed(v) => Ctl::Ret(v),
                    BlockOutcome::Transfer { label, payload } => self.jump(label, payload)?,
                }
            }
        })
    }

    fn jump(&mut self, label: LabelName, payload: Option<Value>) -> Result<Ctl<'a>, Fault> {
        self.state
            .check_jump(&label, payload.is_some())
            .map_err(|e| self.fail(e))?;
        Ok(Ctl::Jump(label, payload))
    }

    fn next_arg(
        &mut self,
        callee: &'a Callee,
        rest: &'a [Expr],
        done: Vec<Value>,
    ) -> Result<Ctl<'a>, Fault> {
        match rest.split_first() {
            Some((first, rest)) => {
                self.kont.push(Frame::Args { callee, rest, done });
                Ok(Ctl::Eval(first))
            }
            None => self.call(callee, done),
        }
    }

    fn next_item(&mut self, rest: &'a [Expr], done: Vec<Value>) -> Ctl<'a> {
        match rest.split_first() {
            Some((first, rest)) => {
                self.kont.push(Frame::ListItems { rest, done });
                Ctl::Eval(first)
            }
            None => Ctl::Ret(Value::Addr(self.state.heap.alloc(Cell::List(done)))),
        }
    }

    fn next_field(&mut self, rest: &'a [(String, Expr)], done: Vec<(String, Value)>) -> Ctl<'a> {
        match rest.split_first() {
            Some(((key, value), rest)) => {
                self.kont.push(Frame::RecordFields { rest, done, key });
                Ctl::Eval(value)
            }
            None => {
                let record: IndexMap<String, Value> = done.into_iter().collect();
                Ctl::Ret(Value::Addr(self.state.heap.alloc(Cell::Record(record))))
            }
        }
    }

    fn apply(&mut self, frame: Frame<'a>, v: Value) -> Result<Ctl<'a>, Fault> {
        Ok(match frame {
            Frame::LetBind { name, body } => {
                let depth = self.state.env.depth();
                let mut scope = ScopeFrame::new();
                scope.insert(name.to_string(), v);
                self.state.env.push(scope);
                self.kont.push(Frame::PopScope { depth });
                Ctl::Eval(body)
            }
            Frame::PopScope { depth } => {
                self.state.env.truncate(depth);
                Ctl::Ret(v)
            }
            Frame::Seq { rest } => {
                let (first, rest) = rest.split_first().expect("non-empty rest");
                if !rest.is_empty() {
                    self.kont.push(Frame::Seq { rest });
                }
                Ctl::Eval(first)
            }
            Frame::If { then, els } => {
                if self.truthy(&v)? {
                    Ctl::Eval(then)
                } else {
                    match els {
                        Some(e) => Ctl::Eval(e),
                        None => Ctl::Ret(Value::Unit),
                    }
                }
            }
            Frame::WhileTest { cond, body } => {
                if self.truthy(&v)? {
                    self.kont.push(Frame::WhileNext { cond, body });
                    self.push_label(LabelName::loop_continue());
                    Ctl::Eval(body)
                } else {
                    Ctl::Ret(Value::Unit)
                }
            }
            Frame::WhileNext { cond, body } => {
                self.kont.push(Frame::WhileTest { cond, body });
                Ctl::Eval(cond)
            }
            Frame::Label => {
                self.state.control.pop();
                Ctl::Ret(v)
            }
            Frame::BinLeft {
                op: BinOp::And,
                rhs,
            } => {
                if self.truthy(&v)? {
                    self.kont.push(Frame::Unary(UnOp::Not));
                    self.kont.push(Frame::Unary(UnOp::Not));
                    Ctl::Eval(rhs)
                } else {
                    Ctl::Ret(Value::Bool(false))
                }
            }
            Frame::BinLeft { op: BinOp::Or, rhs } => {
                if self.truthy(&v)? {
                    Ctl::Ret(Value::Bool(true))
                } else {
                    self.kont.push(Frame::Unary(UnOp::Not));
                    self.kont.push(Frame::Unary(UnOp::Not));
                    Ctl::Eval(rhs)
                }
            }
            Frame::BinLeft { op, rhs } => {
                self.kont.push(Frame::BinRight { op, lhs: v });
                Ctl::Eval(rhs)
            }
            Frame::BinRight { op, lhs } => {
                Ctl::Ret(binary(op, &lhs, &v).map_err(|e| self.fail(e))?)
            }
            Frame::Unary(op) => Ctl::Ret(unary(op, &v).map_err(|e| self.fail(e))?),
            Frame::RefAlloc => Ctl::Ret(Value::Addr(self.state.heap.alloc(Cell::Value(v)))),
            Frame::Deref => {
                let addr = self.expect_addr(&v, "dereference")?;
                match self.state.heap.get(addr).map_err(|e| self.fail(e.into()))? {
                    Cell::Value(inner) => Ctl::Ret(inner.clone()),
                    other => {
                        return Err(self.fail(RuntimeError::Type(format!(
                            "cannot dereference a {}",
                            other.type_name()
                        ))))
                    }
                }
            }
            Frame::AssignRef { value } => {
                self.kont.push(Frame::AssignRefValue { target: v });
                Ctl::Eval(value)
            }
            Frame::AssignRefValue { target } => {
                let addr = self.expect_addr(&target, "assign through")?;
                let result = match self.state.heap.get_mut(addr) {
                    Err(e) => Err(e.into()),
                    Ok(Cell::Value(slot)) => {
                        *slot = v;
                        Ok(())
                    }
                    Ok(other) => Err(RuntimeError::Type(format!(
                        "cannot assign through a {}; index it instead",
                        other.type_name()
                    ))),
                };
                result.map_err(|e| self.fail(e))?;
                Ctl::Ret(Value::Unit)
            }
            Frame::AssignIndexColl { key, value } => {
                self.kont.push(Frame::AssignIndexKey { coll: v, value });
                Ctl::Eval(key)
            }
            Frame::AssignIndexKey { coll, value } => {
                self.kont.push(Frame::AssignIndexValue { coll, key: v });
                Ctl::Eval(value)
            }
            Frame::AssignIndexValue { coll, key } => {
                store_index(self.state, &coll, &key, v).map_err(|e| self.fail(e))?;
                Ctl::Ret(Value::Unit)
            }
            Frame::IndexColl { key } => {
                self.kont.push(Frame::IndexKey { coll: v });
                Ctl::Eval(key)
            }
            Frame::IndexKey { coll } => {
                Ctl::Ret(load_index(self.state, &coll, &v).map_err(|e| self.fail(e))?)
            }
            Frame::Args {
                callee,
                rest,
                mut done,
            } => {
                done.push(v);
                self.next_arg(callee, rest, done)?
            }
            Frame::ListItems { rest, mut done } => {
                done.push(v);
                self.next_item(rest, done)
            }
            Frame::RecordFields {
                rest,
                mut done,
                key,
            } => {
                done.push((key.to_string(), v));
                self.next_field(rest, done)
            }
            Frame::GotoPayload { label } => self.jump(label.clone(), Some(v))?,
            Frame::FnReturn { caller } => {
                self.state.env = caller;
                Ctl::Ret(v)
            }
        })
    }

    fn truthy(&self, v: &Value) -> Result<bool, Fault> {
        match v {
            Value::Bool(b) => Ok(*b),
            other => Err(self.fail(RuntimeError::Type(format!(
                "expected Bool, found {}",
                other.type_name()
            )))),
        }
    }

    fn expect_addr(&self, v: &Value, what: &str) -> Result<super::value::Address, Fault> {
        match v {
            Value::Addr(a) => Ok(*a),
            other => Err(self.fail(RuntimeError::Type(format!(
                "cannot {what} a {}",
                other.type_name()
            )))),
        }
    }

    fn call(&mut self, callee: &'a Callee, args: Vec<Value>) -> Result<Ctl<'a>, Fault> {
        match callee {
            Callee::Builtin(b) => {
                if matches!(b, Builtin::Print | Builtin::Input) && !self.limits.io {
                    return Err(self.fail(RuntimeError::IoUnavailable));
                }
                Ok(Ctl::Ret(
                    builtin(*b, args, self.state).map_err(|e| self.fail(e))?,
                ))
            }
            Callee::Function(name) => {
                let Some(def) = self.functions.get(name) else {
                    return Err(self.fail(RuntimeError::Type(format!("unknown function '{name}'"))));
                };
                if def.params.len() != args.len() {
                    return Err(self.fail(RuntimeError::Type(format!(
                        "function '{name}' takes {} argument(s), got {}",
                        def.params.len(),
                        args.len()
                    ))));
                }
                let scope: ScopeFrame =
                    def.params.iter().map(|p| p.to_string()).zip(args).collect();
                let caller = std::mem::replace(&mut self.state.env, Env::with_frame(scope));
                self.kont.push(Frame::FnReturn { caller });
                self.push_label(LabelName::function_return());
                Ok(Ctl::Eval(&def.body))
            }
        }
    }
}

fn type_err(msg: String) -> RuntimeError {
    RuntimeError::Type(msg)
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

fn py_mod_f64(a: f64, b: f64) -> f64 {
    let r = a % b;
    if r != 0.0 && (r < 0.0) != (b < 0.0) {
        r + b
    } else {
        r
    }
}

/// Arithmetic and comparison. `/` always produces a Float; `//` and `%`
/// round toward negative infinity; mixed Int/Float operands promote to Float.
pub fn binary(op: BinOp, a: &Value, b: &Value) -> Result<Value, RuntimeError> {
    use Value::*;
    let mismatch = || {
        type_err(format!(
            "unsupported operands for '{}': {} and {}",
            op.symbol(),
            a.type_name(),
            b.type_name()
        ))
    };
    match op {
        BinOp::Eq => Ok(Bool(values_equal(a, b))),
        BinOp::Ne => Ok(Bool(!values_equal(a, b))),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (a, b) {
                (Int(x), Int(y)) => x.partial_cmp(y),
                (Str(x), Str(y)) => x.partial_cmp(y),
                _ => match (as_f64(a), as_f64(b)) {
                    (Some(x), Some(y)) => x.partial_cmp(&y),
                    _ => return Err(mismatch()),
                },
            };
            let r = match ord {
                None => false,
                Some(o) => match op {
                    BinOp::Lt => o.is_lt(),
                    BinOp::Le => o.is_le(),
                    BinOp::Gt => o.is_gt(),
                    _ => o.is_ge(),
                },
            };
            Ok(Bool(r))
        }
        BinOp::Add => match (a, b) {
            (Int(x), Int(y)) => x.checked_add(*y).map(Int).ok_or(RuntimeError::Overflow),
            (Str(x), Str(y)) => Ok(Str(format!("{x}{y}"))),
            _ => float_op(a, b, |x, y| x + y).ok_or_else(mismatch),
        },
        BinOp::Sub => match (a, b) {
            (Int(x), Int(y)) => x.checked_sub(*y).map(Int).ok_or(RuntimeError::Overflow),
            _ => float_op(a, b, |x, y| x - y).ok_or_else(mismatch),
        },
        BinOp::Mul => match (a, b) {
            (Int(x), Int(y)) => x.checked_mul(*y).map(Int).ok_or(RuntimeError::Overflow),
            _ => float_op(a, b, |x, y| x * y).ok_or_else(mismatch),
        },
        BinOp::Div => {
            let (x, y) = (
                as_f64(a).ok_or_else(mismatch)?,
                as_f64(b).ok_or_else(mismatch)?,
            );
            if y == 0.0 {
                return Err(RuntimeError::DivisionByZero);
            }
            Ok(Float(x / y))
        }
        BinOp::FloorDiv => match (a, b) {
            (Int(_), Int(0)) => Err(RuntimeError::DivisionByZero),
            (Int(x), Int(y)) => {
                let q = x.checked_div(*y).ok_or(RuntimeError::Overflow)?;
                let q = if (x % y != 0) && ((*x < 0) != (*y < 0)) {
                    q - 1
                } else {
                    q
                };
                Ok(Int(q))
            }
            _ => {
                let (x, y) = (
                    as_f64(a).ok_or_else(mismatch)?,
                    as_f64(b).ok_or_else(mismatch)?,
                );
                if y == 0.0 {
                    return Err(RuntimeError::DivisionByZero);
                }
                Ok(Float((x / y).floor()))
            }
        },
        BinOp::Mod => match (a, b) {
            (Int(_), Int(0)) => Err(RuntimeError::DivisionByZero),
            (Int(x), Int(y)) => {
                let r = x.checked_rem(*y).ok_or(RuntimeError::Overflow)?;
                Ok(Int(if r != 0 && ((r < 0) != (*y < 0)) {
                    r + y
                } else {
                    r
                }))
            }
            _ => {
                let (x, y) = (
                    as_f64(a).ok_or_else(mismatch)?,
                    as_f64(b).ok_or_else(mismatch)?,
                );
                if y == 0.0 {
                    return Err(RuntimeError::DivisionByZero);
                }
                Ok(Float(py_mod_f64(x, y)))
            }
        },
        BinOp::And | BinOp::Or => match (a, b) {
            (Bool(x), Bool(y)) => Ok(Bool(if op == BinOp::And { *x && *y } else { *x || *y })),
            _ => Err(mismatch()),
        },
    }
}

fn float_op(a: &Value, b: &Value, f: impl Fn(f64, f64) -> f64) -> Option<Value> {
    match (a, b) {
        (Value::Float(_), _) | (_, Value::Float(_)) => {
            Some(Value::Float(f(as_f64(a)?, as_f64(b)?)))
        }
        _ => None,
    }
}

/// `==`: numbers compare numerically across Int/Float, composites by address.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Float(y)) | (Value::Float(y), Value::Int(x)) => (*x as f64) == *y,
        _ => a == b,
    }
}

pub fn unary(op: UnOp, v: &Value) -> Result<Value, RuntimeError> {
    match (op, v) {
        (UnOp::Neg, Value::Int(i)) => i
            .checked_neg()
            .map(Value::Int)
            .ok_or(RuntimeError::Overflow),
        (UnOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        _ => Err(type_err(format!(
            "unsupported operand for '{}': {}",
            if op == UnOp::Neg { "-" } else { "not" },
            v.type_name()
        ))),
    }
}

fn record_key(key: &Value) -> Result<String, RuntimeError> {
    match key {
        Value::Str(s) => Ok(s.clone()),
        Value::Int(i) => Ok(i.to_string()),
        other => Err(type_err(format!(
            "record keys are Str or Int, not {}",
            other.type_name()
        ))),
    }
}

fn list_index(len: usize, key: &Value) -> Result<usize, RuntimeError> {
    match key {
        Value::Int(i) if *i >= 0 && (*i as u64) < len as u64 => Ok(*i as usize),
        Value::Int(i) => Err(RuntimeError::Index(format!(
            "index {i} out of range for length {len}"
        ))),
        other => Err(type_err(format!(
            "list indices are Int, not {}",
            other.type_name()
        ))),
    }
}

pub fn load_index(state: &HostState, coll: &Value, key: &Value) -> Result<Value, RuntimeError> {
    match coll {
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let i = list_index(chars.len(), key)?;
            Ok(Value::Str(chars[i].to_string()))
        }
        Value::Addr(a) => match state.heap.get(*a)? {
            Cell::List(items) => Ok(items[list_index(items.len(), key)?].clone()),
            Cell::Record(fields) => {
                let k = record_key(key)?;
                fields
                    .get(&k)
                    .cloned()
                    .ok_or_else(|| RuntimeError::Index(format!("missing key '{k}'")))
            }
            Cell::Value(_) => Err(type_err("cannot index a Ref".into())),
        },
        other => Err(type_err(format!("cannot index a {}", other.type_name()))),
    }
}

pub fn store_index(
    state: &mut HostState,
    coll: &Value,
    key: &Value,
    v: Value,
) -> Result<(), RuntimeError> {
    let Value::Addr(a) = coll else {
        return Err(type_err(format!(
            "cannot assign into a {}",
            coll.type_name()
        )));
    };
    match state.heap.get_mut(*a)? {
        Cell::List(items) => {
            let i = list_index(items.len(), key)?;
            items[i] = v;
            Ok(())
        }
        Cell::Record(fields) => {
            fields.insert(record_key(key)?, v);
            Ok(())
        }
        Cell::Value(_) => Err(type_err("cannot index a Ref".into())),
    }
}

fn builtin(b: Builtin, mut args: Vec<Value>, state: &mut HostState) -> Result<Value, RuntimeError> {
    let arg = |args: &mut Vec<Value>| args.remove(0);
    match b {
        Builtin::Print => {
            let v = arg(&mut args);
            let text = format_value(&v, &state.heap);
            state.out.write_str(&text)?;
            state.out.write_str("\n")?;
            Ok(Value::Unit)
        }
        Builtin::Input => {
            let prompt = match args.pop() {
                None => String::new(),
                Some(v) => format_value(&v, &state.heap),
            };
            state.read_line(&prompt).map(Value::Str)
        }
        Builtin::Str => Ok(Value::Str(format_value(&arg(&mut args), &state.heap))),
        Builtin::Len => match arg(&mut args) {
            Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
            Value::Addr(a) => match state.heap.get(a)? {
                Cell::List(items) => Ok(Value::Int(items.len() as i64)),
                Cell::Record(fields) => Ok(Value::Int(fields.len() as i64)),
                Cell::Value(_) => Err(type_err("len of a Ref".into())),
            },
            other => Err(type_err(format!("len of a {}", other.type_name()))),
        },
        Builtin::Int => match arg(&mut args) {
            Value::Int(i) => Ok(Value::Int(i)),
            Value::Bool(b) => Ok(Value::Int(i64::from(b))),
            Value::Float(x) => {
                let t = x.trunc();
                if t.is_finite() && t >= -(2f64.powi(63)) && t < 2f64.powi(63) {
                    Ok(Value::Int(t as i64))
                } else {
                    Err(RuntimeError::Overflow)
                }
            }
            Value::Str(s) => s
                .trim()
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|_| type_err(format!("cannot convert {s:?} to Int"))),
            other => Err(type_err(format!(
                "cannot convert {} to Int",
                other.type_name()
            ))),
        },
        Builtin::Float => match arg(&mut args) {
            Value::Int(i) => Ok(Value::Float(i as f64)),
            Value::Float(x) => Ok(Value::Float(x)),
            Value::Str(s) => s
                .trim()
                .parse::<f64>()
                .map(Value::Float)
                .map_err(|_| type_err(format!("cannot convert {s:?} to Float"))),
            other => Err(type_err(format!(
                "cannot convert {} to Float",
                other.type_name()
            ))),
        },
        Builtin::Push => {
            let coll = arg(&mut args);
            let v = arg(&mut args);
            let Value::Addr(a) = coll else {
                return Err(type_err(format!("push onto a {}", coll.type_name())));
            };
            match state.heap.get_mut(a)? {
                Cell::List(items) => {
                    items.push(v);
                    Ok(Value::Unit)
                }
                other => Err(type_err(format!("push onto a {}", other.type_name()))),
            }
        }
        Builtin::Keys => {
            let coll = arg(&mut args);
            let keys = match &coll {
                Value::Addr(a) => match state.heap.get(*a)? {
                    Cell::Record(fields) => fields.keys().cloned().map(Value::Str).collect(),
                    other => return Err(type_err(format!("keys of a {}", other.type_name()))),
                },
                other => return Err(type_err(format!("keys of a {}", other.type_name()))),
            };
            Ok(Value::Addr(state.heap.alloc(Cell::List(keys))))
        }
        Builtin::Contains => {
            let coll = arg(&mut args);
            let needle = arg(&mut args);
            match &coll {
                Value::Str(s) => match &needle {
                    Value::Str(n) => Ok(Value::Bool(s.contains(n.as_str()))),
                    other => Err(type_err(format!(
                        "substring must be Str, not {}",
                        other.type_name()
                    ))),
                },
                Value::Addr(a) => match state.heap.get(*a)? {
                    Cell::List(items) => {
                        Ok(Value::Bool(items.iter().any(|x| values_equal(x, &needle))))
                    }
                    Cell::Record(fields) => {
                        Ok(Value::Bool(fields.contains_key(&record_key(&needle)?)))
                    }
                    Cell::Value(_) => Err(type_err("contains on a Ref".into())),
                },
                other => Err(type_err(format!("contains on a {}", other.type_name()))),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no natural block with id '{0}'")]
pub struct UnknownBlock(pub String);

/// Labels lexically visible at a natural block: user labels, the nearest
/// loop's `break`/`continue`, and `return` inside a function body.
pub fn enclosing_labels(
    program: &super::ast::Program,
    block_id: &super::ast::BlockId,
) -> Result<indexmap::IndexSet<LabelName>, UnknownBlock> {
    fn walk(
        e: &Expr,
        id: &super::ast::BlockId,
        scope: &mut Vec<LabelName>,
    ) -> Option<indexmap::IndexSet<LabelName>> {
        match &e.kind {
            ExprKind::Natural(b) if &b.id == id => Some(scope.iter().cloned().collect()),
            ExprKind::While(cond, body) => {
                if let Some(found) = walk(cond, id, scope) {
                    return Some(found);
                }
                scope.push(LabelName::loop_break());
                scope.push(LabelName::loop_continue());
                let found = walk(body, id, scope);
                scope.truncate(scope.len() - 2);
                found
            }
            ExprKind::Label(l, body) => {
                scope.push(l.clone());
                let found = walk(body, id, scope);
                scope.pop();
                found
            }
            _ => e.children().into_iter().find_map(|c| walk(c, id, scope)),
        }
    }
    for def in program.functions.values() {
        let mut scope = vec![LabelName::function_return()];
        if let Some(found) = walk(&def.body, block_id, &mut scope) {
            return Ok(found);
        }
    }
    walk(&program.body, block_id, &mut Vec::new()).ok_or_else(|| UnknownBlock(block_id.0.clone()))
}

//! Test support: a random program generator and an independent big-step
//! reference evaluator for the generated programs.
//!
//! The generator builds its own syntax tree, prints it as source text for the
//! real parser, and evaluates the tree directly. Nothing here calls into the
//! interpreter, so agreement between the two is a real check.

#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;

use njr_core::agent::{Agent, AgentContext, Rule, Script};
use njr_core::host::{Cell, Heap, Value};
use njr_core::nfi::AgentStep;
use njr_core::AgentError;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;

// ---------------------------------------------------------------- syntax

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl Op {
    fn sym(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::FloorDiv => "//",
            Op::Mod => "%",
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::And => "and",
            Op::Or => "or",
        }
    }
}

/// What a generated natural block does once it has read its input.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Assign the output, then return.
    Return(i64),
    /// Jump, optionally with an Int payload.
    Goto(String, Option<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nat {
    pub tag: usize,
    pub input: String,
    pub output: String,
    pub threshold: i64,
    pub on_hit: Action,
    pub on_miss: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub enum E {
    Unit,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Var(String),
    Let(String, Box<E>, Box<E>),
    Seq(Vec<E>),
    If(Box<E>, Box<E>, Option<Box<E>>),
    While(Box<E>, Box<E>),
    Bin(Op, Box<E>, Box<E>),
    Neg(Box<E>),
    Not(Box<E>),
    Ref(Box<E>),
    Deref(Box<E>),
    SetRef(Box<E>, Box<E>),
    SetIndex(Box<E>, Box<E>, Box<E>),
    Label(String, Box<E>),
    Goto(String, Option<Box<E>>),
    Break,
    Continue,
    Return(Box<E>),
    Raise(Box<E>),
    Call(String, Vec<E>),
    Builtin(&'static str, Vec<E>),
    Index(Box<E>, Box<E>),
    Field(Box<E>, String),
    List(Vec<E>),
    Record(Vec<(String, E)>),
    Natural(Nat),
}

#[derive(Debug, Clone)]
pub struct Def {
    pub name: String,
    pub params: Vec<String>,
    pub body: E,
}

#[derive(Debug, Clone)]
pub struct Prog {
    pub defs: Vec<Def>,
    pub body: E,
}

fn b(e: E) -> Box<E> {
    Box::new(e)
}

// ---------------------------------------------------------------- printing

pub fn nat_text(n: &Nat) -> String {
    format!(
        "Step {}: read <{}>, then set <:{}> or leave the enclosing construct.",
        n.tag, n.input, n.output
    )
}

fn print_expr(e: &E, out: &mut String) {
    let list = |items: &[E], out: &mut String| {
        for (i, x) in items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            print_expr(x, out);
        }
    };
    match e {
        E::Unit => out.push_str("()"),
        E::Bool(v) => write!(out, "{v}").unwrap(),
        E::Int(i) => {
            assert!(*i >= 0, "negative literals are built with Neg");
            write!(out, "{i}").unwrap()
        }
        E::Float(x) => {
            assert!(*x >= 0.0 && x.is_finite());
            write!(out, "{x:?}").unwrap()
        }
        E::Str(s) => write!(out, "\"{s}\"").unwrap(),
        E::Var(v) => out.push_str(v),
        E::Let(x, v, body) => {
            write!(out, "(let {x} = ").unwrap();
            print_expr(v, out);
            out.push_str(" in ");
            print_expr(body, out);
            out.push(')');
        }
        E::Seq(items) => {
            out.push('(');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                print_expr(x, out);
            }
            out.push(')');
        }
        E::If(c, t, f) => {
            out.push_str("if ");
            print_expr(c, out);
            out.push_str(" then ");
            print_expr(t, out);
            if let Some(f) = f {
                out.push_str(" else ");
                print_expr(f, out);
            }
            out.push_str(" end");
        }
        E::While(c, body) => {
            out.push_str("while ");
            print_expr(c, out);
            out.push_str(" do ");
            print_expr(body, out);
            out.push_str(" end");
        }
        E::Bin(op, l, r) => {
            out.push('(');
            print_expr(l, out);
            write!(out, " {} ", op.sym()).unwrap();
            print_expr(r, out);
            out.push(')');
        }
        E::Neg(a) => {
            out.push_str("(-");
            print_expr(a, out);
            out.push(')');
        }
        E::Not(a) => {
            out.push_str("(not ");
            print_expr(a, out);
            out.push(')');
        }
        E::Ref(a) => {
            out.push_str("(ref ");
            print_expr(a, out);
            out.push(')');
        }
        E::Deref(a) => {
            out.push_str("!(");
            print_expr(a, out);
            out.push(')');
        }
        E::SetRef(t, v) => {
            out.push('(');
            print_expr(t, out);
            out.push_str(" := ");
            print_expr(v, out);
            out.push(')');
        }
        E::SetIndex(c, k, v) => {
            out.push_str("((");
            print_expr(c, out);
            out.push_str(")[");
            print_expr(k, out);
            out.push_str("] := ");
            print_expr(v, out);
            out.push(')');
        }
        E::Label(l, body) => {
            write!(out, "label {l}: ").unwrap();
            print_expr(body, out);
            out.push_str(" end");
        }
        E::Goto(l, None) => write!(out, "(goto {l})").unwrap(),
        E::Goto(l, Some(p)) => {
            write!(out, "(goto {l} with ").unwrap();
            print_expr(p, out);
            out.push(')');
        }
        E::Break => out.push_str("(break)"),
        E::Continue => out.push_str("(continue)"),
        E::Return(v) => {
            out.push_str("(return ");
            print_expr(v, out);
            out.push(')');
        }
        E::Raise(v) => {
            out.push_str("(raise ");
            print_expr(v, out);
            out.push(')');
        }
        E::Call(f, args) => {
            write!(out, "{f}(").unwrap();
            list(args, out);
            out.push(')');
        }
        E::Builtin(f, args) => {
            write!(out, "{f}(").unwrap();
            list(args, out);
            out.push(')');
        }
        E::Index(c, k) => {
            out.push('(');
            print_expr(c, out);
            out.push_str(")[");
            print_expr(k, out);
            out.push(']');
        }
        E::Field(c, f) => {
            out.push('(');
            print_expr(c, out);
            write!(out, ").{f}").unwrap();
        }
        E::List(items) => {
            out.push('[');
            list(items, out);
            out.push(']');
        }
        E::Record(fields) => {
            out.push('{');
            for (i, (k, v)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write!(out, "{k}: ").unwrap();
                print_expr(v, out);
            }
            out.push('}');
        }
        E::Natural(n) => write!(out, "natural \"\"\"{}\"\"\"", nat_text(n)).unwrap(),
    }
}

impl Prog {
    pub fn source(&self) -> String {
        let mut out = String::new();
        for d in &self.defs {
            write!(out, "def {}({}) do ", d.name, d.params.join(", ")).unwrap();
            print_expr(&d.body, &mut out);
            out.push_str(" end\n");
        }
        print_expr(&self.body, &mut out);
        out.push('\n');
        out
    }

    /// Natural blocks in source order.
    pub fn naturals(&self) -> Vec<&Nat> {
        fn walk<'a>(e: &'a E, out: &mut Vec<&'a Nat>) {
            match e {
                E::Natural(n) => out.push(n),
                E::Let(_, a, c)
                | E::While(a, c)
                | E::Bin(_, a, c)
                | E::SetRef(a, c)
                | E::Index(a, c) => {
                    walk(a, out);
                    walk(c, out);
                }
                E::SetIndex(a, k, v) => {
                    walk(a, out);
                    walk(k, out);
                    walk(v, out);
                }
                E::If(c, t, f) => {
                    walk(c, out);
                    walk(t, out);
                    if let Some(f) = f {
                        walk(f, out);
                    }
                }
                E::Neg(a)
                | E::Not(a)
                | E::Ref(a)
                | E::Deref(a)
                | E::Label(_, a)
                | E::Return(a)
                | E::Raise(a)
                | E::Field(a, _) => walk(a, out),
                E::Goto(_, Some(a)) => walk(a, out),
                E::Seq(xs) | E::Call(_, xs) | E::Builtin(_, xs) | E::List(xs) => {
                    xs.iter().for_each(|x| walk(x, out))
                }
                E::Record(fs) => fs.iter().for_each(|(_, x)| walk(x, out)),
                _ => {}
            }
        }
        let mut out = Vec::new();
        for d in &self.defs {
            walk(&d.body, &mut out);
        }
        walk(&self.body, &mut out);
        out
    }

    /// Script for the generated natural blocks. Block ids are ordinals in
    /// source order, and every generated block is printed on the one line
    /// of the body or of its function, so definitions come first.
    pub fn script(&self) -> Script {
        let mut blocks = indexmap::IndexMap::new();
        for (i, n) in self.naturals().into_iter().enumerate() {
            let lookup = json!({"kind": "Lookup", "var": n.input});
            let act = |a: &Action| -> Vec<serde_json::Value> {
                match a {
                    Action::Return(k) => vec![
                        lookup.clone(),
                        json!({"kind": "Assign", "var": n.output, "value": {"int": k}}),
                        json!({"kind": "Return", "value": null}),
                    ],
                    Action::Goto(l, None) => {
                        vec![lookup.clone(), json!({"kind": "Goto", "label": l})]
                    }
                    Action::Goto(l, Some(k)) => {
                        vec![
                            lookup.clone(),
                            json!({"kind": "Goto", "label": l, "value": {"int": k}}),
                        ]
                    }
                }
            };
            let hit = format!("{{\"int\":{}}}", n.threshold);
            blocks.insert(
                format!("n{i}"),
                vec![
                    Rule {
                        guard: Some(hit),
                        steps: act(&n.on_hit),
                    },
                    Rule {
                        guard: None,
                        steps: act(&n.on_miss),
                    },
                ],
            );
        }
        Script { blocks }
    }
}

// ---------------------------------------------------------------- reference

#[derive(Debug, Clone, PartialEq)]
pub enum RVal {
    Unit,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Addr(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RCell {
    Ref(RVal),
    List(Vec<RVal>),
    Rec(Vec<(String, RVal)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RErr {
    Type,
    Overflow,
    DivZero,
    Index,
    Undefined,
    Raised(String),
    OutOfFuel,
}

enum Sig {
    Jump(String, Option<RVal>),
    Err(RErr),
}

impl From<RErr> for Sig {
    fn from(e: RErr) -> Self {
        Sig::Err(e)
    }
}

type R = Result<RVal, Sig>;

pub struct Reference<'p> {
    pub heap: Vec<RCell>,
    pub out: String,
    fuel: u64,
    defs: HashMap<&'p str, &'p Def>,
}

#[derive(Debug)]
pub struct RefOutcome {
    pub result: Result<RVal, RErr>,
    pub out: String,
    pub heap: Vec<RCell>,
}

fn show_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        (if x > 0.0 { "inf" } else { "-inf" }).into()
    } else {
        // Shortest round-trip form, always with a point or exponent.
        format!("{x:?}")
    }
}

impl<'p> Reference<'p> {
    pub fn run(prog: &'p Prog, fuel: u64) -> RefOutcome {
        let mut r = Reference {
            heap: Vec::new(),
            out: String::new(),
            fuel,
            defs: prog.defs.iter().map(|d| (d.name.as_str(), d)).collect(),
        };
        let mut env = Vec::new();
        let result = match r.eval(&prog.body, &mut env) {
            Ok(v) => Ok(v),
            Err(Sig::Err(e)) => Err(e),
            Err(Sig::Jump(l, p)) if l == "raise" => Err(RErr::Raised(
                p.map(|v| r.show(&v, true)).unwrap_or_default(),
            )),
            Err(Sig::Jump(l, _)) => panic!("generator produced an escaping jump to {l}"),
        };
        RefOutcome {
            result,
            out: r.out,
            heap: r.heap,
        }
    }

    pub fn show(&self, v: &RVal, top: bool) -> String {
        let mut seen = Vec::new();
        self.show_in(v, top, &mut seen)
    }

    fn show_in(&self, v: &RVal, top: bool, seen: &mut Vec<usize>) -> String {
        match v {
            RVal::Unit => "()".into(),
            RVal::Bool(b) => b.to_string(),
            RVal::Int(i) => i.to_string(),
            RVal::Float(x) => show_float(*x),
            RVal::Str(s) if top => s.clone(),
            RVal::Str(s) => format!("\"{s}\""),
            RVal::Addr(a) => {
                if seen.contains(a) {
                    return "...".into();
                }
                seen.push(*a);
                let s = match &self.heap[*a] {
                    RCell::Ref(x) => format!("ref({})", self.show_in(x, false, seen)),
                    RCell::List(xs) => {
                        let parts: Vec<String> =
                            xs.iter().map(|x| self.show_in(x, false, seen)).collect();
                        format!("[{}]", parts.join(", "))
                    }
                    RCell::Rec(fs) => {
                        let parts: Vec<String> = fs
                            .iter()
                            .map(|(k, x)| format!("{k}: {}", self.show_in(x, false, seen)))
                            .collect();
                        format!("{{{}}}", parts.join(", "))
                    }
                };
                seen.pop();
                s
            }
        }
    }

    fn alloc(&mut self, c: RCell) -> RVal {
        self.heap.push(c);
        RVal::Addr(self.heap.len() - 1)
    }

    fn truthy(v: &RVal) -> Result<bool, RErr> {
        match v {
            RVal::Bool(b) => Ok(*b),
            _ => Err(RErr::Type),
        }
    }

    fn num(v: &RVal) -> Option<f64> {
        match v {
            RVal::Int(i) => Some(*i as f64),
            RVal::Float(x) => Some(*x),
            _ => None,
        }
    }

    fn eq(a: &RVal, c: &RVal) -> bool {
        match (a, c) {
            (RVal::Int(x), RVal::Float(y)) | (RVal::Float(y), RVal::Int(x)) => *x as f64 == *y,
            _ => a == c,
        }
    }

    fn arith(op: Op, a: &RVal, c: &RVal) -> Result<RVal, RErr> {
        use RVal::*;
        match op {
            Op::Eq => return Ok(Bool(Self::eq(a, c))),
            Op::Ne => return Ok(Bool(!Self::eq(a, c))),
            _ => {}
        }
        if let (Str(x), Str(y)) = (a, c) {
            return match op {
                Op::Add => Ok(Str(format!("{x}{y}"))),
                Op::Lt => Ok(Bool(x < y)),
                Op::Le => Ok(Bool(x <= y)),
                Op::Gt => Ok(Bool(x > y)),
                Op::Ge => Ok(Bool(x >= y)),
                _ => Err(RErr::Type),
            };
        }
        if let (Int(x), Int(y)) = (a, c) {
            let (x, y) = (*x, *y);
            return match op {
                Op::Add => x.checked_add(y).map(Int).ok_or(RErr::Overflow),
                Op::Sub => x.checked_sub(y).map(Int).ok_or(RErr::Overflow),
                Op::Mul => x.checked_mul(y).map(Int).ok_or(RErr::Overflow),
                Op::Div if y == 0 => Err(RErr::DivZero),
                Op::Div => Ok(Float(x as f64 / y as f64)),
                Op::FloorDiv | Op::Mod if y == 0 => Err(RErr::DivZero),
                Op::FloorDiv | Op::Mod => {
                    // Floor quotient from the Euclidean one: they differ only
                    // for a negative divisor with a nonzero remainder.
                    let q = x.checked_div_euclid(y).ok_or(RErr::Overflow)?;
                    let r = x.rem_euclid(y);
                    let q = if y < 0 && r != 0 { q - 1 } else { q };
                    if op == Op::FloorDiv {
                        Ok(Int(q))
                    } else {
                        Ok(Int(x.wrapping_sub(y.wrapping_mul(q))))
                    }
                }
                Op::Lt => Ok(Bool(x < y)),
                Op::Le => Ok(Bool(x <= y)),
                Op::Gt => Ok(Bool(x > y)),
                Op::Ge => Ok(Bool(x >= y)),
                _ => Err(RErr::Type),
            };
        }
        if let (Bool(x), Bool(y)) = (a, c) {
            return match op {
                Op::And => Ok(Bool(*x && *y)),
                Op::Or => Ok(Bool(*x || *y)),
                _ => Err(RErr::Type),
            };
        }
        let (Some(x), Some(y)) = (Self::num(a), Self::num(c)) else {
            return Err(RErr::Type);
        };
        match op {
            Op::Add => Ok(Float(x + y)),
            Op::Sub => Ok(Float(x - y)),
            Op::Mul => Ok(Float(x * y)),
            Op::Div if y == 0.0 => Err(RErr::DivZero),
            Op::Div => Ok(Float(x / y)),
            Op::Lt => Ok(Bool(x < y)),
            Op::Le => Ok(Bool(x <= y)),
            Op::Gt => Ok(Bool(x > y)),
            Op::Ge => Ok(Bool(x >= y)),
            // Float floor division and modulo are never generated.
            _ => Err(RErr::Type),
        }
    }

    fn key(k: &RVal) -> Result<String, RErr> {
        match k {
            RVal::Str(s) => Ok(s.clone()),
            RVal::Int(i) => Ok(i.to_string()),
            _ => Err(RErr::Type),
        }
    }

    fn index(&self, c: &RVal, k: &RVal) -> Result<RVal, RErr> {
        match c {
            RVal::Str(s) => {
                let RVal::Int(i) = k else {
                    return Err(RErr::Type);
                };
                let chars: Vec<char> = s.chars().collect();
                usize::try_from(*i)
                    .ok()
                    .and_then(|i| chars.get(i))
                    .map(|ch| RVal::Str(ch.to_string()))
                    .ok_or(RErr::Index)
            }
            RVal::Addr(a) => match &self.heap[*a] {
                RCell::List(xs) => {
                    let RVal::Int(i) = k else {
                        return Err(RErr::Type);
                    };
                    usize::try_from(*i)
                        .ok()
                        .and_then(|i| xs.get(i))
                        .cloned()
                        .ok_or(RErr::Index)
                }
                RCell::Rec(fs) => {
                    let k = Self::key(k)?;
                    fs.iter()
                        .find(|(n, _)| *n == k)
                        .map(|(_, v)| v.clone())
                        .ok_or(RErr::Index)
                }
                RCell::Ref(_) => Err(RErr::Type),
            },
            _ => Err(RErr::Type),
        }
    }

    fn builtin(&mut self, name: &str, args: Vec<RVal>) -> Result<RVal, RErr> {
        let a = &args[0];
        match name {
            "print" => {
                let s = self.show(a, true);
                self.out.push_str(&s);
                self.out.push('\n');
                Ok(RVal::Unit)
            }
            "str" => Ok(RVal::Str(self.show(a, true))),
            "len" => match a {
                RVal::Str(s) => Ok(RVal::Int(s.chars().count() as i64)),
                RVal::Addr(p) => match &self.heap[*p] {
                    RCell::List(xs) => Ok(RVal::Int(xs.len() as i64)),
                    RCell::Rec(fs) => Ok(RVal::Int(fs.len() as i64)),
                    RCell::Ref(_) => Err(RErr::Type),
                },
                _ => Err(RErr::Type),
            },
            "float" => match a {
                RVal::Int(i) => Ok(RVal::Float(*i as f64)),
                RVal::Float(x) => Ok(RVal::Float(*x)),
                _ => Err(RErr::Type),
            },
            "int" => match a {
                RVal::Int(i) => Ok(RVal::Int(*i)),
                RVal::Bool(b) => Ok(RVal::Int(*b as i64)),
                RVal::Float(x) => {
                    let t = x.trunc();
                    if t.is_finite()
                        && (-9.223_372_036_854_776e18..9.223_372_036_854_776e18)
                            .contains(&t)
                    {
                        Ok(RVal::Int(t as i64))
                    } else {
                        Err(RErr::Overflow)
                    }
                }
                _ => Err(RErr::Type),
            },
            "push" => {
                let RVal::Addr(p) = a else {
                    return Err(RErr::Type);
                };
                match &mut self.heap[*p] {
                    RCell::List(xs) => {
                        xs.push(args[1].clone());
                        Ok(RVal::Unit)
                    }
                    _ => Err(RErr::Type),
                }
            }
            "keys" => {
                let RVal::Addr(p) = a else {
                    return Err(RErr::Type);
                };
                let RCell::Rec(fs) = &self.heap[*p] else {
                    return Err(RErr::Type);
                };
                let ks = fs.iter().map(|(k, _)| RVal::Str(k.clone())).collect();
                Ok(self.alloc(RCell::List(ks)))
            }
            "contains" => match a {
                RVal::Str(s) => match &args[1] {
                    RVal::Str(n) => Ok(RVal::Bool(s.contains(n.as_str()))),
                    _ => Err(RErr::Type),
                },
                RVal::Addr(p) => match &self.heap[*p] {
                    RCell::List(xs) => Ok(RVal::Bool(xs.iter().any(|x| Self::eq(x, &args[1])))),
                    RCell::Rec(fs) => {
                        let k = Self::key(&args[1])?;
                        Ok(RVal::Bool(fs.iter().any(|(n, _)| *n == k)))
                    }
                    RCell::Ref(_) => Err(RErr::Type),
                },
                _ => Err(RErr::Type),
            },
            other => panic!("builtin {other} is not generated"),
        }
    }

    fn lookup(env: &[(String, RVal)], x: &str) -> Result<RVal, RErr> {
        env.iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, v)| v.clone())
            .ok_or(RErr::Undefined)
    }

    fn eval_all(&mut self, es: &[E], env: &mut Vec<(String, RVal)>) -> Result<Vec<RVal>, Sig> {
        es.iter().map(|e| self.eval(e, env)).collect()
    }

    fn eval(&mut self, e: &E, env: &mut Vec<(String, RVal)>) -> R {
        if self.fuel == 0 {
            return Err(RErr::OutOfFuel.into());
        }
        self.fuel -= 1;
        Ok(match e {
            E::Unit => RVal::Unit,
            E::Bool(v) => RVal::Bool(*v),
            E::Int(i) => RVal::Int(*i),
            E::Float(x) => RVal::Float(*x),
            E::Str(s) => RVal::Str(s.clone()),
            E::Var(x) => Self::lookup(env, x)?,
            E::Let(x, v, body) => {
                let v = self.eval(v, env)?;
                let mark = env.len();
                env.push((x.clone(), v));
                let r = self.eval(body, env);
                env.truncate(mark);
                r?
            }
            E::Seq(items) => {
                let mut last = RVal::Unit;
                for x in items {
                    last = self.eval(x, env)?;
                }
                last
            }
            E::If(c, t, f) => {
                let c = self.eval(c, env)?;
                if Self::truthy(&c)? {
                    self.eval(t, env)?
                } else if let Some(f) = f {
                    self.eval(f, env)?
                } else {
                    RVal::Unit
                }
            }
            E::While(c, body) => loop {
                let cv = self.eval(c, env)?;
                if !Self::truthy(&cv)? {
                    break RVal::Unit;
                }
                match self.eval(body, env) {
                    Ok(_) => {}
                    Err(Sig::Jump(l, _)) if l == "continue" => {}
                    Err(Sig::Jump(l, _)) if l == "break" => break RVal::Unit,
                    Err(other) => return Err(other),
                }
            },
            E::Bin(Op::And, l, r) => {
                let lv = self.eval(l, env)?;
                if Self::truthy(&lv)? {
                    let rv = self.eval(r, env)?;
                    RVal::Bool(Self::truthy(&rv)?)
                } else {
                    RVal::Bool(false)
                }
            }
            E::Bin(Op::Or, l, r) => {
                let lv = self.eval(l, env)?;
                if Self::truthy(&lv)? {
                    RVal::Bool(true)
                } else {
                    let rv = self.eval(r, env)?;
                    RVal::Bool(Self::truthy(&rv)?)
                }
            }
            E::Bin(op, l, r) => {
                let lv = self.eval(l, env)?;
                let rv = self.eval(r, env)?;
                Self::arith(*op, &lv, &rv)?
            }
            E::Neg(a) => match self.eval(a, env)? {
                RVal::Int(i) => RVal::Int(i.checked_neg().ok_or(RErr::Overflow)?),
                RVal::Float(x) => RVal::Float(-x),
                _ => return Err(RErr::Type.into()),
            },
            E::Not(a) => {
                let v = self.eval(a, env)?;
                RVal::Bool(!Self::truthy(&v)?)
            }
            E::Ref(a) => {
                let v = self.eval(a, env)?;
                self.alloc(RCell::Ref(v))
            }
            E::Deref(a) => match self.eval(a, env)? {
                RVal::Addr(p) => match &self.heap[p] {
                    RCell::Ref(v) => v.clone(),
                    _ => return Err(RErr::Type.into()),
                },
                _ => return Err(RErr::Type.into()),
            },
            E::SetRef(t, v) => {
                let t = self.eval(t, env)?;
                let v = self.eval(v, env)?;
                match t {
                    RVal::Addr(p) => match &mut self.heap[p] {
                        RCell::Ref(slot) => *slot = v,
                        _ => return Err(RErr::Type.into()),
                    },
                    _ => return Err(RErr::Type.into()),
                }
                RVal::Unit
            }
            E::SetIndex(c, k, v) => {
                let c = self.eval(c, env)?;
                let k = self.eval(k, env)?;
                let v = self.eval(v, env)?;
                let RVal::Addr(p) = c else {
                    return Err(RErr::Type.into());
                };
                match &mut self.heap[p] {
                    RCell::List(xs) => {
                        let RVal::Int(i) = k else {
                            return Err(RErr::Type.into());
                        };
                        let slot = usize::try_from(i)
                            .ok()
                            .and_then(|i| xs.get_mut(i))
                            .ok_or(RErr::Index)?;
                        *slot = v;
                    }
                    RCell::Rec(fs) => {
                        let k = Self::key(&k)?;
                        match fs.iter_mut().find(|(n, _)| *n == k) {
                            Some(slot) => slot.1 = v,
                            None => fs.push((k, v)),
                        }
                    }
                    RCell::Ref(_) => return Err(RErr::Type.into()),
                }
                RVal::Unit
            }
            E::Label(l, body) => match self.eval(body, env) {
                Err(Sig::Jump(t, p)) if t == *l => p.unwrap_or(RVal::Unit),
                other => other?,
            },
            E::Goto(l, p) => {
                let p = match p {
                    Some(p) => Some(self.eval(p, env)?),
                    None => None,
                };
                return Err(Sig::Jump(l.clone(), p));
            }
            E::Break => return Err(Sig::Jump("break".into(), None)),
            E::Continue => return Err(Sig::Jump("continue".into(), None)),
            E::Return(v) => {
                let v = self.eval(v, env)?;
                return Err(Sig::Jump("return".into(), Some(v)));
            }
            E::Raise(v) => {
                let v = self.eval(v, env)?;
                return Err(Sig::Jump("raise".into(), Some(v)));
            }
            E::Call(f, args) => {
                let args = self.eval_all(args, env)?;
                let def = self.defs[f.as_str()];
                let mut callee: Vec<(String, RVal)> =
                    def.params.iter().cloned().zip(args).collect();
                match self.eval(&def.body, &mut callee) {
                    Err(Sig::Jump(l, p)) if l == "return" => p.unwrap_or(RVal::Unit),
                    other => other?,
                }
            }
            E::Builtin(name, args) => {
                let args = self.eval_all(args, env)?;
                self.builtin(name, args)?
            }
            E::Index(c, k) => {
                let c = self.eval(c, env)?;
                let k = self.eval(k, env)?;
                self.index(&c, &k)?
            }
            E::Field(c, f) => {
                let c = self.eval(c, env)?;
                self.index(&c, &RVal::Str(f.clone()))?
            }
            E::List(items) => {
                let xs = self.eval_all(items, env)?;
                self.alloc(RCell::List(xs))
            }
            E::Record(fields) => {
                let mut fs: Vec<(String, RVal)> = Vec::new();
                for (k, x) in fields {
                    let v = self.eval(x, env)?;
                    fs.push((k.clone(), v));
                }
                self.alloc(RCell::Rec(fs))
            }
            E::Natural(n) => {
                let RVal::Int(i) = Self::lookup(env, &n.input)? else {
                    panic!("natural inputs are Int variables")
                };
                match if i == n.threshold {
                    &n.on_hit
                } else {
                    &n.on_miss
                } {
                    Action::Return(k) => {
                        match env.iter_mut().rev().find(|(x, _)| *x == n.output) {
                            Some(slot) => slot.1 = RVal::Int(*k),
                            None => env.push((n.output.clone(), RVal::Int(*k))),
                        }
                        RVal::Unit
                    }
                    Action::Goto(l, p) => return Err(Sig::Jump(l.clone(), p.map(RVal::Int))),
                }
            }
        })
    }
}

/// Compares a reference value with an interpreter value, following both
/// heaps. Addresses must coincide: both allocate in evaluation order.
pub fn same_value(r: &RVal, v: &Value) -> bool {
    match (r, v) {
        (RVal::Unit, Value::Unit) => true,
        (RVal::Bool(a), Value::Bool(b)) => a == b,
        (RVal::Int(a), Value::Int(b)) => a == b,
        (RVal::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
        (RVal::Str(a), Value::Str(b)) => a == b,
        (RVal::Addr(a), Value::Addr(b)) => *a as u64 == b.0,
        _ => false,
    }
}

pub fn same_heap(r: &[RCell], h: &Heap) -> bool {
    r.len() == h.len()
        && r.iter().zip(h.iter()).all(|(rc, (_, hc))| match (rc, hc) {
            (RCell::Ref(a), Cell::Value(b)) => same_value(a, b),
            (RCell::List(a), Cell::List(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| same_value(x, y))
            }
            (RCell::Rec(a), Cell::Record(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|((ka, x), (kb, y))| ka == kb && same_value(x, y))
            }
            _ => false,
        })
}

// ---------------------------------------------------------------- generator

#[derive(Clone, Default)]
struct Scope {
    ints: Vec<String>,
    floats: Vec<String>,
    strs: Vec<String>,
    refs: Vec<String>,
    lists: Vec<String>,
    recs: Vec<String>,
    labels: Vec<String>,
    in_loop: bool,
    in_fn: bool,
    /// Functions callable from here, with their arity.
    fns: Vec<(String, usize)>,
}

pub struct Gen {
    rng: StdRng,
    fresh: usize,
    pub naturals: bool,
    nat_tag: usize,
}

const WORDS: [&str; 8] = ["ab", "cd", "x", "hello", "q", "zz", "mid", "k9"];
const FIELDS: [&str; 3] = ["a", "b", "c"];

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen {
            rng: StdRng::seed_from_u64(seed),
            fresh: 0,
            naturals: false,
            nat_tag: 0,
        }
    }

    pub fn with_naturals(seed: u64) -> Self {
        Gen {
            naturals: true,
            ..Gen::new(seed)
        }
    }

    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn pick(&mut self, xs: &[String]) -> String {
        xs.choose(&mut self.rng).expect("non-empty").clone()
    }

    fn small(&mut self) -> E {
        let n = self.rng.gen_range(-6i64..25);
        if n < 0 {
            E::Neg(b(E::Int(-n)))
        } else {
            E::Int(n)
        }
    }

    fn int(&mut self, s: &Scope, depth: u32) -> E {
        if depth == 0 {
            return match self.rng.gen_range(0..4) {
                0 if !s.ints.is_empty() => E::Var(self.pick(&s.ints)),
                1 if !s.refs.is_empty() => E::Deref(b(E::Var(self.pick(&s.refs)))),
                _ => self.small(),
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..22) {
            0..=2 => self.small(),
            3 | 4 if !s.ints.is_empty() => E::Var(self.pick(&s.ints)),
            5 if !s.refs.is_empty() => E::Deref(b(E::Var(self.pick(&s.refs)))),
            6..=8 => {
                let op = *[Op::Add, Op::Sub, Op::Mul, Op::Add]
                    .choose(&mut self.rng)
                    .unwrap();
                E::Bin(op, b(self.int(s, d)), b(self.int(s, d)))
            }
            9 => {
                let op = if self.chance(0.5) {
                    Op::FloorDiv
                } else {
                    Op::Mod
                };
                E::Bin(op, b(self.int(s, d)), b(self.int(s, d)))
            }
            10 => E::If(
                b(self.boolean(s, d)),
                b(self.int(s, d)),
                Some(b(self.int(s, d))),
            ),
            11 => {
                let x = self.name("v");
                let v = self.int(s, d);
                let mut inner = s.clone();
                inner.ints.push(x.clone());
                E::Let(x, b(v), b(self.int(&inner, d)))
            }
            12 if !s.lists.is_empty() => E::Builtin("len", vec![E::Var(self.pick(&s.lists))]),
            13 if !s.lists.is_empty() => {
                // Floor modulo by the length keeps the index in range.
                let xs = self.pick(&s.lists);
                let i = E::Bin(
                    Op::Mod,
                    b(self.int(s, d)),
                    b(E::Builtin("len", vec![E::Var(xs.clone())])),
                );
                E::Index(b(E::Var(xs)), b(i))
            }
            14 if !s.recs.is_empty() => {
                let r = self.pick(&s.recs);
                let f = FIELDS.choose(&mut self.rng).unwrap().to_string();
                if self.chance(0.5) {
                    E::Field(b(E::Var(r)), f)
                } else {
                    E::Index(b(E::Var(r)), b(E::Str(f)))
                }
            }
            15 if !s.fns.is_empty() => {
                let (f, n) = s.fns.choose(&mut self.rng).unwrap().clone();
                E::Call(f, (0..n).map(|_| self.int(s, d)).collect())
            }
            16 => {
                let l = self.name("L");
                let mut inner = s.clone();
                inner.labels.push(l.clone());
                let jump = E::If(
                    b(self.boolean(&inner, d)),
                    b(E::Goto(l.clone(), Some(b(self.int(&inner, d))))),
                    None,
                );
                let stmt = self.stmt(&inner, d);
                E::Label(l, b(E::Seq(vec![jump, stmt, self.int(&inner, d)])))
            }
            17 if !s.labels.is_empty() && self.chance(0.3) => {
                let l = self.pick(&s.labels);
                E::Goto(l, Some(b(self.int(s, d))))
            }
            18 if s.in_fn && self.chance(0.3) => E::Return(b(self.int(s, d))),
            19 if !s.floats.is_empty() || self.chance(0.5) => {
                E::Builtin("int", vec![self.float(s, d)])
            }
            20 if !s.strs.is_empty() => E::Builtin("len", vec![self.string(s, d)]),
            21 if !s.recs.is_empty() => E::Builtin(
                "len",
                vec![E::Builtin("keys", vec![E::Var(self.pick(&s.recs))])],
            ),
            _ => E::Neg(b(self.int(s, d))),
        }
    }

    fn float(&mut self, s: &Scope, depth: u32) -> E {
        let d = depth.saturating_sub(1);
        match self.rng.gen_range(0..7) {
            0 => E::Float(self.rng.gen_range(0..40) as f64 / 4.0),
            1 if !s.floats.is_empty() => E::Var(self.pick(&s.floats)),
            2 if depth > 0 => E::Bin(Op::Div, b(self.int(s, d)), b(self.int(s, d))),
            3 if depth > 0 => {
                let op = *[Op::Add, Op::Sub, Op::Mul].choose(&mut self.rng).unwrap();
                E::Bin(op, b(self.float(s, d)), b(self.int(s, d)))
            }
            4 => E::Builtin("float", vec![self.int(s, d)]),
            5 if depth > 0 => E::Neg(b(self.float(s, d))),
            _ => E::Float(self.rng.gen_range(0..100) as f64 / 8.0),
        }
    }

    fn string(&mut self, s: &Scope, depth: u32) -> E {
        let d = depth.saturating_sub(1);
        match self.rng.gen_range(0..6) {
            0 if !s.strs.is_empty() => E::Var(self.pick(&s.strs)),
            1 if depth > 0 => E::Bin(Op::Add, b(self.string(s, d)), b(self.string(s, d))),
            2 => E::Builtin("str", vec![self.int(s, d)]),
            3 => E::Builtin("str", vec![self.float(s, d)]),
            4 if !s.lists.is_empty() => E::Builtin("str", vec![E::Var(self.pick(&s.lists))]),
            _ => E::Str(WORDS.choose(&mut self.rng).unwrap().to_string()),
        }
    }

    fn boolean(&mut self, s: &Scope, depth: u32) -> E {
        let d = depth.saturating_sub(1);
        match self.rng.gen_range(0..9) {
            0 => E::Bool(self.chance(0.5)),
            1..=3 => {
                let op = *[Op::Lt, Op::Le, Op::Gt, Op::Ge, Op::Eq, Op::Ne]
                    .choose(&mut self.rng)
                    .unwrap();
                E::Bin(op, b(self.int(s, d)), b(self.int(s, d)))
            }
            4 => {
                let op = *[Op::Lt, Op::Eq, Op::Ge].choose(&mut self.rng).unwrap();
                E::Bin(op, b(self.float(s, d)), b(self.int(s, d)))
            }
            5 if depth > 0 => {
                let op = if self.chance(0.5) { Op::And } else { Op::Or };
                E::Bin(op, b(self.boolean(s, d)), b(self.boolean(s, d)))
            }
            6 if depth > 0 => E::Not(b(self.boolean(s, d))),
            7 if !s.lists.is_empty() => E::Builtin(
                "contains",
                vec![E::Var(self.pick(&s.lists)), self.int(s, d)],
            ),
            8 => E::Builtin("contains", vec![self.string(s, d), self.string(s, d)]),
            _ => E::Bin(Op::Lt, b(self.string(s, d)), b(self.string(s, d))),
        }
    }

    fn any(&mut self, s: &Scope, depth: u32) -> E {
        match self.rng.gen_range(0..7) {
            0 => self.float(s, depth),
            1 => self.string(s, depth),
            2 => self.boolean(s, depth),
            3 if !s.lists.is_empty() => E::Var(self.pick(&s.lists)),
            4 if !s.recs.is_empty() => E::Var(self.pick(&s.recs)),
            5 if !s.refs.is_empty() => E::Var(self.pick(&s.refs)),
            _ => self.int(s, depth),
        }
    }

    fn stmt(&mut self, s: &Scope, depth: u32) -> E {
        let d = depth.saturating_sub(1);
        match self.rng.gen_range(0..14) {
            0 | 1 => E::Builtin("print", vec![self.any(s, d)]),
            2 if !s.refs.is_empty() => {
                let r = self.pick(&s.refs);
                E::SetRef(b(E::Var(r)), b(self.int(s, d)))
            }
            3 if !s.lists.is_empty() => {
                E::Builtin("push", vec![E::Var(self.pick(&s.lists)), self.int(s, d)])
            }
            4 if !s.lists.is_empty() => {
                let xs = self.pick(&s.lists);
                let i = E::Bin(
                    Op::Mod,
                    b(self.int(s, d)),
                    b(E::Builtin("len", vec![E::Var(xs.clone())])),
                );
                E::SetIndex(b(E::Var(xs)), b(i), b(self.int(s, d)))
            }
            5 if !s.recs.is_empty() => {
                let r = self.pick(&s.recs);
                let f = FIELDS.choose(&mut self.rng).unwrap().to_string();
                E::SetIndex(b(E::Var(r)), b(E::Str(f)), b(self.int(s, d)))
            }
            6 if depth > 0 => {
                let t = self.block(s, d);
                if self.chance(0.5) {
                    E::If(b(self.boolean(s, d)), b(t), Some(b(self.block(s, d))))
                } else {
                    E::If(b(self.boolean(s, d)), b(t), None)
                }
            }
            7 | 8 if depth > 0 => self.while_loop(s, d),
            9 if s.in_loop && self.chance(0.5) => {
                let jump = if self.chance(0.5) {
                    E::Break
                } else {
                    E::Continue
                };
                E::If(b(self.boolean(s, d)), b(jump), None)
            }
            10 if self.chance(0.05) => {
                E::If(b(self.boolean(s, d)), b(E::Raise(b(self.any(s, d)))), None)
            }
            11 if self.naturals && s.in_loop && !s.ints.is_empty() => self.natural(s),
            12 if !s.labels.is_empty() && self.chance(0.3) => {
                let l = self.pick(&s.labels);
                E::If(
                    b(self.boolean(s, d)),
                    b(E::Goto(l, Some(b(self.int(s, d))))),
                    None,
                )
            }
            _ => E::Builtin("print", vec![self.int(s, d)]),
        }
    }

    fn block(&mut self, s: &Scope, depth: u32) -> E {
        let n = self.rng.gen_range(1..4);
        E::Seq((0..n).map(|_| self.stmt(s, depth)).collect())
    }

    fn while_loop(&mut self, s: &Scope, depth: u32) -> E {
        let c = self.name("c");
        let bound = self.rng.gen_range(0..6);
        let mut inner = s.clone();
        inner.in_loop = true;
        // The counter is only read through `i`, so nothing can reset it.
        let i = self.name("i");
        inner.ints.push(i.clone());
        let n = self.rng.gen_range(1..4);
        let mut body = vec![E::SetRef(
            b(E::Var(c.clone())),
            b(E::Bin(
                Op::Add,
                b(E::Deref(b(E::Var(c.clone())))),
                b(E::Int(1)),
            )),
        )];
        let mut stmts: Vec<E> = Vec::new();
        let mut scope = inner.clone();
        if self.naturals && self.chance(0.6) {
            let st = self.natural(&scope);
            if let E::Natural(nat) = &st {
                scope.ints.push(nat.output.clone());
            }
            stmts.push(st);
        }
        for _ in 0..n {
            let st = self.stmt(&scope, depth);
            if let E::Natural(nat) = &st {
                scope.ints.push(nat.output.clone());
            }
            stmts.push(st);
        }
        body.push(E::Let(
            i,
            b(E::Deref(b(E::Var(c.clone())))),
            b(E::Seq(stmts)),
        ));
        E::Let(
            c.clone(),
            b(E::Ref(b(E::Int(0)))),
            b(E::While(
                b(E::Bin(Op::Lt, b(E::Deref(b(E::Var(c)))), b(E::Int(bound)))),
                b(E::Seq(body)),
            )),
        )
    }

    fn natural(&mut self, s: &Scope) -> E {
        let mut targets: Vec<(String, bool)> =
            vec![("break".into(), false), ("continue".into(), false)];
        targets.extend(s.labels.iter().map(|l| (l.clone(), true)));
        if s.in_fn {
            targets.push(("return".into(), true));
        }
        let action = |g: &mut Gen| {
            if g.chance(0.5) {
                Action::Return(g.rng.gen_range(0..50))
            } else {
                let (l, payload) = targets.choose(&mut g.rng).unwrap().clone();
                Action::Goto(l, payload.then(|| g.rng.gen_range(0..50)))
            }
        };
        let on_hit = action(self);
        let on_miss = action(self);
        self.nat_tag += 1;
        E::Natural(Nat {
            tag: self.nat_tag,
            input: self.pick(&s.ints),
            output: self.name("y"),
            threshold: self.rng.gen_range(0..4),
            on_hit,
            on_miss,
        })
    }

    fn def(&mut self, fns: &[(String, usize)]) -> Def {
        let arity = self.rng.gen_range(1..3);
        let params: Vec<String> = (0..arity).map(|_| self.name("p")).collect();
        let scope = Scope {
            ints: params.clone(),
            in_fn: true,
            fns: fns.to_vec(),
            ..Scope::default()
        };
        let mut stmts: Vec<E> = (0..self.rng.gen_range(0..3))
            .map(|_| self.stmt(&scope, 2))
            .collect();
        stmts.push(self.int(&scope, 3));
        Def {
            name: self.name("f"),
            params,
            body: E::Seq(stmts),
        }
    }

    /// A whole program: some functions, then nested bindings of every kind
    /// around a list of statements and a final expression.
    pub fn program(&mut self) -> Prog {
        let mut defs: Vec<Def> = Vec::new();
        for _ in 0..self.rng.gen_range(0..3) {
            let fns: Vec<(String, usize)> = defs
                .iter()
                .map(|d| (d.name.clone(), d.params.len()))
                .collect();
            defs.push(self.def(&fns));
        }
        let mut s = Scope {
            fns: defs
                .iter()
                .map(|d| (d.name.clone(), d.params.len()))
                .collect(),
            ..Scope::default()
        };
        let mut bindings: Vec<(String, E)> = Vec::new();
        for _ in 0..self.rng.gen_range(2..7) {
            let (x, v) = match self.rng.gen_range(0..6) {
                0 => {
                    let x = self.name("x");
                    let v = self.int(&s, 2);
                    s.ints.push(x.clone());
                    (x, v)
                }
                1 => {
                    let x = self.name("r");
                    let v = E::Ref(b(self.int(&s, 2)));
                    s.refs.push(x.clone());
                    (x, v)
                }
                2 => {
                    let x = self.name("xs");
                    let n = self.rng.gen_range(1..5);
                    let v = E::List((0..n).map(|_| self.int(&s, 1)).collect());
                    s.lists.push(x.clone());
                    (x, v)
                }
                3 => {
                    let x = self.name("rec");
                    let v = E::Record(
                        FIELDS
                            .iter()
                            .map(|f| (f.to_string(), self.int(&s, 1)))
                            .collect(),
                    );
                    s.recs.push(x.clone());
                    (x, v)
                }
                4 => {
                    let x = self.name("s");
                    let v = self.string(&s, 2);
                    s.strs.push(x.clone());
                    (x, v)
                }
                _ => {
                    let x = self.name("fl");
                    let v = self.float(&s, 2);
                    s.floats.push(x.clone());
                    (x, v)
                }
            };
            bindings.push((x, v));
        }
        let mut stmts: Vec<E> = (0..self.rng.gen_range(1..7))
            .map(|_| self.stmt(&s, 3))
            .collect();
        stmts.push(self.any(&s, 2));
        let mut body = E::Seq(stmts);
        for (x, v) in bindings.into_iter().rev() {
            body = E::Let(x, b(v), b(body));
        }
        Prog { defs, body }
    }
}

// ---------------------------------------------------------------- agents

/// Records how many steps each session asked for.
pub struct Recording<A> {
    pub inner: A,
    /// Per session: block id and the number of `next_step` calls.
    pub sessions: Vec<(String, usize)>,
}

impl<A> Recording<A> {
    pub fn new(inner: A) -> Self {
        Recording {
            inner,
            sessions: Vec::new(),
        }
    }
}

impl<A: Agent> Agent for Recording<A> {
    fn next_step(&mut self, ctx: &AgentContext) -> Result<AgentStep, AgentError> {
        self.sessions.last_mut().expect("session opened").1 += 1;
        self.inner.next_step(ctx)
    }

    fn begin_session(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        self.sessions.push((ctx.block_id.clone(), 0));
        self.inner.begin_session(ctx)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

/// Agent that returns a fixed sequence of steps, ignoring the context.
pub struct Fixed {
    pub steps: Vec<AgentStep>,
    pub pos: usize,
}

impl Fixed {
    pub fn new(steps: Vec<AgentStep>) -> Self {
        Fixed { steps, pos: 0 }
    }
}

impl Agent for Fixed {
    fn next_step(&mut self, _ctx: &AgentContext) -> Result<AgentStep, AgentError> {
        let s = self
            .steps
            .get(self.pos)
            .cloned()
            .ok_or(AgentError::NoRule {
                block: njr_core::host::BlockId("fixed".into()),
                position: self.pos,
            })?;
        self.pos += 1;
        Ok(s)
    }

    fn fingerprint(&self) -> String {
        "fixed".into()
    }
}

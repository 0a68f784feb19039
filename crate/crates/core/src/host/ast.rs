//! Abstract syntax of the host language.

use std::fmt;

use indexmap::{IndexMap, IndexSet};

use super::value::{LabelName, VarName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
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

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Print,
    Input,
    Len,
    Str,
    Int,
    Float,
    Push,
    Keys,
    Contains,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "print" => Builtin::Print,
            "input" => Builtin::Input,
            "len" => Builtin::Len,
            "str" => Builtin::Str,
            "int" => Builtin::Int,
            "float" => Builtin::Float,
            "push" => Builtin::Push,
            "keys" => Builtin::Keys,
            "contains" => Builtin::Contains,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Print => "print",
            Builtin::Input => "input",
            Builtin::Len => "len",
            Builtin::Str => "str",
            Builtin::Int => "int",
            Builtin::Float => "float",
            Builtin::Push => "push",
            Builtin::Keys => "keys",
            Builtin::Contains => "contains",
        }
    }

    /// Accepted argument counts (inclusive range).
    pub fn arity(self) -> (usize, usize) {
        match self {
            Builtin::Input => (0, 1),
            Builtin::Push | Builtin::Contains => (2, 2),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Callee {
    Builtin(Builtin),
    Function(String),
}

/// Stable identifier of a natural block: its ordinal in source order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub String);

impl BlockId {
    pub fn from_index(i: usize) -> Self {
        BlockId(format!("n{i}"))
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalBlock {
    pub id: BlockId,
    /// Instruction text with `<x>`/`<:x>` markers replaced by plain names.
    pub text: String,
    /// Text as written, markers included.
    pub source: String,
    pub inputs: IndexSet<VarName>,
    pub outputs: IndexSet<VarName>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Unit,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Var(VarName),
    Let(VarName, Box<Expr>, Box<Expr>),
    Seq(Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Option<Box<Expr>>),
    While(Box<Expr>, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Ref(Box<Expr>),
    Deref(Box<Expr>),
    /// `target := value`; the target is a reference or an index expression.
    Assign(Box<Expr>, Box<Expr>),
    Label(LabelName, Box<Expr>),
    Goto(LabelName, Option<Box<Expr>>),
    Call(Callee, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    List(Vec<Expr>),
    Record(Vec<(String, Expr)>),
    Natural(NaturalBlock),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Visits every direct subexpression.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Unit
            | ExprKind::Bool(_)
            | ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Str(_)
            | ExprKind::Var(_)
            | ExprKind::Natural(_) => vec![],
            ExprKind::Let(_, a, b)
            | ExprKind::While(a, b)
            | ExprKind::Binary(_, a, b)
            | ExprKind::Assign(a, b)
            | ExprKind::Index(a, b) => vec![a, b],
            ExprKind::If(c, t, e) => {
                let mut v = vec![&**c, &**t];
                if let Some(e) = e {
                    v.push(e);
                }
                v
            }
            ExprKind::Unary(_, a) | ExprKind::Ref(a) | ExprKind::Deref(a) => vec![a],
            ExprKind::Label(_, a) => vec![a],
            ExprKind::Goto(_, p) => p.iter().map(|e| &**e).collect(),
            ExprKind::Seq(es) | ExprKind::List(es) | ExprKind::Call(_, es) => es.iter().collect(),
            ExprKind::Record(fs) => fs.iter().map(|(_, e)| e).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<VarName>,
    pub body: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: IndexMap<String, FunctionDef>,
    pub body: Expr,
}

impl Program {
    /// All natural blocks in source order.
    pub fn natural_blocks(&self) -> Vec<&NaturalBlock> {
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a NaturalBlock>) {
            if let ExprKind::Natural(b) = &e.kind {
                out.push(b);
            }
            for c in e.children() {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        for f in self.functions.values() {
            walk(&f.body, &mut out);
        }
        walk(&self.body, &mut out);
        out.sort_by_key(|b| (b.span.line, b.span.col));
        out
    }

    /// Canonical text of the program: the parsed AST printed without layout.
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

fn write_list(f: &mut fmt::Formatter<'_>, es: &[Expr]) -> fmt::Result {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Unit => f.write_str("()"),
            ExprKind::Bool(b) => write!(f, "{b}"),
            ExprKind::Int(i) if *i < 0 => write!(f, "(0 - {})", i.unsigned_abs()),
            ExprKind::Int(i) => write!(f, "{i}"),
            ExprKind::Float(x) if x.is_sign_negative() => write!(f, "(-{:?})", -x),
            ExprKind::Float(x) => write!(f, "{x:?}"),
            ExprKind::Str(s) => write_str_lit(f, s),
            ExprKind::Var(v) => write!(f, "{v}"),
            ExprKind::Let(x, e, b) => write!(f, "(let {x} = {e} in {b})"),
            ExprKind::Seq(es) => {
                f.write_str("(")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
            ExprKind::If(c, t, None) => write!(f, "if {c} then {t} end"),
            ExprKind::If(c, t, Some(e)) => write!(f, "if {c} then {t} else {e} end"),
            ExprKind::While(c, b) => write!(f, "while {c} do {b} end"),
            ExprKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            ExprKind::Unary(UnOp::Neg, a) => write!(f, "(-{a})"),
            ExprKind::Unary(UnOp::Not, a) => write!(f, "(not {a})"),
            ExprKind::Ref(a) => write!(f, "ref ({a})"),
            ExprKind::Deref(a) => write!(f, "!({a})"),
            ExprKind::Assign(t, v) => write!(f, "({t} := {v})"),
            ExprKind::Label(l, b) => write!(f, "label {l}: {b} end"),
            ExprKind::Goto(l, None) => write!(f, "goto {l}"),
            ExprKind::Goto(l, Some(p)) => write!(f, "goto {l} with ({p})"),
            ExprKind::Call(callee, args) => {
                match callee {
                    Callee::Builtin(b) => f.write_str(b.name())?,
                    Callee::Function(name) => f.write_str(name)?,
                }
                f.write_str("(")?;
                write_list(f, args)?;
                f.write_str(")")
            }
            ExprKind::Index(e, i) => write!(f, "({e})[{i}]"),
            ExprKind::List(es) => {
                f.write_str("[")?;
                write_list(f, es)?;
                f.write_str("]")
            }
            ExprKind::Record(fields) => {
                f.write_str("{")?;
                for (i, (k, e)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write_str_lit(f, k)?;
                    write!(f, ": {e}")?;
                }
                f.write_str("}")
            }
            ExprKind::Natural(b) => write!(f, "natural \"\"\"{}\"\"\"", b.source),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for def in self.functions.values() {
            write!(f, "def {}(", def.name)?;
            for (i, p) in def.params.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{p}")?;
            }
            writeln!(f, ") do {} end", def.body)?;
        }
        write!(f, "{}", self.body)
    }
}

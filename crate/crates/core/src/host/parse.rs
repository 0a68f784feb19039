//! Lexer and recursive-descent parser for `.njr` programs.
//!
//! ```text
//! program  := { "def" IDENT "(" params ")" "do" seq "end" } seq
//! seq      := expr { ";" expr } [";"]
//! expr     := "let" IDENT "=" expr "in" seq
//!           | "goto" IDENT [ "with" expr ] | "break" | "continue"
//!           | "return" [expr] | "raise" expr
//!           | or [ ":=" expr ]
//! or       := and { "or" and }          and := unary-not { "and" unary-not }
//! cmp      := add [ ("=="|"!="|"<"|"<="|">"|">=") add ]
//! add      := mul { ("+"|"-") mul }     mul := unary { ("*"|"/"|"//"|"%") unary }
//! unary    := ("-"|"not"|"!"|"ref") unary | postfix
//! postfix  := primary { "[" expr "]" | "." IDENT }
//! primary  := literal | IDENT | IDENT "(" args ")" | "(" seq ")" | "[" args "]"
//!           | "{" fields "}" | "if" expr "then" seq ["else" seq] "end"
//!           | "while" expr "do" seq "end" | "label" IDENT ":" seq "end"
//!           | "natural" TRIPLE_QUOTED
//! ```

use indexmap::{IndexMap, IndexSet};

use super::ast::{
    BinOp, BlockId, Builtin, Callee, Expr, ExprKind, FunctionDef, NaturalBlock, Program, Span, UnOp,
};
use super::value::{is_identifier, LabelKind, LabelName, VarName};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: u32,
        col: u32,
        message: String,
    },
    #[error("{line}:{col}: goto target '{label}' has no enclosing label")]
    UnboundGotoTarget { label: String, line: u32, col: u32 },
}

impl ParseError {
    fn at(span: Span, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    pub fn position(&self) -> (u32, u32) {
        match self {
            ParseError::Syntax { line, col, .. }
            | ParseError::UnboundGotoTarget { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Float(f64),
    Str(String),
    Natural(String),
    Ident(String),
    Sym(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "let", "in", "if", "then", "else", "end", "while", "do", "label", "goto", "with", "natural",
    "def", "return", "break", "continue", "raise", "ref", "true", "false", "and", "or", "not",
];

// Longest first so that "//" wins over "/", ":=" over ":".
const SYMBOLS: &[&str] = &[
    ":=", "==", "!=", "<=", ">=", "//", "(", ")", "[", "]", "{", "}", ",", ";", ":", "=", "<", ">",
    "+", "-", "*", "/", "%", "!", ".",
];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> Span {
        Span {
            line: self.line,
            col: self.col,
        }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek_char() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Span)>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let span = self.span();
            let Some(c) = self.peek_char() else {
                out.push((Tok::Eof, span));
                return Ok(out);
            };
            let tok = if c.is_ascii_digit() {
                self.number(span)?
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = self.pos;
                while matches!(self.peek_char(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.bump();
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            } else if self.src[self.pos..].starts_with("\"\"\"") {
                for _ in 0..3 {
                    self.bump();
                }
                let start = self.pos;
                loop {
                    if self.src[self.pos..].starts_with("\"\"\"") {
                        break;
                    }
                    if self.bump().is_none() {
                        return Err(ParseError::at(span, "unterminated natural block"));
                    }
                }
                let text = self.src[start..self.pos].to_string();
                for _ in 0..3 {
                    self.bump();
                }
                Tok::Natural(text)
            } else if c == '"' {
                self.string(span)?
            } else if let Some(sym) = SYMBOLS
                .iter()
                .find(|s| self.src[self.pos..].starts_with(**s))
            {
                for _ in 0..sym.len() {
                    self.bump();
                }
                Tok::Sym(sym)
            } else {
                return Err(ParseError::at(span, format!("unexpected character '{c}'")));
            };
            out.push((tok, span));
        }
    }

    fn number(&mut self, span: Span) -> Result<Tok, ParseError> {
        let start = self.pos;
        while matches!(self.peek_char(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        let mut is_float = false;
        let rest = &self.src[self.pos..];
        if rest.starts_with('.') && rest[1..].starts_with(|c: char| c.is_ascii_digit()) {
            is_float = true;
            self.bump();
            while matches!(self.peek_char(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
        }
        let rest = &self.src[self.pos..];
        if rest.starts_with(['e', 'E']) {
            let after = &rest[1..];
            let digits = after.strip_prefix(['+', '-']).unwrap_or(after);
            if digits.starts_with(|c: char| c.is_ascii_digit()) {
                is_float = true;
                self.bump();
                if after.starts_with(['+', '-']) {
                    self.bump();
                }
                while matches!(self.peek_char(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let text = &self.src[start..self.pos];
        if is_float {
            text.parse::<f64>()
                .map(Tok::Float)
                .map_err(|_| ParseError::at(span, format!("bad float literal '{text}'")))
        } else {
            text.parse::<i64>()
                .map(Tok::Int)
                .map_err(|_| ParseError::at(span, format!("integer literal '{text}' out of range")))
        }
    }

    fn string(&mut self, span: Span) -> Result<Tok, ParseError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(ParseError::at(span, "unterminated string")),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    other => {
                        return Err(ParseError::at(
                            span,
                            format!("unknown escape '\\{}'", other.unwrap_or(' ')),
                        ))
                    }
                },
                Some(c) => s.push(c),
            }
        }
    }
}

/// Lexical context used for the static goto check.
#[derive(Clone, Default)]
struct Scope {
    labels: Vec<LabelName>,
}

struct Parser<'f> {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    scope: Scope,
    allow_natural: bool,
    blocks: usize,
    /// Known function signatures (name -> arity); checked after parsing.
    calls: Vec<(String, usize, Span)>,
    known_functions: Option<&'f IndexMap<String, FunctionDef>>,
}

impl<'f> Parser<'f> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn advance(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Int(i) => format!("integer {i}"),
            Tok::Float(x) => format!("float {x}"),
            Tok::Str(_) => "string literal".into(),
            Tok::Natural(_) => "natural block text".into(),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<Span, ParseError> {
        if self.is_sym(s) {
            Ok(self.advance().1)
        } else {
            Err(ParseError::at(
                self.span(),
                format!("expected '{s}', found {}", Self::describe(self.peek())),
            ))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Span, ParseError> {
        if self.is_kw(kw) {
            Ok(self.advance().1)
        } else {
            Err(ParseError::at(
                self.span(),
                format!("expected '{kw}', found {}", Self::describe(self.peek())),
            ))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let span = self.advance().1;
                Ok((s, span))
            }
            other => Err(ParseError::at(
                self.span(),
                format!("expected identifier, found {}", Self::describe(&other)),
            )),
        }
    }

    fn var_name(&mut self) -> Result<(VarName, Span), ParseError> {
        let (s, span) = self.ident()?;
        Ok((VarName::new(s).expect("lexer yields identifiers"), span))
    }

    /// Tokens that cannot start an expression; used to decide whether
    /// `return` carries a value.
    fn at_expr_end(&self) -> bool {
        match self.peek() {
            Tok::Eof => true,
            Tok::Sym(s) => matches!(*s, ";" | ")" | "]" | "}" | ","),
            Tok::Ident(s) => matches!(s.as_str(), "end" | "else" | "then" | "do" | "in"),
            _ => false,
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut functions = IndexMap::new();
        while self.is_kw("def") {
            let def = self.function_def()?;
            if functions.contains_key(&def.name) {
                return Err(ParseError::at(
                    def.span,
                    format!("function '{}' defined twice", def.name),
                ));
            }
            functions.insert(def.name.clone(), def);
            self.eat_sym(";");
        }
        let body = if matches!(self.peek(), Tok::Eof) {
            Expr::new(ExprKind::Unit, self.span())
        } else {
            self.seq()?
        };
        if !matches!(self.peek(), Tok::Eof) {
            return Err(ParseError::at(
                self.span(),
                format!("unexpected {}", Self::describe(self.peek())),
            ));
        }
        self.check_calls(&functions)?;
        Ok(Program { functions, body })
    }

    fn check_calls(&self, functions: &IndexMap<String, FunctionDef>) -> Result<(), ParseError> {
        for (name, argc, span) in &self.calls {
            let def = functions
                .get(name)
                .or_else(|| self.known_functions.and_then(|k| k.get(name)));
            match def {
                None => {
                    return Err(ParseError::at(*span, format!("unknown function '{name}'")));
                }
                Some(def) if def.params.len() != *argc => {
                    return Err(ParseError::at(
                        *span,
                        format!(
                            "function '{name}' takes {} argument(s), got {argc}",
                            def.params.len()
                        ),
                    ));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    fn function_def(&mut self) -> Result<FunctionDef, ParseError> {
        let span = self.expect_kw("def")?;
        let (name, name_span) = self.ident()?;
        if Builtin::from_name(&name).is_some() {
            return Err(ParseError::at(
                name_span,
                format!("'{name}' is a builtin and cannot be redefined"),
            ));
        }
        self.expect_sym("(")?;
        let mut params: Vec<VarName> = Vec::new();
        if !self.is_sym(")") {
            loop {
                let (p, pspan) = self.var_name()?;
                if params.contains(&p) {
                    return Err(ParseError::at(pspan, format!("duplicate parameter '{p}'")));
                }
                params.push(p);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        self.expect_kw("do")?;
        // Function bodies see only their own return label.
        let saved = std::mem::replace(
            &mut self.scope,
            Scope {
                labels: vec![LabelName::function_return()],
            },
        );
        let body = self.seq();
        self.scope = saved;
        let body = body?;
        self.expect_kw("end")?;
        Ok(FunctionDef {
            name,
            params,
            body,
            span,
        })
    }

    fn seq(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        let mut items = vec![self.expr()?];
        while self.eat_sym(";") {
            if self.at_expr_end() {
                break;
            }
            items.push(self.expr()?);
        }
        if items.len() == 1 {
            Ok(items.pop().expect("one item"))
        } else {
            Ok(Expr::new(ExprKind::Seq(items), span))
        }
    }

    fn with_label<T>(
        &mut self,
        label: LabelName,
        f: impl FnOnce(&mut Self) -> Result<T, ParseError>,
    ) -> Result<T, ParseError> {
        self.scope.labels.push(label);
        let r = f(self);
        self.scope.labels.pop();
        r
    }

    fn goto_target(&self, label: &LabelName, span: Span) -> Result<(), ParseError> {
        if label.kind() == LabelKind::Raise || self.scope.labels.contains(label) {
            Ok(())
        } else {
            Err(ParseError::UnboundGotoTarget {
                label: label.to_string(),
                line: span.line,
                col: span.col,
            })
        }
    }

    fn goto(
        &mut self,
        label: LabelName,
        span: Span,
        payload: Option<Expr>,
    ) -> Result<Expr, ParseError> {
        self.goto_target(&label, span)?;
        if payload.is_some() && !label.kind().takes_payload() {
            return Err(ParseError::at(
                span,
                format!("'{label}' cannot carry a value"),
            ));
        }
        Ok(Expr::new(
            ExprKind::Goto(label, payload.map(Box::new)),
            span,
        ))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        if self.eat_kw("let") {
            let (name, _) = self.var_name()?;
            self.expect_sym("=")?;
            let value = self.expr()?;
            self.expect_kw("in")?;
            let body = self.seq()?;
            return Ok(Expr::new(
                ExprKind::Let(name, Box::new(value), Box::new(body)),
                span,
            ));
        }
        if self.eat_kw("goto") {
            let (name, lspan) = self.ident_or_reserved_label()?;
            let label = LabelName::new(name).expect("identifier");
            let payload = if self.eat_kw("with") {
                Some(self.expr()?)
            } else {
                None
            };
            return self.goto(label, lspan, payload);
        }
        if self.eat_kw("break") {
            return self.goto(LabelName::loop_break(), span, None);
        }
        if self.eat_kw("continue") {
            return self.goto(LabelName::loop_continue(), span, None);
        }
        if self.eat_kw("return") {
            let payload = if self.at_expr_end() {
                None
            } else {
                Some(self.expr()?)
            };
            return self.goto(LabelName::function_return(), span, payload);
        }
        if self.eat_kw("raise") {
            let payload = self.expr()?;
            return self.goto(LabelName::raise(), span, Some(payload));
        }
        let lhs = self.or()?;
        if self.is_sym(":=") {
            let aspan = self.advance().1;
            let rhs = self.expr()?;
            return Ok(Expr::new(
                ExprKind::Assign(Box::new(lhs), Box::new(rhs)),
                aspan,
            ));
        }
        Ok(lhs)
    }

    fn ident_or_reserved_label(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s)
                if !KEYWORDS.contains(&s.as_str())
                    || matches!(s.as_str(), "break" | "continue" | "return" | "raise") =>
            {
                let span = self.advance().1;
                Ok((s, span))
            }
            other => Err(ParseError::at(
                self.span(),
                format!("expected label name, found {}", Self::describe(&other)),
            )),
        }
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> Result<Expr, ParseError>,
        repeat: bool,
    ) -> Result<Expr, ParseError> {
        let mut lhs = next(self)?;
        loop {
            let found = ops.iter().find(|(s, _)| match self.peek() {
                Tok::Sym(x) => x == s,
                Tok::Ident(x) => x == s,
                _ => false,
            });
            let Some((_, op)) = found else { break };
            let span = self.advance().1;
            let rhs = next(self)?;
            lhs = Expr::new(ExprKind::Binary(*op, Box::new(lhs), Box::new(rhs)), span);
            if !repeat {
                break;
            }
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(&[("or", BinOp::Or)], Self::and, true)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(&[("and", BinOp::And)], Self::cmp, true)
    }

    fn cmp(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(
            &[
                ("==", BinOp::Eq),
                ("!=", BinOp::Ne),
                ("<=", BinOp::Le),
                (">=", BinOp::Ge),
                ("<", BinOp::Lt),
                (">", BinOp::Gt),
            ],
            Self::add,
            false,
        )
    }

    fn add(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::mul, true)
    }

    fn mul(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(
            &[
                ("*", BinOp::Mul),
                ("//", BinOp::FloorDiv),
                ("/", BinOp::Div),
                ("%", BinOp::Mod),
            ],
            Self::unary,
            true,
        )
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        if self.eat_sym("-") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), span));
        }
        if self.eat_kw("not") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), span));
        }
        if self.eat_sym("!") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Deref(Box::new(e)), span));
        }
        if self.eat_kw("ref") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Ref(Box::new(e)), span));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            let span = self.span();
            if self.eat_sym("[") {
                let idx = self.expr()?;
                self.expect_sym("]")?;
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(idx)), span);
            } else if self.eat_sym(".") {
                let (field, fspan) = self.ident()?;
                let key = Expr::new(ExprKind::Str(field), fspan);
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(key)), span);
            } else {
                return Ok(e);
            }
        }
    }

    fn args(&mut self, close: &str) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.eat_sym(close) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_sym(",") {
                if self.eat_sym(close) {
                    return Ok(args);
                }
                continue;
            }
            self.expect_sym(close)?;
            return Ok(args);
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, span) = self.advance();
        let kind = match tok {
            Tok::Int(i) => ExprKind::Int(i),
            Tok::Float(x) => ExprKind::Float(x),
            Tok::Str(s) => ExprKind::Str(s),
            Tok::Sym("(") => {
                if self.eat_sym(")") {
                    ExprKind::Unit
                } else {
                    let e = self.seq()?;
                    self.expect_sym(")")?;
                    return Ok(e);
                }
            }
            Tok::Sym("[") => ExprKind::List(self.args("]")?),
            Tok::Sym("{") => ExprKind::Record(self.fields()?),
            Tok::Ident(kw) if kw == "true" => ExprKind::Bool(true),
            Tok::Ident(kw) if kw == "false" => ExprKind::Bool(false),
            Tok::Ident(kw) if kw == "if" => {
                let c = self.expr()?;
                self.expect_kw("then")?;
                let t = self.seq()?;
                let e = if self.eat_kw("else") {
                    Some(Box::new(self.seq()?))
                } else {
                    None
                };
                self.expect_kw("end")?;
                ExprKind::If(Box::new(c), Box::new(t), e)
            }
            Tok::Ident(kw) if kw == "while" => {
                let c = self.expr()?;
                self.expect_kw("do")?;
                let body = self.with_label(LabelName::loop_break(), |p| {
                    p.with_label(LabelName::loop_continue(), |p| p.seq())
                })?;
                self.expect_kw("end")?;
                ExprKind::While(Box::new(c), Box::new(body))
            }
            Tok::Ident(kw) if kw == "label" => {
                let (name, lspan) = self.ident()?;
                let label = LabelName::new(name).expect("identifier");
                if label.kind() != LabelKind::User {
                    return Err(ParseError::at(
                        lspan,
                        format!("'{label}' is a reserved label"),
                    ));
                }
                self.expect_sym(":")?;
                let body = self.with_label(label.clone(), |p| p.seq())?;
                self.expect_kw("end")?;
                ExprKind::Label(label, Box::new(body))
            }
            Tok::Ident(kw) if kw == "natural" => {
                let (tok, tspan) = self.advance();
                let Tok::Natural(source) = tok else {
                    return Err(ParseError::at(
                        tspan,
                        "expected \"\"\"...\"\"\" after 'natural'",
                    ));
                };
                if !self.allow_natural {
                    return Err(ParseError::at(span, "natural blocks are not allowed here"));
                }
                let block = natural_block(&source, BlockId::from_index(self.blocks), span)?;
                self.blocks += 1;
                ExprKind::Natural(block)
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                if self.is_sym("(") {
                    self.advance();
                    let args = self.args(")")?;
                    match Builtin::from_name(&name) {
                        Some(b) => {
                            let (lo, hi) = b.arity();
                            if args.len() < lo || args.len() > hi {
                                return Err(ParseError::at(
                                    span,
                                    format!(
                                        "{name} takes {lo}..={hi} argument(s), got {}",
                                        args.len()
                                    ),
                                ));
                            }
                            ExprKind::Call(Callee::Builtin(b), args)
                        }
                        None => {
                            self.calls.push((name.clone(), args.len(), span));
                            ExprKind::Call(Callee::Function(name), args)
                        }
                    }
                } else {
                    ExprKind::Var(VarName::new(name).expect("identifier"))
                }
            }
            other => {
                return Err(ParseError::at(
                    span,
                    format!("expected expression, found {}", Self::describe(&other)),
                ))
            }
        };
        Ok(Expr::new(kind, span))
    }

    fn fields(&mut self) -> Result<Vec<(String, Expr)>, ParseError> {
        let mut fields: Vec<(String, Expr)> = Vec::new();
        if self.eat_sym("}") {
            return Ok(fields);
        }
        loop {
            let (tok, kspan) = self.advance();
            let key = match tok {
                Tok::Ident(s) => s,
                Tok::Str(s) => s,
                Tok::Int(i) => i.to_string(),
                other => {
                    return Err(ParseError::at(
                        kspan,
                        format!("expected record key, found {}", Self::describe(&other)),
                    ))
                }
            };
            if fields.iter().any(|(k, _)| *k == key) {
                return Err(ParseError::at(
                    kspan,
                    format!("duplicate record key '{key}'"),
                ));
            }
            self.expect_sym(":")?;
            let value = self.expr()?;
            fields.push((key, value));
            if self.eat_sym(",") {
                if self.eat_sym("}") {
                    return Ok(fields);
                }
                continue;
            }
            self.expect_sym("}")?;
            return Ok(fields);
        }
    }
}

/// Extracts `<x>` (input) and `<:x>` (output) markers from natural text.
fn natural_block(source: &str, id: BlockId, span: Span) -> Result<NaturalBlock, ParseError> {
    let mut inputs = IndexSet::new();
    let mut outputs = IndexSet::new();
    let mut text = String::with_capacity(source.len());
    let mut rest = source;
    while let Some(open) = rest.find('<') {
        text.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let (is_output, body) = match after.strip_prefix(':') {
            Some(b) => (true, b),
            None => (false, after),
        };
        let marker = body.find('>').map(|close| &body[..close]);
        match marker {
            Some(name) if is_identifier(name) => {
                let var = VarName::new(name).expect("checked");
                text.push_str(name);
                if is_output {
                    outputs.insert(var);
                } else {
                    inputs.insert(var);
                }
                let consumed = 1 + usize::from(is_output) + name.len() + 1;
                rest = &rest[open + consumed..];
            }
            _ => {
                text.push('<');
                rest = &rest[open + 1..];
            }
        }
    }
    text.push_str(rest);
    let text = normalize_text(&text);
    Ok(NaturalBlock {
        id,
        text,
        source: source.to_string(),
        inputs,
        outputs,
        span,
    })
}

/// Trims each line and drops leading/trailing blank lines.
fn normalize_text(text: &str) -> String {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let start = lines
        .iter()
        .position(|l| !l.is_empty())
        .unwrap_or(lines.len());
    let end = lines
        .iter()
        .rposition(|l| !l.is_empty())
        .map_or(start, |e| e + 1);
    lines[start..end].join("\n")
}

pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(source).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        scope: Scope::default(),
        allow_natural: true,
        blocks: 0,
        calls: Vec::new(),
        known_functions: None,
    };
    p.program()
}

/// Parses a standalone expression evaluated against an existing program's
/// functions. Natural blocks and jumps to outer labels are rejected.
pub fn parse_expression(
    source: &str,
    functions: &IndexMap<String, FunctionDef>,
) -> Result<Expr, ParseError> {
    let toks = Lexer::new(source).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        scope: Scope::default(),
        allow_natural: false,
        blocks: 0,
        calls: Vec::new(),
        known_functions: Some(functions),
    };
    let e = p.seq()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(ParseError::at(
            p.span(),
            format!("unexpected {}", Parser::describe(p.peek())),
        ));
    }
    p.check_calls(&IndexMap::new())?;
    Ok(e)
}

//! Recursive-descent parser for the restricted kernel dialect: declarations,
//! indexed loads and stores, arithmetic, conditionals, grid-stride loops and
//! `<<<...>>>` launches. Host code is only scanned for launches and
//! brace-initialized constants.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};

/// Result of [`validate_restricted`]. Problems are reported as diagnostics,
/// never as failures.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParsedSource {
    pub kernels: Vec<KernelDef>,
    pub launches: Vec<Launch>,
    /// Host-side `name{literal}` initializers, e.g. `block_size` -> `256`.
    pub host_constants: BTreeMap<String, String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedSource {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn first_error(&self) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.severity == Severity::Error)
    }

    pub fn kernel(&self, name: &str) -> Option<&KernelDef> {
        self.kernels.iter().find(|k| k.name == name)
    }
}

/// Parses `source`, returning structure and diagnostics.
pub fn validate_restricted(source: &str) -> ParsedSource {
    let mut out = ParsedSource::default();
    let tokens = match tokenize(source) {
        Ok(t) => t,
        Err(e) => {
            out.diagnostics.push(Diagnostic {
                severity: Severity::Error,
                line: e.line,
                column: e.column,
                message: e.message,
            });
            return out;
        }
    };
    let code: Vec<Token> = tokens.into_iter().filter(Token::is_code).collect();
    let mut p = Parser { src: source, toks: &code, pos: 0 };

    let mut depth = 0usize;
    while !p.at_end() {
        let t = p.peek_text();
        if depth == 0 && t == "__global__" {
            let start = p.pos;
            match p.kernel() {
                Ok(mut k) => {
                    k.stats = count_ops(&k);
                    out.kernels.push(k);
                }
                Err(d) => {
                    out.diagnostics.push(d);
                    // resynchronize after the offending kernel
                    p.pos = start + 1;
                }
            }
            continue;
        }
        match t {
            "{" => depth += 1,
            "}" => depth = depth.saturating_sub(1),
            "<<<" => {
                if let Some(l) = p.launch_at() {
                    out.launches.push(l);
                    continue;
                }
            }
            _ => {}
        }
        if depth > 0 {
            if let Some((name, value)) = p.brace_constant_at() {
                out.host_constants.insert(name, value);
            }
        }
        p.pos += 1;
    }

    if out.kernels.is_empty() && !out.has_errors() {
        out.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            line: 1,
            column: 1,
            message: "no kernel found".into(),
        });
    }
    for launch in &out.launches {
        if out.kernel(&launch.kernel).is_none() {
            out.diagnostics.push(Diagnostic {
                severity: Severity::Warning,
                line: launch.line,
                column: 1,
                message: format!("launch of unknown kernel `{}`", launch.kernel),
            });
        }
    }
    out
}

const QUALIFIERS: &[&str] = &[
    "const",
    "volatile",
    "unsigned",
    "signed",
    "long",
    "short",
    "static",
    "constexpr",
    "__restrict__",
    "register",
    "__shared__",
    "__device__",
    "inline",
    "__forceinline__",
];

const STATEMENT_KEYWORDS: &[&str] =
    &["return", "if", "else", "for", "while", "do", "break", "continue", "switch", "case", "goto", "delete", "new"];

const CASTS: &[&str] = &["static_cast", "reinterpret_cast", "const_cast"];

type PResult<T> = Result<T, Diagnostic>;

struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_text(&self) -> &'a str {
        self.nth_text(0)
    }

    fn nth_text(&self, n: usize) -> &'a str {
        self.toks.get(self.pos + n).map(|t| t.text(self.src)).unwrap_or("")
    }

    fn nth_kind(&self, n: usize) -> Option<TokenKind> {
        self.toks.get(self.pos + n).map(|t| t.kind)
    }

    fn line(&self) -> usize {
        self.peek().or(self.toks.last()).map(|t| t.line).unwrap_or(1)
    }

    fn error(&self, message: impl Into<String>) -> Diagnostic {
        let (line, column) = match self.peek() {
            Some(t) => (t.line, t.column),
            None => self.toks.last().map(|t| (t.line, t.column + t.span.len())).unwrap_or((1, 1)),
        };
        Diagnostic { severity: Severity::Error, line, column, message: message.into() }
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.peek_text() == text && !self.at_end() {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> PResult<()> {
        if self.eat(text) {
            Ok(())
        } else if self.at_end() {
            Err(self.error(format!("expected `{text}`, found end of input")))
        } else {
            Err(self.error(format!("expected `{text}`, found `{}`", self.peek_text())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        if self.nth_kind(0) == Some(TokenKind::Ident) {
            let s = self.peek_text().to_string();
            self.pos += 1;
            Ok(s)
        } else {
            Err(self.error(format!("expected identifier, found `{}`", self.peek_text())))
        }
    }

    // ---- kernels -------------------------------------------------------

    fn kernel(&mut self) -> PResult<KernelDef> {
        let line = self.line();
        self.expect("__global__")?;
        // skip return type and attributes such as __launch_bounds__(256)
        let name = loop {
            if self.at_end() {
                return Err(self.error("unterminated kernel declaration"));
            }
            if self.nth_kind(0) == Some(TokenKind::Ident) && self.nth_text(1) == "(" {
                let word = self.peek_text();
                if word == "__launch_bounds__" {
                    self.pos += 1;
                    self.skip_balanced("(", ")")?;
                    continue;
                }
                break self.ident()?;
            }
            self.pos += 1;
        };
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.eat(")") {
            loop {
                params.push(self.param()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        self.expect("{")?;
        let body = self.block_rest()?;
        Ok(KernelDef { name, params, body, line, stats: KernelStats::default() })
    }

    fn param(&mut self) -> PResult<Param> {
        let ty = self.type_name().ok_or_else(|| self.error("expected parameter type"))?;
        let name = if self.nth_kind(0) == Some(TokenKind::Ident) { Some(self.ident()?) } else { None };
        Ok(Param { ty, name })
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.expect(open)?;
        let mut depth = 1;
        while depth > 0 {
            if self.at_end() {
                return Err(self.error(format!("unbalanced `{open}`")));
            }
            let t = self.peek_text();
            if t == open {
                depth += 1;
            } else if t == close {
                depth -= 1;
            }
            self.pos += 1;
        }
        Ok(())
    }

    // ---- host scanning -------------------------------------------------

    /// At a `<<<` token: recognise `name<<<cfg...>>>(args);`.
    fn launch_at(&mut self) -> Option<Launch> {
        if self.pos == 0 || self.toks[self.pos - 1].kind != TokenKind::Ident {
            return None;
        }
        let start = self.pos;
        let kernel = self.toks[self.pos - 1].text(self.src).to_string();
        let line = self.toks[self.pos - 1].line;
        self.pos += 1;
        let mut config = Vec::new();
        let mut piece_start = self.pos;
        let mut depth = 0i32;
        loop {
            if self.at_end() {
                self.pos = start;
                return None;
            }
            let t = self.peek_text();
            match t {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                "," | ">>>" if depth == 0 => {
                    config.push(self.span_text(piece_start, self.pos));
                    piece_start = self.pos + 1;
                    if t == ">>>" {
                        self.pos += 1;
                        break;
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        if self.peek_text() != "(" {
            self.pos = start;
            return None;
        }
        self.pos += 1;
        let mut arg_count = 0;
        let mut depth = 0i32;
        let mut saw_token = false;
        while !self.at_end() {
            let t = self.peek_text();
            match t {
                "(" | "[" | "{" => depth += 1,
                ")" if depth == 0 => break,
                ")" | "]" | "}" => depth -= 1,
                "," if depth == 0 => arg_count += 1,
                _ => {}
            }
            saw_token = true;
            self.pos += 1;
        }
        if saw_token {
            arg_count += 1;
        }
        self.pos += 1;
        Some(Launch { kernel, config, arg_count, line })
    }

    fn span_text(&self, from: usize, to: usize) -> String {
        if from >= to {
            return String::new();
        }
        self.src[self.toks[from].span.start..self.toks[to - 1].span.end].to_string()
    }

    /// At an identifier: recognise `name{literal};` (brace-initialized constant).
    fn brace_constant_at(&self) -> Option<(String, String)> {
        if self.nth_kind(0) != Some(TokenKind::Ident)
            || self.nth_text(1) != "{"
            || self.nth_kind(2) != Some(TokenKind::Number)
            || self.nth_text(3) != "}"
        {
            return None;
        }
        let prev_is_type = self.pos > 0 && self.toks[self.pos - 1].kind == TokenKind::Ident;
        prev_is_type.then(|| (self.peek_text().to_string(), self.nth_text(2).to_string()))
    }

    // ---- types ---------------------------------------------------------

    /// Parses a type name if one starts here; restores position otherwise.
    fn type_name(&mut self) -> Option<TypeName> {
        let start = self.pos;
        let mut words: Vec<String> = Vec::new();
        let mut has_core = false;
        loop {
            if self.nth_kind(0) != Some(TokenKind::Ident) {
                break;
            }
            let w = self.peek_text();
            if STATEMENT_KEYWORDS.contains(&w) {
                break;
            }
            if QUALIFIERS.contains(&w) {
                words.push(w.to_string());
                self.pos += 1;
                if matches!(w, "unsigned" | "signed" | "long" | "short") {
                    // `unsigned i = ...`: the next identifier is the declarator
                    if self.nth_kind(0) == Some(TokenKind::Ident)
                        && matches!(self.nth_text(1), "=" | ";" | "," | "{" | "(" | "[" | ")")
                        && !matches!(self.peek_text(), "int" | "long" | "char" | "short")
                    {
                        has_core = true;
                        break;
                    }
                }
                continue;
            }
            if has_core {
                break;
            }
            let mut core = w.to_string();
            self.pos += 1;
            while self.peek_text() == "::" && self.nth_kind(1) == Some(TokenKind::Ident) {
                core.push_str("::");
                core.push_str(self.nth_text(1));
                self.pos += 2;
            }
            if self.peek_text() == "<" {
                let targs_start = self.pos;
                if let Some(targs) = self.template_args() {
                    core.push_str(&targs);
                } else {
                    self.pos = targs_start;
                }
            }
            words.push(core);
            has_core = true;
        }
        if !has_core {
            self.pos = start;
            return None;
        }
        let mut pointer_depth = 0;
        let mut reference = false;
        loop {
            match self.peek_text() {
                "*" => pointer_depth += 1,
                "&" | "&&" => reference = true,
                "const" | "__restrict__" | "__restrict" | "restrict" => {}
                _ => break,
            }
            self.pos += 1;
        }
        Some(TypeName { base: words.join(" "), pointer_depth, reference })
    }

    /// `<...>` template argument list as text, nested brackets allowed.
    fn template_args(&mut self) -> Option<String> {
        let start = self.pos;
        let mut depth = 0i32;
        while !self.at_end() {
            match self.peek_text() {
                "<" => depth += 1,
                ">" => depth -= 1,
                ">>" => depth -= 2,
                ";" | "{" | "}" | "=" => return None,
                _ => {}
            }
            self.pos += 1;
            if depth <= 0 {
                return (depth == 0).then(|| self.span_text(start, self.pos).split_whitespace().collect());
            }
        }
        None
    }

    // ---- statements ----------------------------------------------------

    /// Statements up to and including the closing `}`.
    fn block_rest(&mut self) -> PResult<Vec<Stmt>> {
        let mut stmts = Vec::new();
        loop {
            if self.at_end() {
                return Err(self.error("expected `}`, found end of input"));
            }
            if self.eat("}") {
                return Ok(stmts);
            }
            stmts.extend(self.statement()?);
        }
    }

    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat("{") {
            self.block_rest()
        } else {
            self.statement()
        }
    }

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let line = self.line();
        match self.peek_text() {
            ";" => {
                self.pos += 1;
                Ok(vec![])
            }
            "{" => {
                self.pos += 1;
                Ok(vec![Stmt::Block(self.block_rest()?)])
            }
            "if" => {
                self.pos += 1;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then = self.body()?;
                let els = if self.eat("else") { self.body()? } else { vec![] };
                Ok(vec![Stmt::If { cond, then, els, line }])
            }
            "for" => {
                self.pos += 1;
                self.expect("(")?;
                let init = if self.eat(";") {
                    None
                } else {
                    let mut s = self.simple_statement()?;
                    self.expect(";")?;
                    if s.len() > 1 {
                        return Err(self.error("multiple declarators in a for initializer are not supported"));
                    }
                    s.pop().map(Box::new)
                };
                let cond = if self.peek_text() == ";" { None } else { Some(self.expr()?) };
                self.expect(";")?;
                let step = if self.peek_text() == ")" { None } else { Some(self.expr()?) };
                self.expect(")")?;
                let body = self.body()?;
                Ok(vec![Stmt::For { init, cond, step, body, line }])
            }
            "while" => {
                self.pos += 1;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let body = self.body()?;
                Ok(vec![Stmt::While { cond, body, line }])
            }
            "return" => {
                self.pos += 1;
                let value = if self.peek_text() == ";" { None } else { Some(self.expr()?) };
                self.expect(";")?;
                Ok(vec![Stmt::Return(value)])
            }
            "break" => {
                self.pos += 1;
                self.expect(";")?;
                Ok(vec![Stmt::Break])
            }
            "continue" => {
                self.pos += 1;
                self.expect(";")?;
                Ok(vec![Stmt::Continue])
            }
            "__syncthreads" => {
                let expr = self.expr()?;
                self.expect(";")?;
                Ok(vec![Stmt::Expr { expr, line }])
            }
            kw @ ("do" | "switch" | "goto" | "case") => {
                Err(self.error(format!("`{kw}` is outside the supported dialect")))
            }
            _ => {
                let s = self.simple_statement()?;
                self.expect(";")?;
                Ok(s)
            }
        }
    }

    /// Declaration or expression, without the trailing `;`.
    fn simple_statement(&mut self) -> PResult<Vec<Stmt>> {
        let line = self.line();
        if let Some(decls) = self.try_declaration(line)? {
            return Ok(decls);
        }
        let expr = self.expr()?;
        Ok(vec![Stmt::Expr { expr, line }])
    }

    fn try_declaration(&mut self, line: usize) -> PResult<Option<Vec<Stmt>>> {
        let start = self.pos;
        let Some(ty) = self.type_name() else {
            return Ok(None);
        };
        let is_declarator = self.nth_kind(0) == Some(TokenKind::Ident)
            && matches!(self.nth_text(1), "=" | ";" | "," | "{" | "(" | "[" | ")");
        if !is_declarator {
            self.pos = start;
            return Ok(None);
        }
        let mut out = Vec::new();
        loop {
            let mut this_ty = ty.clone();
            while self.eat("*") {
                this_ty.pointer_depth += 1;
            }
            let name = self.ident()?;
            let array_len = if self.eat("[") {
                let len = self.expr()?;
                self.expect("]")?;
                Some(len)
            } else {
                None
            };
            let init = if self.eat("=") {
                Some(if self.peek_text() == "{" { self.init_list()? } else { self.assignment()? })
            } else if self.peek_text() == "{" {
                Some(self.init_list()?)
            } else if self.eat("(") {
                let args = self.call_args()?;
                Some(Expr::Call { callee: Box::new(Expr::Ident(ty.base.clone())), args })
            } else {
                None
            };
            out.push(Stmt::Decl { ty: this_ty, name, array_len, init, line });
            if !self.eat(",") {
                break;
            }
        }
        Ok(Some(out))
    }

    fn init_list(&mut self) -> PResult<Expr> {
        self.expect("{")?;
        let mut items = Vec::new();
        if !self.eat("}") {
            loop {
                items.push(if self.peek_text() == "{" { self.init_list()? } else { self.assignment()? });
                if self.eat("}") {
                    break;
                }
                self.expect(",")?;
                if self.eat("}") {
                    break;
                }
            }
        }
        // `x{v}` is plain direct-initialization
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Expr::List(items) })
    }

    // ---- expressions ---------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        self.assignment()
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let lhs = self.ternary()?;
        let op = self.peek_text();
        if matches!(op, "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>=") {
            self.pos += 1;
            let value = self.assignment()?;
            return Ok(Expr::Assign { op: op.to_string(), target: Box::new(lhs), value: Box::new(value) });
        }
        Ok(lhs)
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat("?") {
            let then = self.assignment()?;
            self.expect(":")?;
            let els = self.assignment()?;
            return Ok(Expr::Ternary { cond: Box::new(cond), then: Box::new(then), els: Box::new(els) });
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["|"],
            &["^"],
            &["&"],
            &["==", "!="],
            &["<", ">", "<=", ">="],
            &["<<", ">>"],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = self.peek_text();
            if !LEVELS[level].contains(&op) || self.at_end() {
                return Ok(lhs);
            }
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = self.peek_text();
        if matches!(op, "-" | "+" | "!" | "~" | "*" | "&" | "++" | "--") {
            self.pos += 1;
            let operand = self.unary()?;
            return Ok(Expr::Unary { op: op.to_string(), operand: Box::new(operand) });
        }
        if op == "sizeof" {
            self.pos += 1;
            self.expect("(")?;
            let inner = match self.type_name() {
                Some(ty) if self.peek_text() == ")" => Expr::Ident(ty.base),
                _ => self.expr()?,
            };
            self.expect(")")?;
            return Ok(Expr::Call { callee: Box::new(Expr::Ident("sizeof".into())), args: vec![inner] });
        }
        // C-style cast: `(float)x`
        if op == "(" {
            let save = self.pos;
            self.pos += 1;
            if let Some(ty) = self.type_name() {
                if self.eat(")") && !matches!(self.peek_text(), ")" | ";" | "," | "]") && is_cast_type(&ty) {
                    let expr = self.unary()?;
                    return Ok(Expr::Cast { ty, expr: Box::new(expr) });
                }
            }
            self.pos = save;
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            match self.peek_text() {
                "[" => {
                    self.pos += 1;
                    let index = self.expr()?;
                    self.expect("]")?;
                    e = Expr::Index { base: Box::new(e), index: Box::new(index) };
                }
                "(" => {
                    self.pos += 1;
                    let args = self.call_args()?;
                    e = Expr::Call { callee: Box::new(e), args };
                }
                "." | "->" => {
                    let arrow = self.peek_text() == "->";
                    self.pos += 1;
                    let field = self.ident()?;
                    e = Expr::Member { base: Box::new(e), field, arrow };
                }
                "++" | "--" => {
                    let op = self.peek_text().to_string();
                    self.pos += 1;
                    e = Expr::Postfix { op, operand: Box::new(e) };
                }
                _ => return Ok(e),
            }
        }
    }

    /// Arguments after `(`, consuming the closing `)`.
    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(if self.peek_text() == "{" { self.init_list()? } else { self.assignment()? });
            if self.eat(")") {
                return Ok(args);
            }
            self.expect(",")?;
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of input in expression"));
        };
        let text = tok.text(self.src);
        match tok.kind {
            TokenKind::Number => {
                self.pos += 1;
                Ok(Expr::Number(text.to_string()))
            }
            TokenKind::Str | TokenKind::Char => {
                self.pos += 1;
                Ok(Expr::Str(text.to_string()))
            }
            TokenKind::Ident if CASTS.contains(&text) => {
                self.pos += 1;
                self.expect("<")?;
                let ty = self.type_name().ok_or_else(|| self.error("expected cast target type"))?;
                self.expect(">")?;
                self.expect("(")?;
                let expr = self.expr()?;
                self.expect(")")?;
                Ok(Expr::Cast { ty, expr: Box::new(expr) })
            }
            TokenKind::Ident if STATEMENT_KEYWORDS.contains(&text) => {
                Err(self.error(format!("unexpected keyword `{text}` in expression")))
            }
            TokenKind::Ident => {
                self.pos += 1;
                if self.peek_text() == "::" {
                    let mut parts = vec![text.to_string()];
                    while self.eat("::") {
                        parts.push(self.ident()?);
                    }
                    return Ok(Expr::Scoped(parts));
                }
                Ok(Expr::Ident(text.to_string()))
            }
            TokenKind::Punct if text == "(" => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(self.error(format!("unexpected `{text}` in expression"))),
        }
    }
}

fn is_cast_type(ty: &TypeName) -> bool {
    let core = ty.base.split_whitespace().last().unwrap_or("");
    ty.pointer_depth > 0
        || ty.base.split_whitespace().any(|w| matches!(w, "unsigned" | "signed" | "long" | "short" | "const"))
        || matches!(
            core.rsplit("::").next().unwrap_or(""),
            "float"
                | "double"
                | "int"
                | "char"
                | "bool"
                | "half"
                | "__half"
                | "size_t"
                | "int64_t"
                | "uint64_t"
                | "int32_t"
                | "uint32_t"
        )
}

// ---- operation counting ---------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum ValueKind {
    Int,
    Float,
    /// Pointer or array with element size and float-ness.
    Array {
        elem_bytes: usize,
        float: bool,
    },
}

impl ValueKind {
    fn of_type(ty: &TypeName, array: bool) -> ValueKind {
        if ty.pointer_depth > 0 || array {
            ValueKind::Array { elem_bytes: ty.element_size(), float: ty.is_float() }
        } else if ty.is_float() {
            ValueKind::Float
        } else {
            ValueKind::Int
        }
    }

    fn is_float(self) -> bool {
        self == ValueKind::Float
    }
}

struct Counter {
    env: HashMap<String, ValueKind>,
    stats: KernelStats,
}

fn count_ops(kernel: &KernelDef) -> KernelStats {
    let mut c = Counter { env: HashMap::new(), stats: KernelStats::default() };
    for p in &kernel.params {
        if let Some(name) = &p.name {
            c.env.insert(name.clone(), ValueKind::of_type(&p.ty, false));
        }
    }
    let mut top = OpCounts::default();
    for s in &kernel.body {
        c.stmt(s, &mut top);
    }
    c.stats.straight_line = top;
    c.stats
}

impl Counter {
    fn stmt(&mut self, s: &Stmt, acc: &mut OpCounts) {
        match s {
            Stmt::Decl { ty, name, array_len, init, .. } => {
                let init_kind = init.as_ref().map(|e| self.expr(e, acc));
                let kind = if ty.is_auto() {
                    init_kind.unwrap_or(ValueKind::Int)
                } else {
                    ValueKind::of_type(ty, array_len.is_some())
                };
                self.env.insert(name.clone(), kind);
            }
            Stmt::Expr { expr, .. } => {
                self.expr(expr, acc);
            }
            Stmt::For { init, cond, step, body, .. } => {
                // loop control is index arithmetic; count it separately and drop it
                let mut control = OpCounts::default();
                if let Some(init) = init {
                    self.stmt(init, &mut control);
                }
                let slot = self.stats.loops.len();
                self.stats.loops.push(OpCounts::default());
                let mut per_iter = OpCounts::default();
                if let Some(cond) = cond {
                    self.expr(cond, &mut control);
                }
                for s in body {
                    self.stmt(s, &mut per_iter);
                }
                if let Some(step) = step {
                    self.expr(step, &mut control);
                }
                self.stats.loops[slot] = per_iter;
            }
            Stmt::While { cond, body, .. } => {
                let mut control = OpCounts::default();
                self.expr(cond, &mut control);
                let slot = self.stats.loops.len();
                self.stats.loops.push(OpCounts::default());
                let mut per_iter = OpCounts::default();
                for s in body {
                    self.stmt(s, &mut per_iter);
                }
                self.stats.loops[slot] = per_iter;
            }
            Stmt::If { cond, then, els, .. } => {
                self.expr(cond, acc);
                for s in then.iter().chain(els) {
                    self.stmt(s, acc);
                }
            }
            Stmt::Block(stmts) => {
                for s in stmts {
                    self.stmt(s, acc);
                }
            }
            Stmt::Return(Some(e)) => {
                self.expr(e, acc);
            }
            Stmt::Return(None) | Stmt::Break | Stmt::Continue => {}
        }
    }

    fn array_of(&self, base: &Expr) -> Option<(usize, bool)> {
        if let Expr::Ident(name) = base {
            if let Some(ValueKind::Array { elem_bytes, float }) = self.env.get(name) {
                return Some((*elem_bytes, *float));
            }
        }
        None
    }

    fn expr(&mut self, e: &Expr, acc: &mut OpCounts) -> ValueKind {
        match e {
            Expr::Ident(name) => self.env.get(name).copied().unwrap_or(ValueKind::Int),
            Expr::Number(text) => {
                let hex = text.starts_with("0x") || text.starts_with("0X");
                if !hex && (text.contains('.') || text.contains(['e', 'E']) || text.ends_with(['f', 'F'])) {
                    ValueKind::Float
                } else {
                    ValueKind::Int
                }
            }
            Expr::Str(_) | Expr::Scoped(_) | Expr::Member { .. } => ValueKind::Int,
            Expr::List(items) => {
                let mut k = ValueKind::Int;
                for i in items {
                    if self.expr(i, acc).is_float() {
                        k = ValueKind::Float;
                    }
                }
                k
            }
            Expr::Index { base, index } => {
                self.expr(index, acc);
                match self.array_of(base) {
                    Some((bytes, float)) => {
                        acc.loads += 1;
                        acc.load_bytes += bytes;
                        if float {
                            ValueKind::Float
                        } else {
                            ValueKind::Int
                        }
                    }
                    None => {
                        self.expr(base, acc);
                        ValueKind::Int
                    }
                }
            }
            Expr::Call { callee, args } => {
                let name = match callee.as_ref() {
                    Expr::Ident(n) => n.as_str(),
                    _ => "",
                };
                let kinds: Vec<ValueKind> = args.iter().map(|a| self.expr(a, acc)).collect();
                let any_float = kinds.iter().any(|k| k.is_float());
                if name.starts_with("atomic") {
                    acc.atomics += 1;
                    return kinds.get(1).copied().unwrap_or(ValueKind::Int);
                }
                match name {
                    "fma" | "fmaf" | "__fmaf_rn" => {
                        acc.flops += 2;
                        ValueKind::Float
                    }
                    "sqrt" | "sqrtf" | "exp" | "expf" | "log" | "logf" | "sin" | "sinf" | "cos" | "cosf" | "rsqrt"
                    | "rsqrtf" | "pow" | "powf" | "tanh" | "tanhf" | "fabs" | "fabsf" | "fmax" | "fmaxf" | "fmin"
                    | "fminf" => {
                        acc.flops += 1;
                        ValueKind::Float
                    }
                    _ if any_float => ValueKind::Float,
                    _ => ValueKind::Int,
                }
            }
            Expr::Unary { op, operand } => match op.as_str() {
                "*" => {
                    self.expr(operand, acc);
                    match self.array_of(operand) {
                        Some((bytes, float)) => {
                            acc.loads += 1;
                            acc.load_bytes += bytes;
                            if float {
                                ValueKind::Float
                            } else {
                                ValueKind::Int
                            }
                        }
                        None => ValueKind::Int,
                    }
                }
                "&" => {
                    // address-of does not touch memory
                    if let Expr::Index { index, .. } = operand.as_ref() {
                        self.expr(index, acc);
                    }
                    ValueKind::Int
                }
                "!" => {
                    self.expr(operand, acc);
                    ValueKind::Int
                }
                _ => self.expr(operand, acc),
            },
            Expr::Postfix { operand, .. } => self.expr(operand, acc),
            Expr::Binary { op, lhs, rhs } => {
                let l = self.expr(lhs, acc);
                let r = self.expr(rhs, acc);
                let float = l.is_float() || r.is_float();
                match op.as_str() {
                    "+" | "-" | "*" | "/" if float => {
                        acc.flops += 1;
                        ValueKind::Float
                    }
                    "+" | "-" | "*" | "/" | "%" | "<<" | ">>" | "&" | "|" | "^" => {
                        // pointer arithmetic keeps the pointer kind
                        if matches!(l, ValueKind::Array { .. }) {
                            l
                        } else {
                            ValueKind::Int
                        }
                    }
                    _ => ValueKind::Int,
                }
            }
            Expr::Ternary { cond, then, els } => {
                self.expr(cond, acc);
                let a = self.expr(then, acc);
                let b = self.expr(els, acc);
                if a.is_float() || b.is_float() {
                    ValueKind::Float
                } else {
                    a
                }
            }
            Expr::Cast { ty, expr } => {
                self.expr(expr, acc);
                ValueKind::of_type(ty, false)
            }
            Expr::Assign { op, target, value } => {
                let v = self.expr(value, acc);
                let compound = op != "=";
                match target.as_ref() {
                    Expr::Index { base, index } if self.array_of(base).is_some() => {
                        self.expr(index, acc);
                        let (bytes, float) = self.array_of(base).unwrap();
                        acc.stores += 1;
                        acc.store_bytes += bytes;
                        if compound {
                            acc.loads += 1;
                            acc.load_bytes += bytes;
                            if float || v.is_float() {
                                acc.flops += 1;
                            }
                        }
                        if float {
                            ValueKind::Float
                        } else {
                            ValueKind::Int
                        }
                    }
                    Expr::Unary { op: deref, operand } if deref == "*" && self.array_of(operand).is_some() => {
                        let (bytes, float) = self.array_of(operand).unwrap();
                        acc.stores += 1;
                        acc.store_bytes += bytes;
                        if float {
                            ValueKind::Float
                        } else {
                            ValueKind::Int
                        }
                    }
                    other => {
                        let t = self.expr(other, acc);
                        if compound
                            && (t.is_float() || v.is_float())
                            && matches!(op.as_str(), "+=" | "-=" | "*=" | "/=")
                        {
                            acc.flops += 1;
                        }
                        t
                    }
                }
            }
        }
    }
}

// ---- dependency analysis --------------------------------------------------

/// Data-flow summary of a kernel's straight-line body.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyReport {
    pub stores: usize,
    /// Stores whose value transitively depends on at least one load.
    pub stores_reaching_loads: usize,
    /// Locals never used, directly or transitively, by any store.
    pub dead_locals: Vec<String>,
}

impl DependencyReport {
    pub fn fully_connected(&self) -> bool {
        self.stores == self.stores_reaching_loads && self.dead_locals.is_empty()
    }
}

pub fn dependency_report(kernel: &KernelDef) -> DependencyReport {
    let arrays: HashSet<&str> =
        kernel.params.iter().filter(|p| p.ty.pointer_depth > 0).filter_map(|p| p.name.as_deref()).collect();
    let mut uses: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut loads_directly: HashSet<&str> = HashSet::new();
    let mut locals: Vec<&str> = Vec::new();
    let mut store_roots: Vec<(Vec<&str>, bool)> = Vec::new();

    fn has_load(e: &Expr, arrays: &HashSet<&str>) -> bool {
        let mut found = false;
        e.walk(&mut |x| {
            if let Expr::Index { base, .. } = x {
                if matches!(base.as_ref(), Expr::Ident(n) if arrays.contains(n.as_str())) {
                    found = true;
                }
            }
        });
        found
    }

    let mut visit: Vec<&Stmt> = kernel.body.iter().collect();
    visit.reverse();
    while let Some(s) = visit.pop() {
        match s {
            Stmt::Decl { name, init, .. } => {
                locals.push(name);
                if let Some(init) = init {
                    uses.insert(name, init.identifiers());
                    if has_load(init, &arrays) {
                        loads_directly.insert(name);
                    }
                }
            }
            Stmt::Expr { expr: Expr::Assign { target, value, .. }, .. } => {
                if let Expr::Index { base, index } = target.as_ref() {
                    if matches!(base.as_ref(), Expr::Ident(n) if arrays.contains(n.as_str())) {
                        let mut ids = value.identifiers();
                        ids.extend(index.identifiers());
                        store_roots.push((ids, has_load(value, &arrays)));
                    }
                }
            }
            Stmt::Block(inner) | Stmt::If { then: inner, .. } => {
                visit.extend(inner.iter().rev());
            }
            _ => {}
        }
    }

    let reaches_load = |start: &[&str]| -> bool {
        let mut stack: Vec<&str> = start.to_vec();
        let mut seen = HashSet::new();
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            if loads_directly.contains(v) {
                return true;
            }
            if let Some(next) = uses.get(v) {
                stack.extend(next.iter().copied());
            }
        }
        false
    };

    let mut live: HashSet<&str> = HashSet::new();
    let mut stack: Vec<&str> = store_roots.iter().flat_map(|(ids, _)| ids.iter().copied()).collect();
    while let Some(v) = stack.pop() {
        if live.insert(v) {
            if let Some(next) = uses.get(v) {
                stack.extend(next.iter().copied());
            }
        }
    }

    DependencyReport {
        stores: store_roots.len(),
        stores_reaching_loads: store_roots.iter().filter(|(ids, direct)| *direct || reaches_load(ids)).count(),
        dead_locals: locals.iter().filter(|l| !live.contains(*l)).map(|l| l.to_string()).collect(),
    }
}

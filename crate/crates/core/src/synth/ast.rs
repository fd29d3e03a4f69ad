//! Syntax tree of the restricted kernel dialect.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Ident(String),
    Number(String),
    Str(String),
    /// `a::b::c`
    Scoped(Vec<String>),
    Member {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Unary {
        op: String,
        operand: Box<Expr>,
    },
    Postfix {
        op: String,
        operand: Box<Expr>,
    },
    Binary {
        op: String,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Cast {
        ty: TypeName,
        expr: Box<Expr>,
    },
    Assign {
        op: String,
        target: Box<Expr>,
        value: Box<Expr>,
    },
    /// `{a, b}` initializer list
    List(Vec<Expr>),
}

impl Expr {
    pub fn binary(op: &str, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op: op.to_string(), lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    /// Visits this expression and all sub-expressions, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Ident(_) | Expr::Number(_) | Expr::Str(_) | Expr::Scoped(_) => {}
            Expr::Member { base, .. } => base.walk(f),
            Expr::Index { base, index } => {
                base.walk(f);
                index.walk(f);
            }
            Expr::Call { callee, args } => {
                callee.walk(f);
                args.iter().for_each(|a| a.walk(f));
            }
            Expr::Unary { operand, .. } | Expr::Postfix { operand, .. } => operand.walk(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Ternary { cond, then, els } => {
                cond.walk(f);
                then.walk(f);
                els.walk(f);
            }
            Expr::Cast { expr, .. } => expr.walk(f),
            Expr::Assign { target, value, .. } => {
                target.walk(f);
                value.walk(f);
            }
            Expr::List(items) => items.iter().for_each(|a| a.walk(f)),
        }
    }

    /// Plain identifiers referenced anywhere in the expression.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Ident(name) = e {
                out.push(name.as_str());
            }
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeName {
    /// Base type words, e.g. `const unsigned int` or `std::size_t`.
    pub base: String,
    pub pointer_depth: usize,
    pub reference: bool,
}

impl TypeName {
    pub fn is_auto(&self) -> bool {
        self.base.split_whitespace().any(|w| w == "auto")
    }

    fn core_word(&self) -> &str {
        self.base
            .split_whitespace()
            .rfind(|w| !matches!(*w, "const" | "volatile" | "static" | "constexpr" | "__restrict__" | "register"))
            .unwrap_or("")
    }

    /// Whether the pointee (or the value, for non-pointers) is floating point.
    pub fn is_float(&self) -> bool {
        matches!(
            self.core_word().rsplit("::").next().unwrap_or(""),
            "float" | "double" | "half" | "__half" | "_Float16" | "float2" | "float4" | "double2"
        )
    }

    /// Size in bytes of one element of the value (or pointee) type.
    pub fn element_size(&self) -> usize {
        let core = self.core_word().rsplit("::").next().unwrap_or("");
        let longs = self.base.split_whitespace().filter(|w| *w == "long").count();
        match core {
            "double" | "size_t" | "int64_t" | "uint64_t" | "ptrdiff_t" | "float2" => 8,
            "float" | "int32_t" | "uint32_t" | "unsigned" | "signed" => 4,
            "half" | "__half" | "_Float16" | "short" | "int16_t" | "uint16_t" => 2,
            "char" | "bool" | "int8_t" | "uint8_t" => 1,
            "float4" | "double2" => 16,
            "int" if longs > 0 => 8,
            "long" => 8,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Stmt {
    Decl { ty: TypeName, name: String, array_len: Option<Expr>, init: Option<Expr>, line: usize },
    Expr { expr: Expr, line: usize },
    For { init: Option<Box<Stmt>>, cond: Option<Expr>, step: Option<Expr>, body: Vec<Stmt>, line: usize },
    While { cond: Expr, body: Vec<Stmt>, line: usize },
    If { cond: Expr, then: Vec<Stmt>, els: Vec<Stmt>, line: usize },
    Block(Vec<Stmt>),
    Return(Option<Expr>),
    Break,
    Continue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub ty: TypeName,
    pub name: Option<String>,
}

/// Memory and arithmetic operation counts for one region of a kernel body.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub loads: usize,
    pub stores: usize,
    pub flops: usize,
    pub atomics: usize,
    pub load_bytes: usize,
    pub store_bytes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KernelStats {
    /// Operations outside any loop (conditional bodies counted once).
    pub straight_line: OpCounts,
    /// Per-iteration operations of each loop, in source order.
    pub loops: Vec<OpCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub line: usize,
    pub stats: KernelStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Launch {
    pub kernel: String,
    /// Source text of each `<<<...>>>` argument.
    pub config: Vec<String>,
    pub arg_count: usize,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

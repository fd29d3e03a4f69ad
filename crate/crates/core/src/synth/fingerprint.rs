//! Identifier-independent structural hash of the kernels in a source file.
//!
//! Kernel names, parameters, locals and any other non-reserved identifiers
//! are replaced by positional indices before hashing, so alpha-renamed
//! variants of one kernel share a fingerprint.

use std::collections::HashMap;
use std::fmt::Write;

use sha2::{Digest, Sha256};

use super::ast::{Expr, KernelDef, Stmt, TypeName};
use super::reserved::is_reserved;

#[derive(Default)]
struct Canon {
    names: HashMap<String, String>,
    kernels: usize,
    params: usize,
    locals: usize,
    others: usize,
}

impl Canon {
    fn bind(&mut self, name: &str, prefix: char) -> String {
        let counter = match prefix {
            'k' => &mut self.kernels,
            'p' => &mut self.params,
            'v' => &mut self.locals,
            _ => &mut self.others,
        };
        let slot = format!("{prefix}{counter}");
        *counter += 1;
        self.names.insert(name.to_string(), slot.clone());
        slot
    }

    fn name(&mut self, name: &str) -> String {
        if is_reserved(name) {
            return name.to_string();
        }
        if let Some(n) = self.names.get(name) {
            return n.clone();
        }
        self.bind(name, 'g')
    }

    fn ty(&self, ty: &TypeName) -> String {
        format!("{}{}{}", ty.base, "*".repeat(ty.pointer_depth), if ty.reference { "&" } else { "" })
    }

    fn expr(&mut self, e: &Expr, out: &mut String) {
        match e {
            Expr::Ident(n) => {
                let n = self.name(n);
                out.push_str(&n);
            }
            Expr::Number(n) => {
                let digits: String = n.chars().filter(|&c| c != '\'').collect();
                out.push_str(&digits);
            }
            Expr::Str(s) => out.push_str(s),
            Expr::Scoped(parts) => out.push_str(&parts.join("::")),
            Expr::Member { base, field, arrow } => {
                self.expr(base, out);
                out.push_str(if *arrow { "->" } else { "." });
                out.push_str(field);
            }
            Expr::Index { base, index } => {
                self.expr(base, out);
                out.push('[');
                self.expr(index, out);
                out.push(']');
            }
            Expr::Call { callee, args } => {
                self.expr(callee, out);
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.expr(a, out);
                }
                out.push(')');
            }
            Expr::Unary { op, operand } => {
                out.push('(');
                out.push_str(op);
                self.expr(operand, out);
                out.push(')');
            }
            Expr::Postfix { op, operand } => {
                out.push('(');
                self.expr(operand, out);
                out.push_str(op);
                out.push(')');
            }
            Expr::Binary { op, lhs, rhs } => {
                out.push('(');
                self.expr(lhs, out);
                out.push_str(op);
                self.expr(rhs, out);
                out.push(')');
            }
            Expr::Ternary { cond, then, els } => {
                out.push('(');
                self.expr(cond, out);
                out.push('?');
                self.expr(then, out);
                out.push(':');
                self.expr(els, out);
                out.push(')');
            }
            Expr::Cast { ty, expr } => {
                let _ = write!(out, "cast<{}>(", self.ty(ty));
                self.expr(expr, out);
                out.push(')');
            }
            Expr::Assign { op, target, value } => {
                self.expr(target, out);
                out.push_str(op);
                self.expr(value, out);
            }
            Expr::List(items) => {
                out.push('{');
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.expr(a, out);
                }
                out.push('}');
            }
        }
    }

    fn stmts(&mut self, stmts: &[Stmt], out: &mut String) {
        out.push('{');
        for s in stmts {
            self.stmt(s, out);
        }
        out.push('}');
    }

    fn stmt(&mut self, s: &Stmt, out: &mut String) {
        match s {
            Stmt::Decl { ty, name, array_len, init, .. } => {
                // the initializer is evaluated before the name is in scope
                let mut init_text = String::new();
                if let Some(init) = init {
                    self.expr(init, &mut init_text);
                }
                let mut len_text = String::new();
                if let Some(len) = array_len {
                    self.expr(len, &mut len_text);
                }
                let slot = self.bind(name, 'v');
                let _ = write!(out, "decl {} {slot}[{len_text}]={init_text};", self.ty(ty));
            }
            Stmt::Expr { expr, .. } => {
                self.expr(expr, out);
                out.push(';');
            }
            Stmt::For { init, cond, step, body, .. } => {
                out.push_str("for(");
                if let Some(init) = init {
                    self.stmt(init, out);
                }
                out.push(';');
                if let Some(cond) = cond {
                    self.expr(cond, out);
                }
                out.push(';');
                if let Some(step) = step {
                    self.expr(step, out);
                }
                out.push(')');
                self.stmts(body, out);
            }
            Stmt::While { cond, body, .. } => {
                out.push_str("while(");
                self.expr(cond, out);
                out.push(')');
                self.stmts(body, out);
            }
            Stmt::If { cond, then, els, .. } => {
                out.push_str("if(");
                self.expr(cond, out);
                out.push(')');
                self.stmts(then, out);
                out.push_str("else");
                self.stmts(els, out);
            }
            Stmt::Block(inner) => self.stmts(inner, out),
            Stmt::Return(value) => {
                out.push_str("return ");
                if let Some(v) = value {
                    self.expr(v, out);
                }
                out.push(';');
            }
            Stmt::Break => out.push_str("break;"),
            Stmt::Continue => out.push_str("continue;"),
        }
    }
}

/// Canonical text of the kernels, identifiers replaced by indices.
pub fn canonical_form(kernels: &[KernelDef]) -> String {
    let mut c = Canon::default();
    let mut out = String::new();
    for k in kernels {
        let kname = c.bind(&k.name, 'k');
        c.params = 0;
        c.locals = 0;
        let _ = write!(out, "kernel {kname}(");
        for p in &k.params {
            let slot = match &p.name {
                Some(n) => c.bind(n, 'p'),
                None => "_".into(),
            };
            let _ = write!(out, "{} {slot},", c.ty(&p.ty));
        }
        out.push(')');
        c.stmts(&k.body, &mut out);
        out.push('\n');
    }
    out
}

/// Hex-encoded 128-bit structural fingerprint.
pub fn fingerprint(kernels: &[KernelDef]) -> String {
    let digest = Sha256::digest(canonical_form(kernels).as_bytes());
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::parse::validate_restricted;

    fn fp(src: &str) -> String {
        let p = validate_restricted(src);
        assert!(!p.has_errors(), "{:?}", p.diagnostics);
        fingerprint(&p.kernels)
    }

    #[test]
    fn independent_of_identifier_names() {
        let a = "__global__ void k(float* a, float* b) { auto t = threadIdx.x; auto v = a[t]; b[t] = v * v; }";
        let b = "__global__ void q(float* xx, float* yy) { auto i = threadIdx.x; auto w = xx[i]; yy[i] = w * w; }";
        assert_eq!(fp(a), fp(b));
        assert_eq!(fp(a).len(), 32);
    }

    #[test]
    fn sensitive_to_structure_and_types() {
        let base = "__global__ void k(float* a, float* b) { auto t = threadIdx.x; auto v = a[t]; b[t] = v * v; }";
        let op = "__global__ void k(float* a, float* b) { auto t = threadIdx.x; auto v = a[t]; b[t] = v + v; }";
        let ty = "__global__ void k(double* a, double* b) { auto t = threadIdx.x; auto v = a[t]; b[t] = v * v; }";
        let swapped = "__global__ void k(float* a, float* b) { auto t = threadIdx.x; auto v = b[t]; a[t] = v * v; }";
        assert_ne!(fp(base), fp(op));
        assert_ne!(fp(base), fp(ty));
        assert_ne!(fp(base), fp(swapped));
    }

    #[test]
    fn whitespace_and_comments_do_not_matter() {
        let a = "__global__ void k(float* a) { a[threadIdx.x] = 1.0f; }";
        let b = "// header\n__global__ void k(float* a)\n{\n    a[threadIdx.x] = 1.0f; /* store */\n}\n";
        assert_eq!(fp(a), fp(b));
    }

    #[test]
    fn digit_separators_are_canonical() {
        let a = "__global__ void k(float* a) { a[1000000] = 1.0f; }";
        let b = "__global__ void k(float* a) { a[1'000'000] = 1.0f; }";
        assert_eq!(fp(a), fp(b));
    }
}

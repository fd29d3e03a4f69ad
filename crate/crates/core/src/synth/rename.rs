use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ast::Stmt;
use super::lexer::{tokenize, Token, TokenKind};
use super::parse::validate_restricted;
use super::reserved::is_reserved;
use super::SynthError;

/// Bijective identifier substitution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenameMap {
    pub seed: u64,
    pub mapping: BTreeMap<String, String>,
}

impl RenameMap {
    /// Draws a fresh random name for every non-reserved identifier in
    /// `originals`. New names avoid reserved words and everything in `avoid`.
    pub fn random<'a>(originals: impl IntoIterator<Item = &'a str>, avoid: &HashSet<&str>, seed: u64) -> RenameMap {
        const HEAD: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
        const TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_";
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut taken: HashSet<String> = avoid.iter().map(|s| s.to_string()).collect();
        let mut mapping = BTreeMap::new();
        let originals: BTreeSet<&str> = originals.into_iter().collect();
        for original in originals {
            if is_reserved(original) {
                continue;
            }
            let fresh = loop {
                let len = rng.random_range(4..=9);
                let mut s = String::with_capacity(len);
                s.push(HEAD[rng.random_range(0..HEAD.len())] as char);
                for _ in 1..len {
                    s.push(TAIL[rng.random_range(0..TAIL.len())] as char);
                }
                if !is_reserved(&s) && !taken.contains(&s) {
                    break s;
                }
            };
            taken.insert(fresh.clone());
            mapping.insert(original.to_string(), fresh);
        }
        RenameMap { seed, mapping }
    }

    pub fn get(&self, original: &str) -> Option<&str> {
        self.mapping.get(original).map(String::as_str)
    }

    pub fn is_bijective(&self) -> bool {
        let targets: HashSet<&String> = self.mapping.values().collect();
        targets.len() == self.mapping.len()
            && self.mapping.keys().all(|k| !targets.contains(k) || self.mapping[k] == *k)
    }
}

/// Renames every user-declared identifier in `source`.
///
/// Kernel parameters and locals come from the parsed kernels; host-side
/// declarations are recognised from `type name` token shapes. Member names
/// (`.x`, `->y`), qualified names (`std::...`), comments, strings and
/// preprocessor lines are never modified.
pub fn rename_source(source: &str, seed: u64) -> Result<(String, RenameMap), SynthError> {
    let parsed = validate_restricted(source);
    if let Some(d) = parsed.first_error() {
        return Err(SynthError::Parse { line: d.line, column: d.column, message: d.message.clone() });
    }
    let tokens =
        tokenize(source).map_err(|e| SynthError::Parse { line: e.line, column: e.column, message: e.message })?;
    let code: Vec<&Token> = tokens.iter().filter(|t| t.is_code()).collect();

    let mut declared: BTreeSet<&str> = BTreeSet::new();
    for k in &parsed.kernels {
        declared.insert(k.name.as_str());
        declared.extend(k.params.iter().filter_map(|p| p.name.as_deref()));
        collect_locals(&k.body, &mut declared);
    }
    for i in 0..code.len() {
        if is_host_declaration(source, &code, i) {
            declared.insert(code[i].text(source));
        }
    }
    // names also used by the preprocessor are macros or macro-visible; leave them
    let macro_words: HashSet<&str> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Preprocessor)
        .flat_map(|t| t.text(source).split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')))
        .collect();
    declared.retain(|d| !macro_words.contains(d));

    let all_idents: HashSet<&str> =
        code.iter().filter(|t| t.kind == TokenKind::Ident).map(|t| t.text(source)).collect();
    let map = RenameMap::random(declared.iter().copied(), &all_idents, seed);

    let mut out = String::with_capacity(source.len());
    let mut last = 0;
    for (i, tok) in code.iter().enumerate() {
        if tok.kind != TokenKind::Ident {
            continue;
        }
        let qualified = i > 0 && matches!(code[i - 1].text(source), "." | "->" | "::");
        if qualified {
            continue;
        }
        if let Some(new) = map.get(tok.text(source)) {
            out.push_str(&source[last..tok.span.start]);
            out.push_str(new);
            last = tok.span.end;
        }
    }
    out.push_str(&source[last..]);
    Ok((out, map))
}

fn collect_locals<'a>(stmts: &'a [Stmt], out: &mut BTreeSet<&'a str>) {
    for s in stmts {
        match s {
            Stmt::Decl { name, .. } => {
                out.insert(name.as_str());
            }
            Stmt::For { init, body, .. } => {
                if let Some(init) = init {
                    collect_locals(std::slice::from_ref(init.as_ref()), out);
                }
                collect_locals(body, out);
            }
            Stmt::While { body, .. } | Stmt::Block(body) => collect_locals(body, out),
            Stmt::If { then, els, .. } => {
                collect_locals(then, out);
                collect_locals(els, out);
            }
            _ => {}
        }
    }
}

const NOT_TYPES: &[&str] =
    &["return", "else", "case", "goto", "delete", "new", "throw", "sizeof", "typename", "using", "namespace"];

fn is_host_declaration(src: &str, code: &[&Token], i: usize) -> bool {
    if code[i].kind != TokenKind::Ident || i == 0 {
        return false;
    }
    let name = code[i].text(src);
    if is_reserved(name) {
        return false;
    }
    let next = code.get(i + 1).map(|t| t.text(src)).unwrap_or("");
    if !matches!(next, "=" | ";" | "," | "{" | "(" | "[" | ")") {
        return false;
    }
    let prev = code[i - 1];
    let prev_text = prev.text(src);
    match prev.kind {
        TokenKind::Ident => !NOT_TYPES.contains(&prev_text) && !(i >= 2 && matches!(code[i - 2].text(src), "." | "->")),
        TokenKind::Punct if matches!(prev_text, "*" | "&" | "&&") => {
            // `T* name` / `T& name`, but not `a * b(...)`
            if next == "(" {
                return false;
            }
            let mut j = i - 1;
            while j > 0 && matches!(code[j].text(src), "*" | "&" | "&&") {
                j -= 1;
            }
            let before = code[j];
            let type_like =
                (before.kind == TokenKind::Ident && !NOT_TYPES.contains(&before.text(src))) || before.text(src) == ">";
            // the type must itself start a statement or parameter
            let start_ok = j == 0
                || matches!(
                    code[j - 1].text(src),
                    ";" | "{" | "}" | "(" | "," | "const" | "::" | "<" | ">" | "unsigned" | "long" | "struct"
                );
            type_like && (start_ok || code[j - 1].kind == TokenKind::Ident)
        }
        TokenKind::Punct if prev_text == ">" => closes_template(src, code, i - 1),
        _ => false,
    }
}

/// Whether the `>` at `gt` closes a `name<...>` template argument list.
fn closes_template(src: &str, code: &[&Token], gt: usize) -> bool {
    let mut depth = 0i32;
    let mut j = gt;
    loop {
        match code[j].text(src) {
            ">" => depth += 1,
            ">>" => depth += 2,
            "<" => {
                depth -= 1;
                if depth == 0 {
                    return j > 0 && code[j - 1].kind == TokenKind::Ident;
                }
            }
            _ if matches!(code[j].kind, TokenKind::Ident | TokenKind::Number) => {}
            "::" | "," | "*" => {}
            _ => return false,
        }
        if j == 0 {
            return false;
        }
        j -= 1;
    }
}

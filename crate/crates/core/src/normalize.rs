//! C/C++ source normalization: function-body extraction, comment stripping
//! and identifier anonymization.
//!
//! Everything here is lexical. The lexer understands string, character and
//! raw-string literals, pp-numbers, comments and preprocessor lines, which
//! is enough to match braces and rename identifiers without being fooled by
//! `"}"` or `// {`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binary::NameAddressMap;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("unterminated block comment starting at byte {0}")]
    UnterminatedComment(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    /// `<...>` after `#include`.
    HeaderName,
    Punct,
    LineComment,
    BlockComment,
    Whitespace,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    /// Part of a preprocessor line.
    pub directive: bool,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn is_code(&self) -> bool {
        !matches!(self.kind, TokenKind::Whitespace | TokenKind::LineComment | TokenKind::BlockComment)
    }
}

const PUNCT3: &[&str] = &[">>=", "<<=", "...", "->*", "<=>"];
const PUNCT2: &[&str] = &[
    "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=", "##", ".*",
];

fn ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_' || c == b'$' || c >= 0x80
}

fn ident_continue(c: u8) -> bool {
    ident_start(c) || c.is_ascii_digit()
}

/// Splits `src` into tokens covering every byte.
pub fn lex(src: &str) -> Result<Vec<Token>, NormalizeError> {
    let b = src.as_bytes();
    let mut out: Vec<Token> = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    let mut in_directive = false;
    let mut after_include = false;

    while i < b.len() {
        let start = i;
        let c = b[i];
        let kind;
        if c == b'\n' {
            // A newline ends a directive unless escaped.
            let escaped = i > 0 && b[i - 1] == b'\\';
            if !escaped {
                in_directive = false;
                after_include = false;
                line_start = true;
            }
            i += 1;
            kind = TokenKind::Whitespace;
        } else if c.is_ascii_whitespace() {
            while i < b.len() && b[i] != b'\n' && b[i].is_ascii_whitespace() {
                i += 1;
            }
            kind = TokenKind::Whitespace;
        } else if c == b'\\' && b.get(i + 1) == Some(&b'\n') {
            i += 1;
            kind = TokenKind::Whitespace;
        } else if b[i..].starts_with(b"//") {
            while i < b.len() {
                if b[i] == b'\n' && b[i - 1] != b'\\' {
                    break;
                }
                i += 1;
            }
            kind = TokenKind::LineComment;
        } else if b[i..].starts_with(b"/*") {
            match src[i + 2..].find("*/") {
                Some(off) => i += 2 + off + 2,
                None => return Err(NormalizeError::UnterminatedComment(i)),
            }
            kind = TokenKind::BlockComment;
        } else if after_include && c == b'<' {
            while i < b.len() && b[i] != b'>' && b[i] != b'\n' {
                i += 1;
            }
            if i < b.len() && b[i] == b'>' {
                i += 1;
            }
            kind = TokenKind::HeaderName;
        } else if let Some(len) = literal_prefix(&b[i..]) {
            i += len;
            let quote = b[i];
            if quote == b'"' && b[start..i].contains(&b'R') {
                i = raw_string_end(b, i);
            } else {
                i = quoted_end(b, i, quote);
            }
            kind = if quote == b'"' { TokenKind::Str } else { TokenKind::Char };
        } else if c == b'"' || c == b'\'' {
            i = quoted_end(b, i, c);
            kind = if c == b'"' { TokenKind::Str } else { TokenKind::Char };
        } else if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            i += 1;
            while i < b.len() {
                let d = b[i];
                let exponent_sign = matches!(d, b'+' | b'-') && matches!(b[i - 1], b'e' | b'E' | b'p' | b'P');
                let separator = d == b'\'' && b.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric());
                if exponent_sign || separator || ident_continue(d) || d == b'.' {
                    i += 1;
                } else {
                    break;
                }
            }
            kind = TokenKind::Number;
        } else if ident_start(c) {
            while i < b.len() && ident_continue(b[i]) {
                i += 1;
            }
            kind = TokenKind::Ident;
        } else if let Some(p) = PUNCT3.iter().chain(PUNCT2).find(|p| b[i..].starts_with(p.as_bytes())) {
            i += p.len();
            kind = TokenKind::Punct;
        } else if c.is_ascii_punctuation() {
            i += 1;
            kind = TokenKind::Punct;
        } else {
            // Stray control bytes; advance by one char to stay on a boundary.
            i += src[i..].chars().next().map_or(1, char::len_utf8);
            kind = TokenKind::Other;
        }

        let tok = Token { kind, start, end: i, directive: false };
        if tok.is_code() {
            if line_start && tok.kind == TokenKind::Punct && tok.text(src) == "#" {
                in_directive = true;
            } else if in_directive && tok.kind == TokenKind::Ident {
                let prev_hash =
                    out.iter().rev().find(|t| t.is_code()).is_some_and(|t| t.directive && t.text(src) == "#");
                if prev_hash && matches!(tok.text(src), "include" | "include_next" | "import") {
                    after_include = true;
                }
            }
            line_start = false;
        }
        out.push(Token { directive: in_directive && tok.is_code(), ..tok });
    }
    Ok(out)
}

/// Length of an encoding / raw prefix immediately followed by a quote.
fn literal_prefix(b: &[u8]) -> Option<usize> {
    for p in ["u8R", "uR", "UR", "LR", "R", "u8", "u", "U", "L"] {
        if b.starts_with(p.as_bytes()) {
            let q = b.get(p.len());
            let raw = p.ends_with('R');
            if q == Some(&b'"') || (!raw && q == Some(&b'\'')) {
                return Some(p.len());
            }
        }
    }
    None
}

fn quoted_end(b: &[u8], open: usize, quote: u8) -> usize {
    let mut i = open + 1;
    while i < b.len() {
        match b[i] {
            b'\\' => {
                i += 1;
                // Skip the whole escaped character, which may be multi-byte.
                while i < b.len() {
                    i += 1;
                    if i >= b.len() || (b[i] & 0xc0) != 0x80 {
                        break;
                    }
                }
            }
            b'\n' => return i,
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    b.len()
}

fn raw_string_end(b: &[u8], open: usize) -> usize {
    let mut i = open + 1;
    while i < b.len() && b[i] != b'(' && i - open <= 17 {
        i += 1;
    }
    if i >= b.len() || b[i] != b'(' {
        return quoted_end(b, open, b'"');
    }
    let delim = &b[open + 1..i];
    let mut close = Vec::with_capacity(delim.len() + 2);
    close.push(b')');
    close.extend_from_slice(delim);
    close.push(b'"');
    let mut j = i + 1;
    while j + close.len() <= b.len() {
        if b[j..].starts_with(&close) {
            return j + close.len();
        }
        j += 1;
    }
    b.len()
}

/// Code tokens (no whitespace, no comments).
pub fn code_tokens(src: &str) -> Result<Vec<Token>, NormalizeError> {
    Ok(lex(src)?.into_iter().filter(Token::is_code).collect())
}

/// Removes comments. Line comments vanish (their newline stays); block
/// comments become a single space.
pub fn strip_comments(src: &str) -> Result<String, NormalizeError> {
    let mut out = String::with_capacity(src.len());
    for t in lex(src)? {
        match t.kind {
            TokenKind::LineComment => {}
            TokenKind::BlockComment => out.push(' '),
            _ => out.push_str(t.text(src)),
        }
    }
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    // C11
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Alignas",
    "_Alignof",
    "_Atomic",
    "_Bool",
    "_Complex",
    "_Generic",
    "_Imaginary",
    "_Noreturn",
    "_Static_assert",
    "_Thread_local",
    // C++17
    "alignas",
    "alignof",
    "and",
    "and_eq",
    "asm",
    "bitand",
    "bitor",
    "bool",
    "catch",
    "char16_t",
    "char32_t",
    "class",
    "compl",
    "constexpr",
    "const_cast",
    "decltype",
    "delete",
    "dynamic_cast",
    "explicit",
    "export",
    "false",
    "final",
    "friend",
    "mutable",
    "namespace",
    "new",
    "noexcept",
    "not",
    "not_eq",
    "nullptr",
    "operator",
    "or",
    "or_eq",
    "override",
    "private",
    "protected",
    "public",
    "reinterpret_cast",
    "static_assert",
    "static_cast",
    "template",
    "this",
    "thread_local",
    "throw",
    "true",
    "try",
    "typeid",
    "typename",
    "using",
    "virtual",
    "wchar_t",
    "xor",
    "xor_eq",
    // fixed-width and common types
    "int8_t",
    "int16_t",
    "int32_t",
    "int64_t",
    "uint8_t",
    "uint16_t",
    "uint32_t",
    "uint64_t",
    "size_t",
    "NULL",
];

const DIRECTIVES: &[&str] = &[
    "define",
    "undef",
    "include",
    "include_next",
    "import",
    "if",
    "ifdef",
    "ifndef",
    "elif",
    "else",
    "endif",
    "error",
    "warning",
    "pragma",
    "line",
];

pub fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// `ID_<n>` or `FUNC_<n>`: output of a previous anonymization pass.
fn is_anonymized(word: &str) -> bool {
    let digits = word.strip_prefix("ID_").or_else(|| word.strip_prefix("FUNC_"));
    digits.is_some_and(|d| !d.is_empty() && d.bytes().all(|c| c.is_ascii_digit()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFunction {
    pub name: String,
    pub file: PathBuf,
    /// Signature through the closing brace.
    pub body_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedFunction {
    pub name: String,
    pub normalized_text: String,
    pub rename_map: BTreeMap<String, String>,
}

/// Identifier positions that must not be renamed: directive names after
/// `#`, and `defined` on preprocessor lines.
fn is_structural_ident(tokens: &[Token], idx: usize, src: &str) -> bool {
    let t = &tokens[idx];
    if !t.directive {
        return false;
    }
    let word = t.text(src);
    if word == "defined" {
        return true;
    }
    let prev = tokens[..idx].iter().rev().find(|p| p.is_code());
    prev.is_some_and(|p| p.directive && p.text(src) == "#") && DIRECTIVES.contains(&word)
}

/// Renames the function's own name to `FUNC_0` and every other
/// non-reserved identifier to `ID_<n>` in order of first occurrence.
/// Identifiers already of the form `ID_<n>`/`FUNC_<n>` are left alone and
/// their numbers are never reused, which makes the transformation
/// idempotent.
pub fn anonymize_identifiers(func: &SourceFunction) -> Result<NormalizedFunction, NormalizeError> {
    let src = func.body_text.as_str();
    let tokens = lex(src)?;
    let own = func.name.trim_start_matches('~');
    let taken: HashSet<&str> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Ident && is_anonymized(t.text(src)))
        .map(|t| t.text(src))
        .collect();

    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    let mut next_id = 0usize;
    let mut out = String::with_capacity(src.len());
    for (idx, t) in tokens.iter().enumerate() {
        let text = t.text(src);
        let keep = t.kind != TokenKind::Ident
            || is_reserved(text)
            || is_anonymized(text)
            || is_structural_ident(&tokens, idx, src);
        if keep {
            out.push_str(text);
            continue;
        }
        let replacement = match rename.get(text) {
            Some(r) => r.clone(),
            None => {
                let fresh = if text == own && !taken.contains("FUNC_0") {
                    "FUNC_0".to_string()
                } else {
                    loop {
                        let candidate = format!("ID_{next_id}");
                        next_id += 1;
                        if !taken.contains(candidate.as_str()) {
                            break candidate;
                        }
                    }
                };
                rename.insert(text.to_string(), fresh.clone());
                fresh
            }
        };
        out.push_str(&replacement);
    }
    Ok(NormalizedFunction { name: func.name.clone(), normalized_text: out, rename_map: rename })
}

/// Strip comments, then anonymize.
pub fn normalize_function(func: &SourceFunction) -> Result<NormalizedFunction, NormalizeError> {
    let stripped = SourceFunction { body_text: strip_comments(&func.body_text)?, ..func.clone() };
    anonymize_identifiers(&stripped)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionResult {
    pub functions: Vec<SourceFunction>,
    pub not_found: Vec<String>,
    /// Files skipped because they could not be read or lexed.
    pub unreadable: Vec<PathBuf>,
}

const SOURCE_EXTENSIONS: &[&str] = &["c", "cpp", "h", "hpp"];

/// Finds definitions of the map's function names under `root`.
pub fn extract_function_bodies(root: &Path, wanted: &NameAddressMap) -> ExtractionResult {
    let names: BTreeSet<String> = wanted.names().map(str::to_string).collect();
    extract_named_bodies(root, &names)
}

pub fn extract_named_bodies(root: &Path, wanted: &BTreeSet<String>) -> ExtractionResult {
    let mut result = ExtractionResult::default();
    let files = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter(|e| e.path().extension().and_then(|x| x.to_str()).is_some_and(|x| SOURCE_EXTENSIONS.contains(&x)));
    let mut found = BTreeSet::new();
    for entry in files {
        let path = entry.path();
        let Ok(bytes) = std::fs::read(path) else {
            result.unreadable.push(path.to_path_buf());
            continue;
        };
        let text = String::from_utf8_lossy(&bytes);
        match find_definitions(&text) {
            Ok(defs) => {
                for (name, span) in defs {
                    if wanted.contains(&name) {
                        found.insert(name.clone());
                        result.functions.push(SourceFunction {
                            name,
                            file: path.strip_prefix(root).unwrap_or(path).to_path_buf(),
                            body_text: text[span.0..span.1].to_string(),
                        });
                    }
                }
            }
            Err(_) => result.unreadable.push(path.to_path_buf()),
        }
    }
    result.not_found = wanted.difference(&found).cloned().collect();
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Namespace,
    Class,
    Other,
}

enum HeaderMatch {
    Function {
        name: String,
    },
    /// A brace-initializer inside a constructor's member-init list.
    InitializerBrace,
    NotAFunction,
}

/// A function name and the byte span of its definition.
pub type Definition = (String, (usize, usize));

/// Every function definition at namespace or class scope, as
/// `(name, byte span)`. The span runs from the first token of the
/// declaration through the closing brace.
pub fn find_definitions(src: &str) -> Result<Vec<Definition>, NormalizeError> {
    let toks: Vec<Token> = code_tokens(src)?.into_iter().filter(|t| !t.directive).collect();
    let text = |i: usize| toks[i].text(src);
    let mut out = Vec::new();
    let mut scopes: Vec<Scope> = Vec::new();
    let mut stmt_start = 0usize;
    let mut i = 0usize;
    while i < toks.len() {
        let in_decl_scope = scopes.iter().all(|s| matches!(s, Scope::Namespace | Scope::Class));
        let t = text(i);
        if !in_decl_scope {
            // Inside a body we only track nesting.
            match t {
                "{" => scopes.push(Scope::Other),
                "}" => {
                    scopes.pop();
                }
                _ => {}
            }
            i += 1;
            if scopes.iter().all(|s| matches!(s, Scope::Namespace | Scope::Class)) {
                stmt_start = i;
            }
            continue;
        }
        match t {
            ";" => {
                stmt_start = i + 1;
            }
            "}" => {
                scopes.pop();
                stmt_start = i + 1;
            }
            ":" if i > stmt_start
                && i - 1 == stmt_start
                && matches!(text(i - 1), "public" | "private" | "protected") =>
            {
                stmt_start = i + 1;
            }
            "{" => {
                let stmt = &toks[stmt_start..i];
                match match_header(stmt, src) {
                    HeaderMatch::InitializerBrace => {
                        i = skip_balanced(&toks, i, src, "{", "}");
                        continue;
                    }
                    HeaderMatch::Function { name } => {
                        let close = skip_balanced(&toks, i, src, "{", "}");
                        let end = toks.get(close - 1).map_or(src.len(), |t| t.end);
                        let begin = toks.get(stmt_start).map_or(toks[i].start, |t| t.start);
                        out.push((name, (begin, end)));
                        i = close;
                        stmt_start = i;
                        continue;
                    }
                    HeaderMatch::NotAFunction => {
                        let words: Vec<&str> = stmt.iter().map(|t| t.text(src)).collect();
                        let linkage_block =
                            words.first() == Some(&"extern") && stmt.get(1).is_some_and(|t| t.kind == TokenKind::Str);
                        let scope = if words.contains(&"namespace") || linkage_block {
                            Scope::Namespace
                        } else if words.iter().any(|w| matches!(*w, "class" | "struct" | "union"))
                            && !words.contains(&"=")
                            && !words.contains(&"enum")
                        {
                            Scope::Class
                        } else {
                            Scope::Other
                        };
                        scopes.push(scope);
                        stmt_start = i + 1;
                    }
                }
            }
            _ => {}
        }
        i += 1;
    }
    Ok(out)
}

/// Index just past the token closing the group opened at `open`.
fn skip_balanced(toks: &[Token], open: usize, src: &str, l: &str, r: &str) -> usize {
    let mut depth = 0usize;
    let mut i = open;
    while i < toks.len() {
        let t = toks[i].text(src);
        if t == l {
            depth += 1;
        } else if t == r {
            depth -= 1;
            if depth == 0 {
                return i + 1;
            }
        }
        i += 1;
    }
    toks.len()
}

/// Keywords that may take a parenthesized argument after a declarator.
const TRAILING_CALLS: &[&str] = &["noexcept", "throw", "__attribute__", "alignas", "requires", "__declspec"];

/// Decides whether `stmt` (tokens up to an opening brace) is a function
/// header.
fn match_header(stmt: &[Token], src: &str) -> HeaderMatch {
    let text = |i: usize| stmt[i].text(src);
    let pos = |w: &str| stmt.iter().position(|t| t.text(src) == w);
    // `x = f(..) {`-style initializers, enums and namespaces.
    if let Some(eq) = pos("=") {
        if pos("(").is_none_or(|p| eq < p) {
            return HeaderMatch::NotAFunction;
        }
    }
    if pos("enum").is_some() || pos("namespace").is_some() {
        return HeaderMatch::NotAFunction;
    }
    let mut depth = 0i32;
    for i in 0..stmt.len() {
        let t = text(i);
        if t == "(" {
            if depth == 0 && i > 0 {
                let prev = &stmt[i - 1];
                let pname = prev.text(src);
                let is_name = prev.kind == TokenKind::Ident && !is_reserved(pname) && !TRAILING_CALLS.contains(&pname);
                if is_name {
                    let close = skip_balanced(stmt, i, src, "(", ")");
                    match trailing_state(&stmt[close..], src) {
                        Trailing::Body => return HeaderMatch::Function { name: declarator_name(stmt, i - 1, src) },
                        Trailing::InitBrace => return HeaderMatch::InitializerBrace,
                        Trailing::Invalid => {}
                    }
                }
            }
            depth += 1;
        } else if t == ")" {
            depth -= 1;
        }
    }
    HeaderMatch::NotAFunction
}

fn declarator_name(stmt: &[Token], idx: usize, src: &str) -> String {
    let name = stmt[idx].text(src);
    if idx > 0 && stmt[idx - 1].text(src) == "~" {
        format!("~{name}")
    } else {
        name.to_string()
    }
}

enum Trailing {
    Body,
    InitBrace,
    Invalid,
}

/// Validates what sits between a parameter list's `)` and the body `{`:
/// cv/ref qualifiers, specifiers, trailing return types, attributes and a
/// constructor member-init list.
fn trailing_state(rest: &[Token], src: &str) -> Trailing {
    let mut i = 0;
    let text = |i: usize| rest[i].text(src);
    while i < rest.len() {
        let t = text(i);
        match t {
            ":" => return init_list_state(&rest[i + 1..], src),
            "[" if rest.get(i + 1).is_some_and(|n| n.text(src) == "[") => {
                i = skip_balanced(rest, i, src, "[", "]");
            }
            "->" | "::" | "*" | "&" | "&&" | "<" | ">" | "," => i += 1,
            _ if rest[i].kind == TokenKind::Ident => {
                if TRAILING_CALLS.contains(&t) && rest.get(i + 1).is_some_and(|n| n.text(src) == "(") {
                    i = skip_balanced(rest, i + 1, src, "(", ")");
                } else if rest.get(i + 1).is_some_and(|n| n.text(src) == "(")
                    && rest[..i].iter().any(|p| p.text(src) == "->")
                {
                    // decltype(...) in a trailing return type
                    i = skip_balanced(rest, i + 1, src, "(", ")");
                } else {
                    i += 1;
                }
            }
            _ => return Trailing::Invalid,
        }
    }
    Trailing::Body
}

fn init_list_state(rest: &[Token], src: &str) -> Trailing {
    let mut i = 0;
    loop {
        // member or base name, possibly qualified / templated
        let mut saw_name = false;
        while i < rest.len() {
            let t = rest[i].text(src);
            if rest[i].kind == TokenKind::Ident || t == "::" {
                saw_name = true;
                i += 1;
            } else if t == "<" && saw_name {
                i = skip_balanced(rest, i, src, "<", ">");
            } else {
                break;
            }
        }
        if !saw_name {
            return Trailing::Invalid;
        }
        if i >= rest.len() {
            // `name` then the brace we stopped at: a brace initializer.
            return Trailing::InitBrace;
        }
        match rest[i].text(src) {
            "(" => i = skip_balanced(rest, i, src, "(", ")"),
            "{" => i = skip_balanced(rest, i, src, "{", "}"),
            _ => return Trailing::Invalid,
        }
        if i < rest.len() && rest[i].text(src) == "..." {
            i += 1;
        }
        if i >= rest.len() {
            return Trailing::Body;
        }
        if rest[i].text(src) != "," {
            return Trailing::Invalid;
        }
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(name: &str, body: &str) -> SourceFunction {
        SourceFunction { name: name.into(), file: PathBuf::from("x.c"), body_text: body.into() }
    }

    fn defs(src: &str) -> Vec<(String, String)> {
        find_definitions(src).unwrap().into_iter().map(|(n, (a, b))| (n, src[a..b].to_string())).collect()
    }

    #[test]
    fn strip_examples() {
        assert_eq!(strip_comments("x = 1; // set\ny = 2;").unwrap(), "x = 1; \ny = 2;");
        let s = r#"s = "// not a comment";"#;
        assert_eq!(strip_comments(s).unwrap(), s);
        assert_eq!(strip_comments("a/*x*/b").unwrap(), "a b");
        assert_eq!(strip_comments("/* open"), Err(NormalizeError::UnterminatedComment(0)));
        assert_eq!(strip_comments("c = '/'; /* } */ d").unwrap(), "c = '/';   d");
        assert_eq!(strip_comments("// a \\\n still\nx").unwrap(), "\nx");
    }

    #[test]
    fn anonymize_examples() {
        let n = anonymize_identifiers(&sf("add", "int add(int a,int b){return a+b;}")).unwrap();
        assert_eq!(n.normalized_text, "int FUNC_0(int ID_0,int ID_1){return ID_0+ID_1;}");
        assert_eq!(n.rename_map["add"], "FUNC_0");
        let n = anonymize_identifiers(&sf("f", "a+a")).unwrap();
        assert_eq!(n.normalized_text, "ID_0+ID_0");
        let n = anonymize_identifiers(&sf("f", "return 0;")).unwrap();
        assert_eq!(n.normalized_text, "return 0;");
        assert!(n.rename_map.is_empty());
    }

    #[test]
    fn literals_and_directives_survive() {
        let body = "void f(){\n#ifdef DEBUG\n log(\"x}\", 'y', u8\"z\", 0x1f, 1.5e+3f);\n#endif\n}";
        let n = anonymize_identifiers(&sf("f", body)).unwrap();
        assert_eq!(
            n.normalized_text,
            "void FUNC_0(){\n#ifdef ID_0\n ID_1(\"x}\", 'y', u8\"z\", 0x1f, 1.5e+3f);\n#endif\n}"
        );
        let n = anonymize_identifiers(&sf("g", "#if defined(X)\n#include <a/b.h>\n#endif")).unwrap();
        assert_eq!(n.normalized_text, "#if defined(ID_0)\n#include <a/b.h>\n#endif");
    }

    #[test]
    fn anonymization_is_idempotent_with_preexisting_ids() {
        let first = anonymize_identifiers(&sf("f", "int f(){ return ID_1 + x; }")).unwrap();
        assert_eq!(first.normalized_text, "int FUNC_0(){ return ID_1 + ID_0; }");
        let again = anonymize_identifiers(&sf("FUNC_0", &first.normalized_text)).unwrap();
        assert_eq!(again.normalized_text, first.normalized_text);
    }

    #[test]
    fn raw_strings_hide_braces() {
        let src = "const char* f() { return R\"x(})\")x\"; }\nint g() { return 1; }";
        let d = defs(src);
        assert_eq!(d.len(), 2);
        assert!(d[0].1.ends_with("\"; }"));
        assert_eq!(d[1].0, "g");
    }

    #[test]
    fn definition_vs_declaration_vs_call() {
        let src = "int add(int a,int b){return a+b;}\nint use(void);\nint x = add(1, 2);\n";
        let d = defs(src);
        assert_eq!(d, vec![("add".to_string(), "int add(int a,int b){return a+b;}".to_string())]);

        let only_call = "void g(void) { add(1, 2); }";
        let names: Vec<String> = defs(only_call).into_iter().map(|d| d.0).collect();
        assert_eq!(names, vec!["g"]);
    }

    #[test]
    fn string_brace_traps() {
        let src = "void f(void) { puts(\"}\"); putc('{'); /* } */ // {\n }\nvoid h(void) {}";
        let d = defs(src);
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].1, "void h(void) {}");
    }

    #[test]
    fn cpp_scopes() {
        let src = r#"
namespace nav {
class Planner : public Base {
public:
    Planner(int a) : a_(a), b_{2}, Base() {}
    ~Planner() override { stop(); }
    int get() const noexcept { return a_; }
    auto twice() -> int { return a_ * 2; }
    struct Inner { int v; };
private:
    int a_;
};
void Planner::run(int n) { for (int i = 0; i < n; ++i) { step(); } }
extern "C" {
__attribute__((noinline)) int c_api(void) { return 0; }
}
enum Mode { A, B };
}
"#;
        let names: Vec<String> = defs(src).into_iter().map(|d| d.0).collect();
        assert_eq!(names, vec!["Planner", "~Planner", "get", "twice", "run", "c_api"]);
    }

    #[test]
    fn token_count_is_preserved() {
        let src = "int f(int a){ /* c */ return a<<=2 ... ->* x; // t\n}";
        let stripped = strip_comments(src).unwrap();
        let n = anonymize_identifiers(&sf("f", &stripped)).unwrap();
        let count = |s: &str| code_tokens(s).unwrap().len();
        assert_eq!(count(src), count(&stripped));
        assert_eq!(count(&stripped), count(&n.normalized_text));
    }
}

//! PENMAN notation for AMR graphs.
//!
//! The parser accepts the dialect emitted by seq2seq AMR parsers: quoted
//! string constants (with `\"` escapes), bare numbers and symbols such as the
//! polarity markers `-` and `+`, inverse roles kept verbatim (`:ARG1-of`), and
//! re-entrant variable references in target position. Lines whose first
//! non-blank character is `#` are metadata comments and are skipped.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Line/column (1-based) of a token in the PENMAN source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PenmanError {
    #[error("EmptyInput: no PENMAN graph found")]
    EmptyInput,
    #[error("UnbalancedParens at {pos}: {detail}")]
    UnbalancedParens { pos: Position, detail: String },
    #[error("DuplicateInstance at {pos}: variable `{var}` is assigned a second instance")]
    DuplicateInstance { var: String, pos: Position },
    #[error("DanglingVariable at {pos}: `{var}` is referenced but never instantiated")]
    DanglingVariable { var: String, pos: Position },
    #[error("UnexpectedToken at {pos}: expected {expected}, found `{found}`")]
    UnexpectedToken {
        pos: Position,
        expected: &'static str,
        found: String,
    },
    #[error("InvalidVariable at {pos}: `{var}` is not an alphanumeric variable id")]
    InvalidVariable { var: String, pos: Position },
    #[error("UnterminatedString at {pos}")]
    UnterminatedString { pos: Position },
    #[error("CyclicInstanceTree: node `{var}` is not reachable from the root and cannot be linearized")]
    CyclicInstanceTree { var: String },
    #[error("MissingRoot: root variable `{var}` has no node")]
    MissingRoot { var: String },
}

impl PenmanError {
    pub fn position(&self) -> Option<Position> {
        match self {
            PenmanError::UnbalancedParens { pos, .. }
            | PenmanError::DuplicateInstance { pos, .. }
            | PenmanError::DanglingVariable { pos, .. }
            | PenmanError::UnexpectedToken { pos, .. }
            | PenmanError::InvalidVariable { pos, .. }
            | PenmanError::UnterminatedString { pos } => Some(*pos),
            _ => None,
        }
    }
}

/// Target of an outgoing edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Target {
    /// Another node, either a tree child or a re-entrant reference.
    Node(String),
    /// Double-quoted string constant, stored unescaped and without quotes.
    Str(String),
    /// Bare constant: numbers, `-`/`+`, and other unquoted symbols.
    Symbol(String),
}

impl Target {
    pub fn is_constant(&self) -> bool {
        !matches!(self, Target::Node(_))
    }

    /// Constant text with quotes stripped; `None` for node targets.
    pub fn constant_text(&self) -> Option<&str> {
        match self {
            Target::Str(s) | Target::Symbol(s) => Some(s),
            Target::Node(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub role: String,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmrNode {
    pub var: String,
    pub instance: String,
    /// All outgoing edges in source order, attributes and children interleaved.
    pub edges: Vec<Edge>,
}

impl AmrNode {
    pub fn new(var: impl Into<String>, instance: impl Into<String>) -> Self {
        AmrNode {
            var: var.into(),
            instance: instance.into(),
            edges: Vec::new(),
        }
    }

    /// `(role, constant)` pairs in source order.
    pub fn attrs(&self) -> impl Iterator<Item = (&str, &Target)> {
        self.edges
            .iter()
            .filter(|e| e.target.is_constant())
            .map(|e| (e.role.as_str(), &e.target))
    }

    /// `(role, variable)` pairs in source order.
    pub fn children(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().filter_map(|e| match &e.target {
            Target::Node(v) => Some((e.role.as_str(), v.as_str())),
            _ => None,
        })
    }

    /// First constant attached under `role`.
    pub fn attr(&self, role: &str) -> Option<&Target> {
        self.attrs().find(|(r, _)| *r == role).map(|(_, t)| t)
    }

    /// First child variable attached under `role`.
    pub fn child(&self, role: &str) -> Option<&str> {
        self.children().find(|(r, _)| *r == role).map(|(_, v)| v)
    }
}

/// A rooted AMR graph. Nodes are kept in the order their instances were
/// first defined in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmrGraph {
    pub root: String,
    pub nodes: IndexMap<String, AmrNode>,
}

impl AmrGraph {
    pub fn node(&self, var: &str) -> Option<&AmrNode> {
        self.nodes.get(var)
    }

    pub fn root_node(&self) -> &AmrNode {
        &self.nodes[&self.root]
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.edges.len()).sum()
    }

    /// Variables reachable from `start` (inclusive), in pre-order.
    pub fn reachable_from(&self, start: &str) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![start.to_string()];
        while let Some(var) = stack.pop() {
            if !seen.insert(var.clone()) {
                continue;
            }
            let Some(node) = self.nodes.get(&var) else {
                continue;
            };
            order.push(var);
            for (_, child) in node.children().collect::<Vec<_>>().into_iter().rev() {
                if !seen.contains(child) {
                    stack.push(child.to_string());
                }
            }
        }
        order
    }

    /// Checks the structural invariants of a graph built by hand.
    pub fn validate(&self) -> Result<(), PenmanError> {
        if !self.nodes.contains_key(&self.root) {
            return Err(PenmanError::MissingRoot {
                var: self.root.clone(),
            });
        }
        for node in self.nodes.values() {
            for (_, child) in node.children() {
                if !self.nodes.contains_key(child) {
                    return Err(PenmanError::DanglingVariable {
                        var: child.to_string(),
                        pos: Position { line: 0, column: 0 },
                    });
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Str(String),
    Word(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    pos: Position,
}

fn lex(text: &str) -> Result<Vec<Spanned>, PenmanError> {
    let mut out = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Position {
                line: line_idx + 1,
                column: i + 1,
            };
            match c {
                c if c.is_whitespace() => i += 1,
                '(' => {
                    out.push(Spanned { tok: Tok::Open, pos });
                    i += 1;
                }
                ')' => {
                    out.push(Spanned { tok: Tok::Close, pos });
                    i += 1;
                }
                '/' => {
                    out.push(Spanned { tok: Tok::Slash, pos });
                    i += 1;
                }
                '"' => {
                    let mut s = String::new();
                    i += 1;
                    let mut closed = false;
                    while i < chars.len() {
                        match chars[i] {
                            '\\' if i + 1 < chars.len() => {
                                s.push(chars[i + 1]);
                                i += 2;
                            }
                            '"' => {
                                closed = true;
                                i += 1;
                                break;
                            }
                            ch => {
                                s.push(ch);
                                i += 1;
                            }
                        }
                    }
                    if !closed {
                        return Err(PenmanError::UnterminatedString { pos });
                    }
                    out.push(Spanned { tok: Tok::Str(s), pos });
                }
                _ => {
                    let start = i;
                    while i < chars.len() && !is_delimiter(chars[i]) {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    let tok = if word.starts_with(':') {
                        Tok::Role(word)
                    } else {
                        Tok::Word(word)
                    };
                    out.push(Spanned { tok, pos });
                }
            }
        }
    }
    Ok(out)
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '"')
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Open => "(".into(),
        Tok::Close => ")".into(),
        Tok::Slash => "/".into(),
        Tok::Role(r) => r.clone(),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Word(w) => w.clone(),
    }
}

// ---------------------------------------------------------------------------
// Parser

/// Edge target before bare words are resolved against the variable set.
enum RawTarget {
    Node(String),
    Str(String),
    Bare(String, Position),
}

struct RawNode {
    var: String,
    instance: String,
    edges: Vec<(String, RawTarget)>,
}

struct Parser<'a> {
    toks: &'a [Spanned],
    i: usize,
    nodes: IndexMap<String, RawNode>,
    def_pos: HashMap<String, Position>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.i)
    }

    fn last_pos(&self) -> Position {
        self.toks
            .last()
            .map(|t| t.pos)
            .unwrap_or(Position { line: 1, column: 1 })
    }

    fn next(&mut self, expected: &'static str) -> Result<Spanned, PenmanError> {
        match self.toks.get(self.i) {
            Some(t) => {
                self.i += 1;
                Ok(t.clone())
            }
            None => Err(PenmanError::UnbalancedParens {
                pos: self.last_pos(),
                detail: format!("input ended while expecting {expected}"),
            }),
        }
    }

    /// Parses `( var / concept (role target)* )` and returns the variable.
    fn node(&mut self) -> Result<String, PenmanError> {
        let open = self.next("(")?;
        if open.tok != Tok::Open {
            return Err(PenmanError::UnexpectedToken {
                pos: open.pos,
                expected: "(",
                found: describe(&open.tok),
            });
        }
        let var_tok = self.next("variable")?;
        let var = match var_tok.tok {
            Tok::Word(w) => w,
            other => {
                return Err(PenmanError::UnexpectedToken {
                    pos: var_tok.pos,
                    expected: "variable",
                    found: describe(&other),
                })
            }
        };
        if !is_valid_var(&var) {
            return Err(PenmanError::InvalidVariable {
                var,
                pos: var_tok.pos,
            });
        }
        let slash = self.next("/")?;
        if slash.tok != Tok::Slash {
            return Err(PenmanError::UnexpectedToken {
                pos: slash.pos,
                expected: "/",
                found: describe(&slash.tok),
            });
        }
        let concept_tok = self.next("concept")?;
        let instance = match concept_tok.tok {
            Tok::Word(w) => w,
            Tok::Str(s) if !s.is_empty() && !s.chars().any(char::is_whitespace) => s,
            other => {
                return Err(PenmanError::UnexpectedToken {
                    pos: concept_tok.pos,
                    expected: "concept",
                    found: describe(&other),
                })
            }
        };
        if self.nodes.contains_key(&var) {
            return Err(PenmanError::DuplicateInstance {
                var,
                pos: var_tok.pos,
            });
        }
        self.def_pos.insert(var.clone(), var_tok.pos);
        self.nodes.insert(
            var.clone(),
            RawNode {
                var: var.clone(),
                instance,
                edges: Vec::new(),
            },
        );

        loop {
            let tok = self.next(")")?;
            match tok.tok {
                Tok::Close => break,
                Tok::Role(role) => {
                    let target = match self.peek() {
                        Some(Spanned { tok: Tok::Open, .. }) => RawTarget::Node(self.node()?),
                        Some(_) => {
                            let t = self.next("target")?;
                            match t.tok {
                                Tok::Str(s) => RawTarget::Str(s),
                                Tok::Word(w) => RawTarget::Bare(w, t.pos),
                                other => {
                                    return Err(PenmanError::UnexpectedToken {
                                        pos: t.pos,
                                        expected: "role target",
                                        found: describe(&other),
                                    })
                                }
                            }
                        }
                        None => {
                            return Err(PenmanError::UnbalancedParens {
                                pos: tok.pos,
                                detail: format!("role {role} has no target"),
                            })
                        }
                    };
                    self.nodes[&var].edges.push((role, target));
                }
                other => {
                    return Err(PenmanError::UnexpectedToken {
                        pos: tok.pos,
                        expected: "role or )",
                        found: describe(&other),
                    })
                }
            }
        }
        Ok(var)
    }
}

/// Variable ids: ASCII letters and digits, starting with a letter.
pub fn is_valid_var(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Shape of a bare token that can only be a variable reference: one
/// lowercase letter followed by optional digits (`f`, `c3`, `n12`).
fn looks_like_var_ref(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase()) && chars.all(|c| c.is_ascii_digit())
}

/// Parses a single PENMAN graph.
pub fn parse_penman(text: &str) -> Result<AmrGraph, PenmanError> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(PenmanError::EmptyInput);
    }
    let mut p = Parser {
        toks: &toks,
        i: 0,
        nodes: IndexMap::new(),
        def_pos: HashMap::new(),
    };
    let root = p.node()?;
    if let Some(extra) = p.peek() {
        let pos = extra.pos;
        return Err(match extra.tok {
            Tok::Close => PenmanError::UnbalancedParens {
                pos,
                detail: "unmatched `)`".into(),
            },
            ref other => PenmanError::UnexpectedToken {
                pos,
                expected: "end of graph",
                found: describe(other),
            },
        });
    }

    let defined: HashSet<String> = p.nodes.keys().cloned().collect();
    let mut nodes = IndexMap::with_capacity(p.nodes.len());
    for (var, raw) in p.nodes {
        let mut edges = Vec::with_capacity(raw.edges.len());
        for (role, target) in raw.edges {
            let target = match target {
                RawTarget::Node(v) => Target::Node(v),
                RawTarget::Str(s) => Target::Str(s),
                RawTarget::Bare(w, pos) => {
                    if defined.contains(&w) {
                        Target::Node(w)
                    } else if looks_like_var_ref(&w) {
                        return Err(PenmanError::DanglingVariable { var: w, pos });
                    } else {
                        Target::Symbol(w)
                    }
                }
            };
            edges.push(Edge { role, target });
        }
        nodes.insert(
            var,
            AmrNode {
                var: raw.var,
                instance: raw.instance,
                edges,
            },
        );
    }
    Ok(AmrGraph { root, nodes })
}

/// Splits text into PENMAN records separated by blank lines and parses each.
/// Comment lines do not separate records.
pub fn parse_penman_records(text: &str) -> Result<Vec<AmrGraph>, PenmanError> {
    let mut graphs = Vec::new();
    for (start_line, chunk) in records(text) {
        match parse_penman(&chunk) {
            Ok(g) => graphs.push(g),
            Err(PenmanError::EmptyInput) => continue,
            Err(e) => return Err(offset_error(e, start_line)),
        }
    }
    if graphs.is_empty() {
        return Err(PenmanError::EmptyInput);
    }
    Ok(graphs)
}

fn records(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !current.trim().is_empty() {
                out.push((start, std::mem::take(&mut current)));
            }
            current.clear();
            continue;
        }
        if current.is_empty() {
            start = idx;
        }
        current.push_str(line);
        current.push('\n');
    }
    if !current.trim().is_empty() {
        out.push((start, current));
    }
    out
}

fn offset_error(mut e: PenmanError, lines: usize) -> PenmanError {
    match &mut e {
        PenmanError::UnbalancedParens { pos, .. }
        | PenmanError::DuplicateInstance { pos, .. }
        | PenmanError::DanglingVariable { pos, .. }
        | PenmanError::UnexpectedToken { pos, .. }
        | PenmanError::InvalidVariable { pos, .. }
        | PenmanError::UnterminatedString { pos } => pos.line += lines,
        _ => {}
    }
    e
}

// ---------------------------------------------------------------------------
// Serializer

const INDENT: &str = "    ";

/// Linearizes a graph. The first mention of each variable in depth-first
/// edge order carries its instance; later mentions are bare references.
pub fn serialize_penman(graph: &AmrGraph) -> Result<String, PenmanError> {
    graph.validate()?;
    let reachable: HashSet<String> = graph.reachable_from(&graph.root).into_iter().collect();
    if let Some(var) = graph.nodes.keys().find(|v| !reachable.contains(*v)) {
        return Err(PenmanError::CyclicInstanceTree { var: var.clone() });
    }
    let mut out = String::new();
    let mut emitted = HashSet::new();
    write_node(graph, &graph.root, 0, &mut emitted, &mut out);
    Ok(out)
}

fn write_node(
    graph: &AmrGraph,
    var: &str,
    depth: usize,
    emitted: &mut HashSet<String>,
    out: &mut String,
) {
    let node = &graph.nodes[var];
    emitted.insert(var.to_string());
    let _ = write!(out, "({} / {}", node.var, node.instance);
    for edge in &node.edges {
        out.push('\n');
        for _ in 0..=depth {
            out.push_str(INDENT);
        }
        out.push_str(&edge.role);
        out.push(' ');
        match &edge.target {
            Target::Node(child) if !emitted.contains(child) => {
                write_node(graph, child, depth + 1, emitted, out)
            }
            Target::Node(child) => out.push_str(child),
            Target::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        out.push('\\');
                    }
                    out.push(c);
                }
                out.push('"');
            }
            Target::Symbol(s) => out.push_str(s),
        }
    }
    out.push(')');
}

// ---------------------------------------------------------------------------
// Sentence splitting

pub const MULTI_SENTENCE: &str = "multi-sentence";

fn snt_index(role: &str) -> Option<u32> {
    role.strip_prefix(":snt")?.parse().ok()
}

/// Splits a `multi-sentence` graph into one subgraph per `:sntN` child,
/// ordered by N. Any other graph comes back as a singleton.
pub fn split_sentences(graph: &AmrGraph) -> Vec<AmrGraph> {
    let root = graph.root_node();
    if root.instance != MULTI_SENTENCE {
        return vec![graph.clone()];
    }
    let mut sentences: Vec<(u32, usize, &str)> = root
        .children()
        .enumerate()
        .filter_map(|(pos, (role, var))| snt_index(role).map(|n| (n, pos, var)))
        .collect();
    sentences.sort_by_key(|&(n, pos, _)| (n, pos));

    sentences
        .into_iter()
        .map(|(_, _, var)| subgraph(graph, var))
        .collect()
}

fn subgraph(graph: &AmrGraph, root: &str) -> AmrGraph {
    let keep: HashSet<String> = graph.reachable_from(root).into_iter().collect();
    let nodes = graph
        .nodes
        .iter()
        .filter(|(v, _)| keep.contains(*v))
        .map(|(v, n)| (v.clone(), n.clone()))
        .collect();
    AmrGraph {
        root: root.to_string(),
        nodes,
    }
}

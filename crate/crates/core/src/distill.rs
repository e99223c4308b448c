//! Concept distillation from AMR graphs.
//!
//! Sentence subgraphs are walked depth-first; plain nodes contribute their
//! instance label, while entity nodes (`:name` / `:wiki`) and `date-entity`
//! nodes are collected in a pending role buffer that is flushed as whole
//! concepts before the next plain node and at the end of each sentence. The
//! raw sequence is then filtered and mapped back onto surface forms from the
//! source document.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::penman::{split_sentences, AmrGraph, AmrNode, Target};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistillError {
    #[error("MissingOps: name node `{var}` has no :op attributes")]
    MissingOps { var: String },
    #[error("MissingName: node `{var}` has no :name child")]
    MissingName { var: String },
    #[error("NeitherPresent: node `{var}` has neither a :name nor a :wiki link")]
    NeitherPresent { var: String },
    #[error("MonthOutOfRange: date node `{var}` has month {month}")]
    MonthOutOfRange { var: String, month: i64 },
    #[error("InvalidDateComponent: date node `{var}` has {role} `{value}`")]
    InvalidDateComponent {
        var: String,
        role: String,
        value: String,
    },
    #[error("invalid distill config: {0}")]
    Config(String),
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WikiPreference {
    #[default]
    PreferWiki,
    PreferName,
}

/// A name/wiki pair for which the surface name wins over the wiki title
/// even under [`WikiPreference::PreferWiki`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameCarveOut {
    pub name: String,
    pub wiki: String,
}

pub const DEFAULT_STOPLIST: &[&str] = &[
    "amr-empty",
    "multi-sentence",
    "name",
    "country",
    "city",
    "state",
    "organization",
    "league",
    "government-organization",
    "country-region",
    "person",
    "thing",
    "date-entity",
    "have-org-role-91",
    "have-rel-role-91",
    "cause-01",
];

pub const ENGLISH_MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    /// Instance labels dropped from the concept list.
    pub stoplist: BTreeSet<String>,
    /// Concepts present in more than this fraction of a document's sentences
    /// are dropped. `1.0` disables the filter.
    pub frequent_threshold: f64,
    pub wiki_preference: WikiPreference,
    pub name_carve_outs: Vec<NameCarveOut>,
    pub month_names: [String; 12],
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            stoplist: DEFAULT_STOPLIST.iter().map(|s| s.to_string()).collect(),
            frequent_threshold: 1.0,
            wiki_preference: WikiPreference::PreferWiki,
            name_carve_outs: vec![NameCarveOut {
                name: "America".into(),
                wiki: "United_States".into(),
            }],
            month_names: ENGLISH_MONTHS.map(String::from),
        }
    }
}

impl DistillConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, DistillError> {
        let config: DistillConfig =
            toml::from_str(text).map_err(|e| DistillError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, DistillError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DistillError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Replaces the stoplist with labels read one per line. Blank lines and
    /// `#` comments are ignored.
    pub fn with_stoplist_text(mut self, text: &str) -> Self {
        self.stoplist = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        self
    }

    pub fn validate(&self) -> Result<(), DistillError> {
        if !(self.frequent_threshold > 0.0 && self.frequent_threshold <= 1.0) {
            return Err(DistillError::Config(format!(
                "frequent_threshold must lie in (0, 1], got {}",
                self.frequent_threshold
            )));
        }
        if self.month_names.iter().any(|m| m.trim().is_empty()) {
            return Err(DistillError::Config("month names must be non-empty".into()));
        }
        Ok(())
    }

    fn carved_out(&self, name: &str, wiki: &str) -> bool {
        self.name_carve_outs
            .iter()
            .any(|c| c.name == name && deunderscore(&c.wiki) == wiki)
    }
}

// ---------------------------------------------------------------------------
// Role handling

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleKind {
    Name,
    Wiki,
    Date,
}

/// Pending role output: the `:op` stack of a name, a wiki title, or the
/// consolidated components of a date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleBuffer {
    pub kind: RoleKind,
    pub parts: Vec<String>,
}

impl RoleBuffer {
    pub fn render(&self) -> String {
        self.parts.join(" ")
    }
}

fn deunderscore(s: &str) -> String {
    s.replace('_', " ")
}

fn op_index(role: &str) -> Option<u32> {
    role.strip_prefix(":op")?.parse().ok()
}

fn name_buffer(name_node: &AmrNode) -> Result<RoleBuffer, DistillError> {
    let mut ops: Vec<(u32, &str)> = name_node
        .attrs()
        .filter_map(|(role, t)| Some((op_index(role)?, t.constant_text()?)))
        .collect();
    if ops.is_empty() {
        return Err(DistillError::MissingOps {
            var: name_node.var.clone(),
        });
    }
    ops.sort_by_key(|&(i, _)| i);
    Ok(RoleBuffer {
        kind: RoleKind::Name,
        parts: ops.into_iter().map(|(_, s)| s.to_string()).collect(),
    })
}

/// Joins the `:opN` constants of `node`'s `:name` child in index order.
pub fn handle_name(graph: &AmrGraph, node: &AmrNode) -> Result<String, DistillError> {
    let name_var = node.child(":name").ok_or_else(|| DistillError::MissingName {
        var: node.var.clone(),
    })?;
    let name_node = graph
        .node(name_var)
        .ok_or_else(|| DistillError::MissingName {
            var: node.var.clone(),
        })?;
    Ok(name_buffer(name_node)?.render())
}

/// Wiki title with underscores turned into spaces, or `None` for the
/// `:wiki -` convention and nodes without a link.
pub fn handle_wiki(node: &AmrNode) -> Option<String> {
    match node.attr(":wiki")? {
        Target::Symbol(s) if s == "-" => None,
        t => {
            let text = deunderscore(t.constant_text()?);
            let text = text.trim();
            (!text.is_empty()).then(|| text.to_string())
        }
    }
}

fn resolve_entity_role(
    graph: &AmrGraph,
    node: &AmrNode,
    config: &DistillConfig,
) -> Result<RoleBuffer, DistillError> {
    let name = match node.child(":name") {
        Some(_) => Some(handle_name(graph, node)?),
        None => None,
    };
    let wiki = handle_wiki(node);
    let wiki_buf = |w: String| RoleBuffer {
        kind: RoleKind::Wiki,
        parts: vec![w],
    };
    let name_buf = |n: String| RoleBuffer {
        kind: RoleKind::Name,
        parts: vec![n],
    };
    match (name, wiki) {
        (None, None) => Err(DistillError::NeitherPresent {
            var: node.var.clone(),
        }),
        (Some(n), None) => Ok(name_buf(n)),
        (None, Some(w)) => Ok(wiki_buf(w)),
        (Some(n), Some(w)) if n == w => Ok(name_buf(n)),
        (Some(n), Some(w)) => match config.wiki_preference {
            WikiPreference::PreferName => Ok(name_buf(n)),
            WikiPreference::PreferWiki if config.carved_out(&n, &w) => {
                log::info!(
                    "name/wiki conflict on `{}`: keeping name {n:?} over wiki {w:?} (carve-out)",
                    node.var
                );
                Ok(name_buf(n))
            }
            WikiPreference::PreferWiki => {
                log::debug!(
                    "name/wiki conflict on `{}`: {n:?} -> wiki {w:?}",
                    node.var
                );
                Ok(wiki_buf(w))
            }
        },
    }
}

/// Picks the concept text for an entity node from its name and wiki link.
pub fn resolve_entity(
    graph: &AmrGraph,
    node: &AmrNode,
    config: &DistillConfig,
) -> Result<String, DistillError> {
    resolve_entity_role(graph, node, config).map(|b| b.render())
}

fn date_component(node: &AmrNode, role: &str) -> Result<Option<i64>, DistillError> {
    let Some(t) = node.attr(role) else {
        return Ok(None);
    };
    let text = t.constant_text().unwrap_or_default();
    text.parse::<i64>()
        .map(Some)
        .map_err(|_| DistillError::InvalidDateComponent {
            var: node.var.clone(),
            role: role.to_string(),
            value: text.to_string(),
        })
}

/// Formats `:year`/`:month`/`:day` of a `date-entity` as
/// `"<Month> <day>, <year>"`, omitting absent parts. Returns `None` when the
/// node has none of the three.
pub fn handle_date(node: &AmrNode, config: &DistillConfig) -> Result<Option<String>, DistillError> {
    let year = date_component(node, ":year")?;
    let month = date_component(node, ":month")?;
    let day = date_component(node, ":day")?;

    let month = match month {
        Some(m) if (1..=12).contains(&m) => Some(config.month_names[(m - 1) as usize].clone()),
        Some(m) => {
            return Err(DistillError::MonthOutOfRange {
                var: node.var.clone(),
                month: m,
            })
        }
        None => None,
    };
    let mut parts = Vec::new();
    if let Some(m) = month {
        parts.push(m);
    }
    if let Some(d) = day {
        parts.push(d.to_string());
    }
    let mut out = parts.join(" ");
    if let Some(y) = year {
        if day.is_some() {
            out.push(',');
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&y.to_string());
    }
    Ok((!out.is_empty()).then_some(out))
}

// ---------------------------------------------------------------------------
// Traversal

/// Pre-order DFS from the root following each node's edges in source order.
/// Every variable is emitted once; repeated visits through re-entrant edges
/// are skipped.
pub fn dfs_order(graph: &AmrGraph) -> Vec<&AmrNode> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut stack = vec![graph.root.as_str()];
    while let Some(var) = stack.pop() {
        if !seen.insert(var) {
            continue;
        }
        let Some(node) = graph.node(var) else {
            continue;
        };
        out.push(node);
        let children: Vec<&str> = node.children().map(|(_, v)| v).collect();
        for child in children.into_iter().rev() {
            if !seen.contains(child) {
                stack.push(child);
            }
        }
    }
    out
}

pub const DATE_ENTITY: &str = "date-entity";

fn is_entity(node: &AmrNode) -> bool {
    node.child(":name").is_some() || handle_wiki(node).is_some()
}

/// Where a raw concept came from before formatting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RawKind {
    /// Instance label of a node.
    Instance,
    /// Resolved entity; `wiki` is set when the text is a wiki title.
    Entity { wiki: bool },
    Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawConcept {
    pub text: String,
    pub kind: RawKind,
    pub sentence: usize,
}

impl RawConcept {
    fn is_role(&self) -> bool {
        !matches!(self.kind, RawKind::Instance)
    }
}

/// Walks one sentence subgraph and appends raw concepts in emission order.
pub fn sentence_concepts(
    sentence: &AmrGraph,
    index: usize,
    config: &DistillConfig,
    out: &mut Vec<RawConcept>,
) -> Result<(), DistillError> {
    // name nodes are consumed by the entity that owns them
    let name_nodes: HashSet<&str> = sentence
        .nodes
        .values()
        .filter(|n| is_entity(n))
        .filter_map(|n| n.child(":name"))
        .collect();

    let mut pending: Vec<RawConcept> = Vec::new();
    let push = |out: &mut Vec<RawConcept>, text: &str, kind: RawKind| {
        out.push(RawConcept {
            text: text.to_string(),
            kind,
            sentence: index,
        })
    };

    for node in dfs_order(sentence) {
        if name_nodes.contains(node.var.as_str()) {
            push(out, &node.instance, RawKind::Instance);
        } else if is_entity(node) {
            let role = resolve_entity_role(sentence, node, config)?;
            push(out, &node.instance, RawKind::Instance);
            pending.push(RawConcept {
                text: role.render(),
                kind: RawKind::Entity {
                    wiki: role.kind == RoleKind::Wiki,
                },
                sentence: index,
            });
        } else if node.instance == DATE_ENTITY {
            push(out, &node.instance, RawKind::Instance);
            if let Some(date) = handle_date(node, config)? {
                pending.push(RawConcept {
                    text: date,
                    kind: RawKind::Date,
                    sentence: index,
                });
            }
        } else {
            out.append(&mut pending);
            push(out, &node.instance, RawKind::Instance);
        }
    }
    out.append(&mut pending);
    Ok(())
}

// ---------------------------------------------------------------------------
// Formatting

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn contains_phrase(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty()
        && needle.len() <= haystack.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Filters the raw sequence: stoplisted instance labels, concepts above the
/// sentence-frequency threshold, case-insensitive duplicates, and concepts
/// that occur as whole words inside another entity concept of the same
/// sentence.
pub fn concept_format(
    raw: Vec<RawConcept>,
    sentence_count: usize,
    config: &DistillConfig,
) -> Vec<RawConcept> {
    let mut kept: Vec<RawConcept> = raw
        .into_iter()
        .map(|mut c| {
            c.text = c.text.trim().to_string();
            c
        })
        .filter(|c| !c.text.is_empty())
        .filter(|c| c.is_role() || !config.stoplist.contains(&c.text))
        .collect();

    if config.frequent_threshold < 1.0 && sentence_count > 1 {
        let mut sentences_of: HashMap<String, HashSet<usize>> = HashMap::new();
        for c in &kept {
            sentences_of
                .entry(c.text.to_lowercase())
                .or_default()
                .insert(c.sentence);
        }
        kept.retain(|c| {
            let share = sentences_of[&c.text.to_lowercase()].len() as f64 / sentence_count as f64;
            share <= config.frequent_threshold
        });
    }

    let mut seen = HashSet::new();
    kept.retain(|c| seen.insert(c.text.to_lowercase()));

    let tokens: Vec<Vec<String>> = kept.iter().map(|c| words(&c.text)).collect();
    let keep: Vec<bool> = (0..kept.len())
        .map(|i| {
            !(0..kept.len()).any(|j| {
                j != i
                    && kept[j].sentence == kept[i].sentence
                    && kept[j].is_role()
                    && tokens[j].len() > tokens[i].len()
                    && contains_phrase(&tokens[j], &tokens[i])
            })
        })
        .collect();
    kept.into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

// ---------------------------------------------------------------------------
// Backtrace

/// Category of a final concept, recorded for audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptOrigin {
    /// A word or phrase of the source text.
    Source,
    /// A de-underscored wiki title not found in the source.
    Wiki,
    /// A formatted date not found in the source.
    Date,
    /// An instance lemma with no match in the source.
    Lemma,
}

/// Minimum shared prefix for mapping a lemma onto an inflected source word.
pub const MIN_PREFIX: usize = 4;

/// Word spans of a source document.
pub struct SourceIndex<'a> {
    text: &'a str,
    spans: Vec<(usize, usize)>,
    lower: Vec<String>,
}

impl<'a> SourceIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_alphanumeric(), start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    spans.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push((s, text.len()));
        }
        let lower = spans.iter().map(|&(s, e)| text[s..e].to_lowercase()).collect();
        SourceIndex { text, spans, lower }
    }

    fn surface(&self, first: usize, last: usize) -> &'a str {
        &self.text[self.spans[first].0..self.spans[last].1]
    }

    fn find_phrase(&self, needle: &[String]) -> Option<&'a str> {
        if needle.is_empty() || needle.len() > self.lower.len() {
            return None;
        }
        (0..=self.lower.len() - needle.len())
            .find(|&i| self.lower[i..i + needle.len()] == *needle)
            .map(|i| self.surface(i, i + needle.len() - 1))
    }

    fn best_prefix(&self, lemma: &str) -> Option<&'a str> {
        let lemma: Vec<char> = lemma.chars().collect();
        let mut best: Option<(usize, usize)> = None;
        for (i, w) in self.lower.iter().enumerate() {
            let shared = w.chars().zip(&lemma).take_while(|(a, b)| a == *b).count();
            if shared >= MIN_PREFIX && best.is_none_or(|(_, n)| shared > n) {
                best = Some((i, shared));
            }
        }
        best.map(|(i, _)| self.surface(i, i))
    }
}

/// Drops a trailing `-NN` sense suffix (`base-01` -> `base`).
pub fn strip_sense(concept: &str) -> &str {
    let b = concept.as_bytes();
    if b.len() > 3
        && b[b.len() - 3] == b'-'
        && b[b.len() - 2].is_ascii_digit()
        && b[b.len() - 1].is_ascii_digit()
    {
        &concept[..concept.len() - 3]
    } else {
        concept
    }
}

/// Maps one concept onto its surface form in the source. Returns the text
/// and whether a match was found.
pub fn backtrace_concept(concept: &str, source: &SourceIndex<'_>) -> (String, bool) {
    let lemma = strip_sense(concept);
    let toks = words(lemma);
    if toks.len() != 1 {
        return match source.find_phrase(&toks) {
            Some(s) => (s.to_string(), true),
            None => (lemma.to_string(), false),
        };
    }
    if let Some(s) = source.find_phrase(&toks) {
        return (s.to_string(), true);
    }
    match source.best_prefix(&lemma.to_lowercase()) {
        Some(s) => (s.to_string(), true),
        None => (lemma.to_string(), false),
    }
}

/// Ordered, de-duplicated concepts distilled from one document.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConceptList {
    pub concepts: Vec<String>,
    /// Concept index range contributed by each sentence subgraph.
    pub per_sentence: Vec<Range<usize>>,
    pub origins: Vec<ConceptOrigin>,
}

impl ConceptList {
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn from_concepts<I, S>(concepts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let concepts: Vec<String> = concepts.into_iter().map(Into::into).collect();
        let n = concepts.len();
        ConceptList {
            origins: vec![ConceptOrigin::Source; n],
            per_sentence: if n == 0 { Vec::new() } else { std::iter::once(0..n).collect() },
            concepts,
        }
    }
}

/// Maps formatted concepts back onto the source document's wording.
pub fn backtrace(formatted: &[RawConcept], sentence_count: usize, source: &str) -> ConceptList {
    let index = SourceIndex::new(source);
    let mut concepts = Vec::new();
    let mut origins = Vec::new();
    let mut sentences = Vec::new();
    let mut seen = HashSet::new();
    for raw in formatted {
        let (text, matched) = backtrace_concept(&raw.text, &index);
        let text = text.replace('_', " ").trim().to_string();
        if text.is_empty() || !seen.insert(text.to_lowercase()) {
            continue;
        }
        let origin = match (matched, &raw.kind) {
            (true, _) => ConceptOrigin::Source,
            (false, RawKind::Entity { wiki: true }) => ConceptOrigin::Wiki,
            (false, RawKind::Date) => ConceptOrigin::Date,
            (false, _) => ConceptOrigin::Lemma,
        };
        concepts.push(text);
        origins.push(origin);
        sentences.push(raw.sentence);
    }
    let per_sentence = (0..sentence_count)
        .map(|s| {
            let start = sentences.iter().take_while(|&&x| x < s).count();
            let end = sentences.iter().take_while(|&&x| x <= s).count();
            start..end
        })
        .collect();
    ConceptList {
        concepts,
        per_sentence,
        origins,
    }
}

/// Distills the concept list of one document from its AMR graph.
pub fn distill(
    graph: &AmrGraph,
    source: &str,
    config: &DistillConfig,
) -> Result<ConceptList, DistillError> {
    distill_graphs(std::slice::from_ref(graph), source, config)
}

/// Like [`distill`] for documents parsed into several graphs; their
/// sentences are processed in sequence.
pub fn distill_graphs(
    graphs: &[AmrGraph],
    source: &str,
    config: &DistillConfig,
) -> Result<ConceptList, DistillError> {
    let sentences: Vec<AmrGraph> = graphs.iter().flat_map(split_sentences).collect();
    let mut raw = Vec::new();
    for (i, snt) in sentences.iter().enumerate() {
        sentence_concepts(snt, i, config, &mut raw)?;
    }
    let formatted = concept_format(raw, sentences.len(), config);
    Ok(backtrace(&formatted, sentences.len(), source))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penman::parse_penman;

    fn node_with_date(attrs: &str) -> AmrNode {
        let g = parse_penman(&format!("(d / date-entity {attrs})")).unwrap();
        g.root_node().clone()
    }

    #[test]
    fn names_join_in_op_order() {
        let g = parse_penman(r#"(o / organization :name (n / name :op2 "Dynamo" :op1 "Houston"))"#)
            .unwrap();
        assert_eq!(handle_name(&g, g.root_node()).unwrap(), "Houston Dynamo");
        let g = parse_penman(r#"(s / state :name (n / name :op1 "Texas"))"#).unwrap();
        assert_eq!(handle_name(&g, g.root_node()).unwrap(), "Texas");
    }

    #[test]
    fn name_without_ops() {
        let g = parse_penman("(o / organization :name (n / name))").unwrap();
        assert_eq!(
            handle_name(&g, g.root_node()),
            Err(DistillError::MissingOps { var: "n".into() })
        );
    }

    #[test]
    fn wiki_titles() {
        let g = parse_penman(r#"(o / organization :wiki "Houston_Dynamo")"#).unwrap();
        assert_eq!(handle_wiki(g.root_node()).as_deref(), Some("Houston Dynamo"));
        let g = parse_penman(r#"(o / league :wiki "Major_League_Soccer")"#).unwrap();
        assert_eq!(handle_wiki(g.root_node()).as_deref(), Some("Major League Soccer"));
        let g = parse_penman("(o / organization :wiki -)").unwrap();
        assert_eq!(handle_wiki(g.root_node()), None);
    }

    #[test]
    fn entity_resolution() {
        let cfg = DistillConfig::default();
        let g = parse_penman(
            r#"(o / organization :wiki "Houston_Dynamo" :name (n / name :op1 "Houston" :op2 "Dynamo"))"#,
        )
        .unwrap();
        assert_eq!(resolve_entity(&g, g.root_node(), &cfg).unwrap(), "Houston Dynamo");

        let conflict =
            parse_penman(r#"(c / country :wiki "United_States" :name (n / name :op1 "America"))"#)
                .unwrap();
        let no_carve = DistillConfig {
            name_carve_outs: vec![],
            ..DistillConfig::default()
        };
        assert_eq!(
            resolve_entity(&conflict, conflict.root_node(), &no_carve).unwrap(),
            "United States"
        );
        assert_eq!(
            resolve_entity(&conflict, conflict.root_node(), &cfg).unwrap(),
            "America"
        );
        let prefer_name = DistillConfig {
            wiki_preference: WikiPreference::PreferName,
            name_carve_outs: vec![],
            ..DistillConfig::default()
        };
        assert_eq!(
            resolve_entity(&conflict, conflict.root_node(), &prefer_name).unwrap(),
            "America"
        );

        let g = parse_penman(r#"(s / state :wiki - :name (n / name :op1 "Texas"))"#).unwrap();
        assert_eq!(resolve_entity(&g, g.root_node(), &cfg).unwrap(), "Texas");

        let g = parse_penman("(s / state :wiki -)").unwrap();
        assert_eq!(
            resolve_entity(&g, g.root_node(), &cfg),
            Err(DistillError::NeitherPresent { var: "s".into() })
        );
    }

    #[test]
    fn dates() {
        let cfg = DistillConfig::default();
        let fmt = |a: &str| handle_date(&node_with_date(a), &cfg);
        assert_eq!(
            fmt(":year 2006 :month 6 :day 9").unwrap().as_deref(),
            Some("June 9, 2006")
        );
        assert_eq!(fmt(":year 1999").unwrap().as_deref(), Some("1999"));
        assert_eq!(
            fmt(":month 12 :year 2020").unwrap().as_deref(),
            Some("December 2020")
        );
        assert_eq!(fmt(":day 9 :month 6").unwrap().as_deref(), Some("June 9"));
        assert_eq!(fmt(":weekday (m / monday)").unwrap(), None);
        assert_eq!(
            fmt(":month 13"),
            Err(DistillError::MonthOutOfRange {
                var: "d".into(),
                month: 13
            })
        );
        assert!(matches!(
            fmt(r#":year "soon""#),
            Err(DistillError::InvalidDateComponent { .. })
        ));
    }

    #[test]
    fn sense_suffix() {
        assert_eq!(strip_sense("base-01"), "base");
        assert_eq!(strip_sense("have-org-role-91"), "have-org-role");
        assert_eq!(strip_sense("club"), "club");
        assert_eq!(strip_sense("-01"), "-01");
    }

    #[test]
    fn backtrace_surface_forms() {
        let src = "Houston Dynamo are an American professional soccer club based in Houston, Texas. \
                   The franchise competes in Major League Soccer (MLS).";
        let idx = SourceIndex::new(src);
        assert_eq!(backtrace_concept("base-01", &idx), ("based".into(), true));
        assert_eq!(backtrace_concept("compete-01", &idx), ("competes".into(), true));
        assert_eq!(backtrace_concept("America", &idx), ("American".into(), true));
        assert_eq!(backtrace_concept("major league soccer", &idx), ("Major League Soccer".into(), true));
        assert_eq!(backtrace_concept("United States", &idx), ("United States".into(), false));
        assert_eq!(backtrace_concept("win-01", &idx), ("win".into(), false));
    }

    #[test]
    fn format_filters() {
        let cfg = DistillConfig::default();
        let raw = |text: &str, kind: RawKind| RawConcept {
            text: text.into(),
            kind,
            sentence: 0,
        };
        let out = concept_format(
            vec![
                raw("country", RawKind::Instance),
                raw("Houston", RawKind::Entity { wiki: false }),
                raw("Texas", RawKind::Entity { wiki: false }),
                raw("Houston Dynamo", RawKind::Entity { wiki: false }),
                raw("texas", RawKind::Instance),
                raw("member", RawKind::Instance),
            ],
            1,
            &cfg,
        );
        let texts: Vec<_> = out.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, ["Texas", "Houston Dynamo", "member"]);

        let all_stop = concept_format(
            vec![raw("name", RawKind::Instance), raw("thing", RawKind::Instance)],
            1,
            &cfg,
        );
        assert!(all_stop.is_empty());
    }

    #[test]
    fn frequency_threshold() {
        let cfg = DistillConfig {
            frequent_threshold: 0.5,
            ..DistillConfig::default()
        };
        let mk = |t: &str, s| RawConcept {
            text: t.into(),
            kind: RawKind::Instance,
            sentence: s,
        };
        let out = concept_format(
            vec![mk("boy", 0), mk("run", 0), mk("boy", 1), mk("dog", 1)],
            2,
            &cfg,
        );
        let texts: Vec<_> = out.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, ["run", "dog"]);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = DistillConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(DistillConfig::from_toml_str(&text).unwrap(), cfg);
        assert!(DistillConfig::from_toml_str("frequent_threshold = 0.0").is_err());
        let partial = DistillConfig::from_toml_str("wiki_preference = \"prefer-name\"").unwrap();
        assert_eq!(partial.wiki_preference, WikiPreference::PreferName);
        assert_eq!(partial.stoplist, cfg.stoplist);
    }

    #[test]
    fn stoplist_text_override() {
        let cfg = DistillConfig::default().with_stoplist_text("# labels\nname\n\n member \n");
        assert_eq!(cfg.stoplist.len(), 2);
        assert!(cfg.stoplist.contains("member"));
    }

    #[test]
    fn empty_graph_distills_to_nothing() {
        let g = parse_penman("(a / amr-empty)").unwrap();
        let out = distill(&g, "anything", &DistillConfig::default()).unwrap();
        assert!(out.is_empty());
    }
}

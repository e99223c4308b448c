//! Seeded generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use cocr_core::penman::{AmrGraph, AmrNode, Edge, Target};
use cocr_core::pipeline::{QuestionRecord, SupportingDocument};
use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const INSTANCES: &[&str] = &[
    "want-01", "boy", "go-02", "city", "and", "big", "thing", "see-01", "river", "person",
    "have-org-role-91", "name", "possible-01", "amr-unknown",
];
const NODE_ROLES: &[&str] = &[
    ":ARG0", ":ARG1", ":ARG2", ":mod", ":location", ":time", ":op1", ":ARG0-of", ":poss",
];
const ATTR_ROLES: &[&str] = &[":polarity", ":quant", ":value", ":wiki", ":mode", ":op2"];
const SYMBOLS: &[&str] = &["-", "+", "42", "3.5", "imperative", "expressive", "1990"];
const STRINGS: &[&str] = &[
    "Houston",
    "two words",
    "a \"quoted\" word",
    "back\\slash",
    "(paren)",
    "",
];

fn add_attrs(rng: &mut ChaCha8Rng, node: &mut AmrNode) {
    for _ in 0..rng.gen_range(0..=2) {
        let role = ATTR_ROLES.choose(rng).unwrap().to_string();
        let target = if rng.gen_bool(0.5) {
            Target::Symbol(SYMBOLS.choose(rng).unwrap().to_string())
        } else {
            Target::Str(STRINGS.choose(rng).unwrap().to_string())
        };
        node.edges.push(Edge { role, target });
    }
}

/// A random rooted graph with at most `max_nodes` nodes and at most
/// `max_reentrancies` extra edges onto already-attached nodes.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize, max_reentrancies: usize) -> AmrGraph {
    let n = rng.gen_range(1..=max_nodes);
    let vars: Vec<String> = (0..n)
        .map(|i| format!("{}{}", (b'a' + rng.gen_range(0..26u8)) as char, i))
        .collect();
    let mut nodes: Vec<AmrNode> = vars
        .iter()
        .map(|v| AmrNode::new(v.clone(), *INSTANCES.choose(rng).unwrap()))
        .collect();
    for node in nodes.iter_mut() {
        add_attrs(rng, node);
    }
    for (i, var) in vars.iter().enumerate().skip(1) {
        let parent = rng.gen_range(0..i);
        let role = NODE_ROLES.choose(rng).unwrap().to_string();
        let at = rng.gen_range(0..=nodes[parent].edges.len());
        nodes[parent].edges.insert(
            at,
            Edge {
                role,
                target: Target::Node(var.clone()),
            },
        );
    }
    if n > 1 {
        for _ in 0..rng.gen_range(0..=max_reentrancies) {
            let from = rng.gen_range(0..n);
            let to = rng.gen_range(1..n);
            if from == to {
                continue;
            }
            let role = NODE_ROLES.choose(rng).unwrap().to_string();
            let at = rng.gen_range(0..=nodes[from].edges.len());
            nodes[from].edges.insert(
                at,
                Edge {
                    role,
                    target: Target::Node(vars[to].clone()),
                },
            );
        }
    }
    AmrGraph {
        root: vars[0].clone(),
        nodes: nodes.into_iter().map(|nd| (nd.var.clone(), nd)).collect(),
    }
}

const LEMMAS: &[&str] = &[
    "dog", "run-01", "big", "house", "see-01", "river", "old", "happy", "walk-01", "stadium",
    "player", "win-01", "bridge", "music",
];
const NAMES: &[&[&str]] = &[
    &["Ada", "Lovelace"],
    &["Nevada"],
    &["Rio", "Grande"],
    &["Toronto"],
    &["Blue", "Jays"],
    &["Lake", "Tahoe"],
];
const ENTITY_TYPES: &[&str] = &["person", "city", "organization", "river", "team"];

struct DocBuilder {
    nodes: IndexMap<String, AmrNode>,
    words: Vec<String>,
    next: usize,
}

impl DocBuilder {
    fn var(&mut self, prefix: char) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn push(&mut self, node: AmrNode) -> String {
        let v = node.var.clone();
        self.nodes.insert(v.clone(), node);
        v
    }

    fn link(&mut self, parent: &str, role: &str, child: &str) {
        self.nodes[parent].edges.push(Edge {
            role: role.into(),
            target: Target::Node(child.into()),
        });
    }

    fn plain(&mut self, rng: &mut ChaCha8Rng) -> String {
        let lemma = *LEMMAS.choose(rng).unwrap();
        let v = self.var('x');
        self.words
            .push(lemma.split('-').next().unwrap().to_string());
        self.push(AmrNode::new(v, lemma))
    }

    fn entity(&mut self, rng: &mut ChaCha8Rng) -> String {
        let ty = *ENTITY_TYPES.choose(rng).unwrap();
        let parts = *NAMES.choose(rng).unwrap();
        let e = self.var('e');
        let nm = self.var('n');
        let mut entity = AmrNode::new(e.clone(), ty);
        if rng.gen_bool(0.3) {
            entity.edges.push(Edge {
                role: ":wiki".into(),
                target: Target::Str(parts.join("_")),
            });
        }
        self.push(entity);
        let mut name = AmrNode::new(nm.clone(), "name");
        for (i, p) in parts.iter().enumerate() {
            name.edges.push(Edge {
                role: format!(":op{}", i + 1),
                target: Target::Str(p.to_string()),
            });
        }
        self.push(name);
        self.link(&e, ":name", &nm);
        self.words.push(parts.join(" "));
        e
    }

    fn date(&mut self, rng: &mut ChaCha8Rng) -> String {
        let d = self.var('d');
        let mut node = AmrNode::new(d.clone(), "date-entity");
        let month = rng.gen_range(1..=12);
        let day = rng.gen_range(1..=28);
        let year = rng.gen_range(1900..=2020);
        for (role, v) in [(":month", month), (":day", day), (":year", year)] {
            node.edges.push(Edge {
                role: role.into(),
                target: Target::Symbol(v.to_string()),
            });
        }
        self.words.push(format!("{day} {year}"));
        self.push(node)
    }

    fn sentence(&mut self, rng: &mut ChaCha8Rng) -> String {
        let root = self.plain(rng);
        let mut attached = vec![root.clone()];
        for _ in 0..rng.gen_range(0..=5) {
            let parent = attached.choose(rng).unwrap().clone();
            let role = *NODE_ROLES[..6].choose(rng).unwrap();
            let child = match rng.gen_range(0..6) {
                0 | 1 => self.entity(rng),
                2 => self.date(rng),
                _ => {
                    let c = self.plain(rng);
                    attached.push(c.clone());
                    c
                }
            };
            self.link(&parent, role, &child);
        }
        root
    }
}

/// A random distillable document: its graph (possibly multi-sentence) and a
/// source text mentioning its words.
pub fn random_document(rng: &mut ChaCha8Rng) -> (AmrGraph, String) {
    let mut b = DocBuilder {
        nodes: IndexMap::new(),
        words: Vec::new(),
        next: 0,
    };
    let sentences = rng.gen_range(1..=3);
    let root = if sentences == 1 {
        b.sentence(rng)
    } else {
        let m = b.push(AmrNode::new("m", "multi-sentence"));
        for i in 1..=sentences {
            let s = b.sentence(rng);
            b.link(&m, &format!(":snt{i}"), &s);
        }
        m
    };
    let source = format!("{}.", b.words.join(" "));
    (AmrGraph { root, nodes: b.nodes }, source)
}

pub const ANSWERS: &[&str] = &[
    "Nevada", "Toronto", "Lisbon", "Nairobi", "Oslo", "Quito", "Hanoi", "Dakar", "Perth", "Bergen",
];

/// One supporting document whose distilled concepts contain `answer`.
pub fn answer_document(answer: &str, filler: &str) -> SupportingDocument {
    SupportingDocument {
        text: format!("The {filler} club is based in {answer}."),
        amr: Some(format!(
            "(b / base-01\n    :ARG1 (c / club\n        :mod (f / {filler}))\n    :location (s / state\n        :name (n / name\n            :op1 \"{answer}\")))"
        )),
    }
}

const FILLERS: &[&str] = &["soccer", "chess", "rowing", "jazz", "cricket", "hockey"];

/// `n` question records cycling K through 1..=8.
pub fn synthetic_dataset(n: usize) -> Vec<QuestionRecord> {
    (0..n)
        .map(|i| {
            let answer = ANSWERS[i % ANSWERS.len()];
            let k = i % 8 + 1;
            QuestionRecord {
                id: format!("q{i:03}"),
                question: format!("Where is club {i} based?"),
                answers: vec![answer.to_string()],
                docs: (0..k)
                    .map(|j| answer_document(answer, FILLERS[(i + j) % FILLERS.len()]))
                    .collect(),
            }
        })
        .collect()
}

pub fn dataset_jsonl(records: &[QuestionRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect()
}

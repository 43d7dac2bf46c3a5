//! Seeded synthetic data: random SBN graphs, corpora with controlled
//! near-duplicate clusters, and a small grammar corpus whose documents carry
//! aligned CCG derivations and SBN.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Document;
use crate::sbn::{parse_sbn, SbnGraph};

const HEADS: &[&str] = &[
    "person.n.01",
    "dog.n.01",
    "cat.n.01",
    "see.v.01",
    "have.v.01",
    "time.n.08",
    "big.a.01",
    "quickly.r.01",
];
const ROLES: &[&str] = &["Agent", "Patient", "Theme", "Time", "AttributeOf"];
const CONSTANTS: &[(&str, &str)] = &[
    ("Name", "\"Ann\""),
    ("Name", "\"Bob\""),
    ("TPR", "now"),
    ("EQU", "speaker"),
];

#[derive(Debug, Clone, PartialEq)]
enum SpecTarget {
    Node(usize),
    Const(String),
}

/// Node list with absolute edge targets, rendered to SBN text on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    heads: Vec<String>,
    edges: Vec<Vec<(String, SpecTarget)>>,
    /// Position of the single `NEGATION` line, if any.
    relation: Option<usize>,
}

impl GraphSpec {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_vars: usize) -> Self {
        assert!(max_vars >= 2, "a graph needs a node and its box");
        let with_relation = max_vars >= 4 && rng.gen_bool(0.3);
        let n = if with_relation {
            rng.gen_range(2..=max_vars - 2)
        } else {
            rng.gen_range(1..=max_vars - 1)
        };
        let relation = with_relation.then(|| rng.gen_range(1..n));
        let mut spec = GraphSpec {
            heads: Vec::with_capacity(n),
            edges: vec![Vec::new(); n],
            relation,
        };
        for i in 0..n {
            if Some(i) == relation {
                spec.heads.push("NEGATION".into());
                continue;
            }
            spec.heads.push(HEADS.choose(rng).expect("non-empty").to_string());
        }
        for i in 0..n {
            if Some(i) != relation {
                for _ in 0..rng.gen_range(0..=2) {
                    spec.add_random_edge(rng, i);
                }
            }
        }
        spec
    }

    fn add_random_edge<R: Rng + ?Sized>(&mut self, rng: &mut R, i: usize) {
        let n = self.heads.len();
        let others: Vec<usize> = (0..n).filter(|&j| j != i && Some(j) != self.relation).collect();
        if !others.is_empty() && rng.gen_bool(0.7) {
            let j = *others.choose(rng).expect("non-empty");
            let role = ROLES.choose(rng).expect("non-empty").to_string();
            self.edges[i].push((role, SpecTarget::Node(j)));
        } else {
            let (label, value) = CONSTANTS.choose(rng).expect("non-empty");
            self.edges[i].push((label.to_string(), SpecTarget::Const(value.to_string())));
        }
    }

    /// A nearby graph: a node-order shuffle (when no box structure depends on
    /// the order) followed by a few head, edge and constant edits.
    pub fn mutate<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut out = self.clone();
        let n = out.heads.len();
        if out.relation.is_none() && n > 1 && rng.gen_bool(0.5) {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            // perm[new] = old
            let mut inverse = vec![0; n];
            for (new, &old) in perm.iter().enumerate() {
                inverse[old] = new;
            }
            out.heads = perm.iter().map(|&o| self.heads[o].clone()).collect();
            out.edges = perm
                .iter()
                .map(|&o| {
                    self.edges[o]
                        .iter()
                        .map(|(l, t)| {
                            let t = match t {
                                SpecTarget::Node(j) => SpecTarget::Node(inverse[*j]),
                                c => c.clone(),
                            };
                            (l.clone(), t)
                        })
                        .collect()
                })
                .collect();
        }
        for _ in 0..rng.gen_range(0..=2) {
            let i = rng.gen_range(0..n);
            if Some(i) == out.relation {
                continue;
            }
            match rng.gen_range(0..3) {
                0 => out.heads[i] = HEADS.choose(rng).expect("non-empty").to_string(),
                1 if !out.edges[i].is_empty() => {
                    let k = rng.gen_range(0..out.edges[i].len());
                    out.edges[i].remove(k);
                }
                _ => out.add_random_edge(rng, i),
            }
        }
        out
    }

    pub fn to_sbn_text(&self) -> String {
        let mut lines = Vec::with_capacity(self.heads.len());
        for (i, head) in self.heads.iter().enumerate() {
            if Some(i) == self.relation {
                lines.push(format!("{head} <1"));
                continue;
            }
            let mut line = head.clone();
            for (label, target) in &self.edges[i] {
                let t = match target {
                    SpecTarget::Node(j) => format!("{:+}", *j as i64 - i as i64),
                    SpecTarget::Const(c) => c.clone(),
                };
                line.push_str(&format!(" {label} {t}"));
            }
            lines.push(line);
        }
        lines.join("\n")
    }

    pub fn to_graph(&self) -> SbnGraph {
        parse_sbn(&self.to_sbn_text()).expect("generated SBN is well formed")
    }
}

/// A random well-formed graph with at most `max_vars` node and box variables.
pub fn random_sbn<R: Rng + ?Sized>(rng: &mut R, max_vars: usize) -> SbnGraph {
    GraphSpec::random(rng, max_vars).to_graph()
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pa", "do", "gu", "be", "fi", "ho",
];

fn pseudo_word<R: Rng + ?Sized>(rng: &mut R) -> String {
    (0..rng.gen_range(1..=3))
        .map(|_| *SYLLABLES.choose(rng).expect("non-empty"))
        .collect()
}

fn document(id: String, tokens: Vec<String>) -> Document {
    let text = tokens.join(" ");
    Document::new(id, text, tokens)
}

/// `n_docs` documents of which `clusters` groups are near-duplicates of a shared
/// base sentence (one token edited or the final punctuation changed). The rest
/// are unrelated sentences. Document order is shuffled.
pub fn near_duplicate_corpus<R: Rng + ?Sized>(rng: &mut R, n_docs: usize, clusters: usize) -> Vec<Document> {
    let vocab: Vec<String> = (0..3000).map(|_| pseudo_word(rng)).collect();
    let sentence = |rng: &mut R| -> Vec<String> {
        let len = rng.gen_range(4..=12);
        let mut t: Vec<String> = (0..len).map(|_| vocab.choose(rng).expect("vocab").clone()).collect();
        t.push(if rng.gen_bool(0.8) { "." } else { "?" }.to_string());
        t
    };
    let mut token_lists: Vec<Vec<String>> = Vec::with_capacity(n_docs);
    let per_cluster = (n_docs / 2).checked_div(clusters).map_or(0, |k| k.max(2));
    for _ in 0..clusters {
        if token_lists.len() >= n_docs {
            break;
        }
        let base = sentence(rng);
        for k in 0..per_cluster {
            if token_lists.len() >= n_docs {
                break;
            }
            let mut variant = base.clone();
            if k > 0 {
                let last = variant.len() - 1;
                if rng.gen_bool(0.5) {
                    variant[last] = ["!", ".", "?", "..."].choose(rng).expect("non-empty").to_string();
                } else {
                    let i = rng.gen_range(0..last);
                    variant[i] = vocab.choose(rng).expect("vocab").clone();
                }
            }
            token_lists.push(variant);
        }
    }
    while token_lists.len() < n_docs {
        token_lists.push(sentence(rng));
    }
    token_lists.shuffle(rng);
    token_lists
        .into_iter()
        .enumerate()
        .map(|(i, t)| document(format!("doc{i:05}"), t))
        .collect()
}

/// Documents with random texts only, for split invariants.
pub fn random_corpus<R: Rng + ?Sized>(rng: &mut R, n_docs: usize) -> Vec<Document> {
    (0..n_docs)
        .map(|i| {
            let len = rng.gen_range(1..=10);
            document(format!("r{i:05}"), (0..len).map(|_| pseudo_word(rng)).collect())
        })
        .collect()
}

const NOUNS: &[&str] = &[
    "dog", "cat", "boy", "girl", "teacher", "house", "car", "book", "bird", "farmer", "song", "river",
];
const NAMES: &[&str] = &["Mary", "Tom", "Anna", "Bill", "Russia", "Cuba"];
const ADJECTIVES: &[&str] = &["big", "small", "red", "old", "strong", "new", "short", "bad"];
const ADVERBS: &[&str] = &["very", "rather"];
const DETERMINERS: &[&str] = &["the", "a", "every", "my"];
const TRANSITIVE: &[(&str, &str)] = &[
    ("sees", "see.v.01"),
    ("likes", "like.v.01"),
    ("has", "have.v.01"),
    ("fears", "fear.v.01"),
    ("wants", "want.v.01"),
    ("follows", "follow.v.01"),
];
const INTRANSITIVE: &[(&str, &str)] = &[("sleeps", "sleep.v.01"), ("runs", "run.v.01"), ("sings", "sing.v.01")];

/// A phrase under construction: its derivation with alignments relative to the
/// phrase's own SBN nodes.
struct Phrase {
    tree: String,
    tokens: Vec<String>,
    /// SBN lines; `{+k}` placeholders are fixed once absolute positions are known.
    nodes: Vec<(String, Vec<(String, i64)>)>,
    head: usize,
}

fn leaf(cat: &str, tok: &str, sem: Option<(usize, usize)>) -> String {
    let quoted = serde_json::to_string(tok).expect("string");
    match sem {
        Some((a, b)) => format!("({cat} {quoted} {a}:{b})"),
        None => format!("({cat} {quoted})"),
    }
}

/// Grammar noun phrase starting at SBN position `base`.
fn noun_phrase<R: Rng + ?Sized>(rng: &mut R, base: usize) -> Phrase {
    if rng.gen_bool(0.25) {
        let name = *NAMES.choose(rng).expect("non-empty");
        return Phrase {
            tree: leaf("NP", name, Some((base, base + 1))),
            tokens: vec![name.to_string()],
            nodes: vec![(
                format!("person.n.01 Name {}", serde_json::to_string(name).expect("string")),
                vec![],
            )],
            head: 0,
        };
    }
    let noun = *NOUNS.choose(rng).expect("non-empty");
    let det = *DETERMINERS.choose(rng).expect("non-empty");
    let mut nodes = vec![(format!("{noun}.n.01"), vec![])];
    let mut n_tree = leaf("N", noun, Some((base, base + 1)));
    let mut n_tokens = vec![noun.to_string()];
    let adjectives = match rng.gen_range(0..10) {
        0..=5 => 0,
        6..=8 => 1,
        _ => 2,
    };
    for _ in 0..adjectives {
        let adj = *ADJECTIVES.choose(rng).expect("non-empty");
        let adj_pos = nodes.len();
        nodes.push((format!("{adj}.a.01"), vec![("AttributeOf".into(), -(adj_pos as i64))]));
        let mut mod_tree = leaf("N/N", adj, Some((base + adj_pos, base + adj_pos + 1)));
        let mut mod_tokens = vec![adj.to_string()];
        if rng.gen_bool(0.2) {
            let adv = *ADVERBS.choose(rng).expect("non-empty");
            let adv_pos = nodes.len();
            nodes.push((format!("{adv}.r.01"), vec![("AttributeOf".into(), -1)]));
            mod_tree = format!(
                "(fa N/N {} {mod_tree})",
                leaf("(N/N)/(N/N)", adv, Some((base + adv_pos, base + adv_pos + 1)))
            );
            mod_tokens.insert(0, adv.to_string());
        }
        n_tree = format!("(fa N {mod_tree} {n_tree})");
        mod_tokens.extend(n_tokens);
        n_tokens = mod_tokens;
    }
    let mut tokens = vec![det.to_string()];
    tokens.extend(n_tokens);
    Phrase {
        tree: format!("(fa NP {} {n_tree})", leaf("NP/N", det, None)),
        tokens,
        nodes,
        head: 0,
    }
}

/// One grammar sentence as a document with aligned `ccg` and `sbn` layers.
pub fn grammar_document<R: Rng + ?Sized>(rng: &mut R, id: String) -> Document {
    let subject = noun_phrase(rng, 0);
    let verb_pos = subject.nodes.len();
    let transitive = rng.gen_bool(0.65);
    let (verb_tok, verb_sense) = if transitive {
        *TRANSITIVE.choose(rng).expect("non-empty")
    } else {
        *INTRANSITIVE.choose(rng).expect("non-empty")
    };
    let object = transitive.then(|| noun_phrase(rng, verb_pos + 2));

    let mut lines: Vec<String> = Vec::new();
    let render = |nodes: &[(String, Vec<(String, i64)>)]| -> Vec<String> {
        nodes
            .iter()
            .map(|(head, edges)| {
                let mut l = head.clone();
                for (label, off) in edges {
                    l.push_str(&format!(" {label} {off:+}"));
                }
                l
            })
            .collect()
    };
    lines.extend(render(&subject.nodes));
    let agent = subject.head as i64 - verb_pos as i64;
    let role = if transitive { "Experiencer" } else { "Agent" };
    let mut verb_line = format!("{verb_sense} {role} {agent:+} Time +1");
    if let Some(obj) = &object {
        verb_line.push_str(&format!(" Stimulus {:+}", 2 + obj.head as i64));
    }
    lines.push(verb_line);
    lines.push("time.n.08 EQU now".into());
    if let Some(obj) = &object {
        lines.extend(render(&obj.nodes));
    }

    let verb_sem = Some((verb_pos, verb_pos + 2));
    let vp = match &object {
        Some(obj) => format!("(fa S\\NP {} {})", leaf("(S\\NP)/NP", verb_tok, verb_sem), obj.tree),
        None => leaf("S\\NP", verb_tok, verb_sem),
    };
    let tree = format!("(ba S (ba S {} {vp}) {})", subject.tree, leaf("S\\S", ".", None));

    let mut tokens = subject.tokens.clone();
    tokens.push(verb_tok.to_string());
    if let Some(obj) = &object {
        tokens.extend(obj.tokens.iter().cloned());
    }
    tokens.push(".".into());
    let mut words = tokens[..tokens.len() - 1].join(" ");
    words.push('.');
    let mut chars = words.chars();
    let text = match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => words,
    };
    // Keep the token layer consistent with the capitalized text.
    let first = tokens[0].clone();
    let mut first_chars = first.chars();
    if let Some(c) = first_chars.next() {
        tokens[0] = c.to_uppercase().collect::<String>() + first_chars.as_str();
    }
    let tree = tree.replacen(&format!("\"{first}\""), &format!("\"{}\"", tokens[0]), 1);

    let mut doc = Document::new(id, text, tokens);
    doc.sbn = Some(lines.join("\n"));
    doc.ccg = Some(tree);
    doc
}

pub fn grammar_corpus<R: Rng + ?Sized>(rng: &mut R, n_docs: usize) -> Vec<Document> {
    (0..n_docs).map(|i| grammar_document(rng, format!("g{i:05}"))).collect()
}

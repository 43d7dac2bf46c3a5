//! Sequence Box Notation: a variable-free serialization of discourse representation
//! structures where each line is a node, roles point at other nodes through signed
//! relative indices, and discourse relations open new boxes.
//!
//! ```text
//! female.n.02 Name "Mary"
//! call.v.03 Agent -1 Time +1 Co-Agent +2
//! time.n.08 TPR now
//! person.n.01 Sub speaker
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SbnError {
    #[error("ill-formed SBN at line {line}: {reason}")]
    IllFormed { line: usize, reason: String },
}

impl SbnError {
    fn at(line: usize, reason: impl Into<String>) -> Self {
        SbnError::IllFormed {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
}

impl Pos {
    fn from_char(c: &str) -> Option<Pos> {
        match c {
            "n" => Some(Pos::Noun),
            "v" => Some(Pos::Verb),
            "a" => Some(Pos::Adjective),
            "r" => Some(Pos::Adverb),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pos::Noun => 'n',
            Pos::Verb => 'v',
            Pos::Adjective => 'a',
            Pos::Adverb => 'r',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SbnHead {
    Synset {
        lemma: String,
        pos: Pos,
        sense: u8,
    },
    /// Discourse relation such as `NEGATION` or `CONTINUATION`; opens a new box.
    Relation(String),
}

impl SbnHead {
    pub fn is_relation(&self) -> bool {
        matches!(self, SbnHead::Relation(_))
    }

    fn parse(token: &str) -> Option<SbnHead> {
        if is_relation_name(token) {
            return Some(SbnHead::Relation(token.to_string()));
        }
        let mut parts = token.rsplitn(3, '.');
        let sense = parts.next()?;
        let pos = parts.next()?;
        let lemma = parts.next()?;
        if lemma.is_empty() || lemma.contains('"') {
            return None;
        }
        if sense.len() != 2 || !sense.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        Some(SbnHead::Synset {
            lemma: lemma.to_string(),
            pos: Pos::from_char(pos)?,
            sense: sense.parse().ok()?,
        })
    }
}

impl fmt::Display for SbnHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SbnHead::Synset { lemma, pos, sense } => {
                write!(f, "{lemma}.{}.{sense:02}", pos.as_char())
            }
            SbnHead::Relation(name) => f.write_str(name),
        }
    }
}

fn is_relation_name(token: &str) -> bool {
    token.len() >= 2
        && token.starts_with(|c: char| c.is_ascii_uppercase())
        && token.chars().all(|c| c.is_ascii_uppercase() || c == '_' || c == '-')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `<N`: N boxes back.
    Back,
    /// `>N`: N boxes forward.
    Forward,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    /// Signed, non-zero relative node index.
    Node(i64),
    Box {
        direction: Direction,
        magnitude: u32,
    },
    /// Literal kept in its written form, quotes included for quoted strings.
    Constant(String),
}

impl Target {
    fn parse(token: &str) -> Option<Target> {
        let first = token.chars().next()?;
        let rest = &token[first.len_utf8()..];
        let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        match first {
            '+' | '-' if all_digits(rest) => {
                let magnitude: i64 = rest.parse().ok()?;
                Some(Target::Node(if first == '-' { -magnitude } else { magnitude }))
            }
            '<' | '>' if all_digits(rest) => Some(Target::Box {
                direction: if first == '<' {
                    Direction::Back
                } else {
                    Direction::Forward
                },
                magnitude: rest.parse().ok()?,
            }),
            '"' if token.len() >= 2 && token.ends_with('"') => Some(Target::Constant(token.to_string())),
            _ if matches!(token, "now" | "speaker" | "hearer") => Some(Target::Constant(token.to_string())),
            _ if is_numeral(token) => Some(Target::Constant(token.to_string())),
            _ => None,
        }
    }
}

fn is_numeral(token: &str) -> bool {
    let mut parts = token.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node(off) if *off > 0 => write!(f, "+{off}"),
            Target::Node(off) => write!(f, "{off}"),
            Target::Box { direction, magnitude } => {
                let sym = match direction {
                    Direction::Back => '<',
                    Direction::Forward => '>',
                };
                write!(f, "{sym}{magnitude}")
            }
            Target::Constant(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SbnEdge {
    pub label: String,
    pub target: Target,
}

impl SbnEdge {
    pub fn new(label: impl Into<String>, target: Target) -> Self {
        SbnEdge {
            label: label.into(),
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SbnNode {
    pub head: SbnHead,
    pub edges: Vec<SbnEdge>,
}

impl SbnNode {
    pub fn new(head: SbnHead, edges: Vec<SbnEdge>) -> Self {
        SbnNode { head, edges }
    }

    /// Box edges written without a label on a relation line (`NEGATION <1`).
    fn is_bare_box_edge(&self, edge: &SbnEdge) -> bool {
        match (&self.head, &edge.target) {
            (SbnHead::Relation(name), Target::Box { .. }) => *name == edge.label,
            _ => false,
        }
    }
}

impl fmt::Display for SbnNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for edge in &self.edges {
            if self.is_bare_box_edge(edge) {
                write!(f, " {}", edge.target)?;
            } else {
                write!(f, " {} {}", edge.label, edge.target)?;
            }
        }
        Ok(())
    }
}

/// A validated SBN graph. Node order is significant; boxes are derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbnGraph {
    nodes: Vec<SbnNode>,
    contexts: Vec<usize>,
    context_count: usize,
}

/// What an edge points at once offsets are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resolved<'a> {
    Node(usize),
    Context(usize),
    Constant(&'a str),
}

fn derive_contexts(nodes: &[SbnNode]) -> (Vec<usize>, usize) {
    let mut current = 0;
    let mut count = 1;
    let contexts = nodes
        .iter()
        .map(|n| {
            if n.head.is_relation() {
                current = count;
                count += 1;
            }
            current
        })
        .collect();
    (contexts, count)
}

fn resolve_in<'a>(contexts: &[usize], context_count: usize, node: usize, target: &'a Target) -> Option<Resolved<'a>> {
    match target {
        Target::Node(off) => {
            if *off == 0 {
                return None;
            }
            let idx = node as i64 + off;
            (0..contexts.len() as i64)
                .contains(&idx)
                .then_some(Resolved::Node(idx as usize))
        }
        Target::Box { direction, magnitude } => {
            let ctx = contexts[node] as i64;
            let idx = match direction {
                Direction::Back => ctx - *magnitude as i64,
                Direction::Forward => ctx + *magnitude as i64,
            };
            (0..context_count as i64)
                .contains(&idx)
                .then_some(Resolved::Context(idx as usize))
        }
        Target::Constant(c) => Some(Resolved::Constant(c)),
    }
}

impl SbnGraph {
    /// Builds a graph from nodes, checking that every offset resolves.
    /// Reported line numbers are 1-based node positions.
    pub fn from_nodes(nodes: Vec<SbnNode>) -> Result<Self, SbnError> {
        if nodes.is_empty() {
            return Err(SbnError::at(0, "no nodes"));
        }
        let (contexts, context_count) = derive_contexts(&nodes);
        for (i, node) in nodes.iter().enumerate() {
            for edge in &node.edges {
                if resolve_in(&contexts, context_count, i, &edge.target).is_none() {
                    return Err(SbnError::at(
                        i + 1,
                        format!("`{} {}` does not resolve", edge.label, edge.target),
                    ));
                }
            }
        }
        Ok(SbnGraph {
            nodes,
            contexts,
            context_count,
        })
    }

    pub fn nodes(&self) -> &[SbnNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn context_count(&self) -> usize {
        self.context_count
    }

    /// Innermost box of node `i`.
    pub fn context_of(&self, i: usize) -> usize {
        self.contexts[i]
    }

    pub fn resolve<'a>(&self, node: usize, target: &'a Target) -> Resolved<'a> {
        resolve_in(&self.contexts, self.context_count, node, target).expect("validated graph resolves every edge")
    }

    pub fn into_nodes(self) -> Vec<SbnNode> {
        self.nodes
    }
}

impl fmt::Display for SbnGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, node) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{node}")?;
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '%' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn lex_line(line: &str, line_no: usize) -> Result<Vec<&str>, SbnError> {
    let mut tokens = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let mut in_quote = false;
        while i < bytes.len() && (in_quote || !bytes[i].is_ascii_whitespace()) {
            if bytes[i] == b'"' {
                in_quote = !in_quote;
            }
            i += 1;
        }
        if in_quote {
            return Err(SbnError::at(line_no, "unterminated quoted constant"));
        }
        tokens.push(&line[start..i]);
    }
    Ok(tokens)
}

fn parse_node(tokens: &[&str], line_no: usize) -> Result<SbnNode, SbnError> {
    let head = SbnHead::parse(tokens[0])
        .ok_or_else(|| SbnError::at(line_no, format!("`{}` is not a legal head", tokens[0])))?;
    let mut edges = Vec::new();
    let mut rest = tokens[1..].iter();
    while let Some(&tok) = rest.next() {
        if let Some(target) = Target::parse(tok) {
            match (&head, &target) {
                (SbnHead::Relation(name), Target::Box { .. }) => {
                    edges.push(SbnEdge::new(name.clone(), target));
                    continue;
                }
                _ => return Err(SbnError::at(line_no, format!("target `{tok}` without a role label"))),
            }
        }
        let target_tok = rest
            .next()
            .ok_or_else(|| SbnError::at(line_no, format!("`{tok}` lacks a target")))?;
        let target = Target::parse(target_tok)
            .ok_or_else(|| SbnError::at(line_no, format!("`{target_tok}` is not a legal target for `{tok}`")))?;
        edges.push(SbnEdge::new(tok, target));
    }
    Ok(SbnNode { head, edges })
}

/// Parses SBN text. Any input is accepted; failures are reported as [`SbnError::IllFormed`].
pub fn parse_sbn(source: &str) -> Result<SbnGraph, SbnError> {
    let mut nodes = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = lex_line(strip_comment(raw), line_no)?;
        if tokens.is_empty() {
            continue;
        }
        nodes.push(parse_node(&tokens, line_no)?);
        lines.push(line_no);
    }
    SbnGraph::from_nodes(nodes).map_err(|e| match e {
        // report source lines rather than node positions
        SbnError::IllFormed { line, reason } if line > 0 => SbnError::IllFormed {
            line: lines[line - 1],
            reason,
        },
        other => other,
    })
}

/// Canonical text: one node per line, single spaces, no comments, LF separators.
pub fn serialize_sbn(graph: &SbnGraph) -> String {
    graph.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Variable {
    Node(usize),
    Box(usize),
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Node(i) => write!(f, "n{i}"),
            Variable::Box(i) => write!(f, "b{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TripleTarget {
    Var(usize),
    Const(String),
}

/// `source` and `Var` targets index into [`TripleSet::variables`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Triple {
    pub source: usize,
    pub relation: String,
    pub target: TripleTarget,
}

pub const INSTANCE: &str = ":instance";
pub const MEMBER: &str = ":member";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TripleSet {
    pub variables: Vec<Variable>,
    pub triples: Vec<Triple>,
}

impl TripleSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn count_relation(&self, relation: &str) -> usize {
        self.triples.iter().filter(|t| t.relation == relation).count()
    }

    /// Triples with variables replaced by their printed names, sorted.
    pub fn named(&self) -> Vec<(String, String, String)> {
        let name = |v: usize| self.variables[v].to_string();
        let mut out: Vec<_> = self
            .triples
            .iter()
            .map(|t| {
                let target = match &t.target {
                    TripleTarget::Var(v) => name(*v),
                    TripleTarget::Const(c) => c.clone(),
                };
                (name(t.source), t.relation.clone(), target)
            })
            .collect();
        out.sort();
        out
    }
}

/// Expands a graph into instance, role and box-membership triples.
///
/// Nodes become `n<i>` variables and boxes `b<k>`. Box edges leaving a discourse
/// relation line connect that line's box to the target box, so `NEGATION <1`
/// becomes `(b1, NEGATION, b0)`.
pub fn to_triples(graph: &SbnGraph) -> TripleSet {
    let mut raw: Vec<(Variable, String, Result<Variable, String>)> = Vec::new();
    for (i, node) in graph.nodes.iter().enumerate() {
        let var = Variable::Node(i);
        let ctx = Variable::Box(graph.context_of(i));
        raw.push((var, INSTANCE.into(), Err(node.head.to_string())));
        raw.push((ctx, MEMBER.into(), Ok(var)));
        for edge in &node.edges {
            let target = match graph.resolve(i, &edge.target) {
                Resolved::Node(j) => Ok(Variable::Node(j)),
                Resolved::Context(k) => Ok(Variable::Box(k)),
                Resolved::Constant(c) => Err(c.to_string()),
            };
            let source = match (&node.head, &edge.target) {
                (SbnHead::Relation(_), Target::Box { .. }) => ctx,
                _ => var,
            };
            raw.push((source, edge.label.clone(), target));
        }
    }

    let variables: Vec<Variable> = raw
        .iter()
        .flat_map(|(s, _, t)| std::iter::once(*s).chain(t.as_ref().ok().copied()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index = |v: &Variable| variables.binary_search(v).expect("collected above");
    let triples: BTreeSet<Triple> = raw
        .into_iter()
        .map(|(s, relation, t)| Triple {
            source: index(&s),
            relation,
            target: match t {
                Ok(v) => TripleTarget::Var(index(&v)),
                Err(c) => TripleTarget::Const(c),
            },
        })
        .collect();
    TripleSet {
        variables,
        triples: triples.into_iter().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpliceMode {
    Replace,
    Insert,
}

/// An edge from a fragment node to a node of the host graph, given by its
/// pre-splice index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub from: usize,
    pub label: String,
    pub host_target: usize,
}

/// Nodes to splice into a host. Internal node offsets must resolve inside the
/// fragment; anything pointing into the host goes through `boundary`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SbnFragment {
    pub nodes: Vec<SbnNode>,
    /// Node that host edges rebind to when the replaced span has a different length.
    pub head: Option<usize>,
    pub boundary: Vec<BoundaryEdge>,
}

impl SbnFragment {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_graph(graph: SbnGraph) -> Self {
        let head = graph.len().checked_sub(1);
        SbnFragment {
            nodes: graph.into_nodes(),
            head,
            boundary: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn validate(&self) -> Result<(), SpliceError> {
        let n = self.nodes.len() as i64;
        for (i, node) in self.nodes.iter().enumerate() {
            if node.head.is_relation() {
                return Err(SpliceError::ContextBoundary);
            }
            for edge in &node.edges {
                if let Target::Node(off) = edge.target {
                    let t = i as i64 + off;
                    if off == 0 || t < 0 || t >= n {
                        return Err(SpliceError::InvalidFragment(format!(
                            "node {i}: `{} {}` leaves the fragment",
                            edge.label, edge.target
                        )));
                    }
                }
            }
        }
        if matches!(self.head, Some(h) if h >= self.nodes.len()) {
            return Err(SpliceError::InvalidFragment("head out of range".into()));
        }
        if let Some(b) = self.boundary.iter().find(|b| b.from >= self.nodes.len()) {
            return Err(SpliceError::InvalidFragment(format!(
                "boundary edge `{}` from missing node {}",
                b.label, b.from
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpliceError {
    #[error("span {start}..{end} is not valid for a host of {len} nodes in {mode:?} mode")]
    InvalidSpan {
        start: usize,
        end: usize,
        len: usize,
        mode: SpliceMode,
    },
    #[error("discourse relations cannot be spliced")]
    ContextBoundary,
    #[error("edge `{label}` from node {from} enters the replaced span")]
    CrossingEdge { from: usize, label: String },
    #[error("invalid fragment: {0}")]
    InvalidFragment(String),
    #[error(transparent)]
    Sbn(#[from] SbnError),
}

/// Splices `fragment` into `host` at `span`.
///
/// `Replace` removes the span and puts the fragment in its place; `Insert` needs an
/// empty span and inserts before `span.start`. Host edges that do not touch the span
/// are rebased so they reach the same nodes. Host edges into a replaced span rebind
/// positionally when span and fragment have equal length, otherwise to the
/// fragment head when they all target a single span node. Outward edges of
/// replaced nodes carry over positionally when the lengths match and are dropped
/// otherwise.
pub fn splice_sbn(
    host: &SbnGraph,
    span: Range<usize>,
    fragment: &SbnFragment,
    mode: SpliceMode,
) -> Result<SbnGraph, SpliceError> {
    let n = host.len();
    let bad_span = || SpliceError::InvalidSpan {
        start: span.start,
        end: span.end,
        len: n,
        mode,
    };
    if span.start > span.end || span.end > n || (mode == SpliceMode::Insert && !span.is_empty()) {
        return Err(bad_span());
    }
    fragment.validate()?;
    if host.nodes[span.clone()].iter().any(|x| x.head.is_relation()) {
        return Err(SpliceError::ContextBoundary);
    }

    let (start, end) = (span.start, span.end);
    let removed = end - start;
    let added = fragment.len();
    let in_span = |i: usize| (start..end).contains(&i);
    let relocate = |i: usize| -> usize {
        if i < start {
            i
        } else {
            debug_assert!(i >= end);
            i - removed + added
        }
    };

    // Single span node targeted from outside, if any, for head rebinding.
    let incoming: BTreeSet<usize> = host
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_span(*i))
        .flat_map(|(i, node)| {
            node.edges.iter().filter_map(move |e| match host.resolve(i, &e.target) {
                Resolved::Node(t) if in_span(t) => Some(t),
                _ => None,
            })
        })
        .collect();
    let rebind = |t: usize| -> Option<usize> {
        if removed == added {
            Some(start + (t - start))
        } else if incoming.len() == 1 {
            fragment.head.map(|h| start + h)
        } else {
            None
        }
    };

    let offset = |from: usize, to: usize| Target::Node(to as i64 - from as i64);
    let mut nodes = Vec::with_capacity(n - removed + added);

    let rebase_host = |i: usize, node: &SbnNode| -> Result<SbnNode, SpliceError> {
        let new_i = relocate(i);
        let mut edges = Vec::with_capacity(node.edges.len());
        for e in &node.edges {
            let target = match host.resolve(i, &e.target) {
                Resolved::Node(t) if in_span(t) => {
                    let to = rebind(t).ok_or_else(|| SpliceError::CrossingEdge {
                        from: i,
                        label: e.label.clone(),
                    })?;
                    offset(new_i, to)
                }
                Resolved::Node(t) => offset(new_i, relocate(t)),
                _ => e.target.clone(),
            };
            edges.push(SbnEdge::new(e.label.clone(), target));
        }
        Ok(SbnNode::new(node.head.clone(), edges))
    };

    for (i, node) in host.nodes[..start].iter().enumerate() {
        nodes.push(rebase_host(i, node)?);
    }
    for (j, node) in fragment.nodes.iter().enumerate() {
        let new_j = start + j;
        let mut node = node.clone();
        for b in fragment.boundary.iter().filter(|b| b.from == j) {
            if b.host_target >= n || in_span(b.host_target) {
                return Err(SpliceError::CrossingEdge {
                    from: b.host_target,
                    label: b.label.clone(),
                });
            }
            node.edges
                .push(SbnEdge::new(b.label.clone(), offset(new_j, relocate(b.host_target))));
        }
        if removed == added {
            let host_i = start + j;
            for e in &host.nodes[host_i].edges {
                match (host.resolve(host_i, &e.target), &e.target) {
                    (Resolved::Node(t), _) if !in_span(t) => node
                        .edges
                        .push(SbnEdge::new(e.label.clone(), offset(new_j, relocate(t)))),
                    (Resolved::Context(_), Target::Box { .. }) => node.edges.push(e.clone()),
                    _ => {}
                }
            }
        }
        nodes.push(node);
    }
    for (i, node) in host.nodes.iter().enumerate().skip(end) {
        nodes.push(rebase_host(i, node)?);
    }
    Ok(SbnGraph::from_nodes(nodes)?)
}

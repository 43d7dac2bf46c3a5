//! CCG categories, derivation trees, and the subtree catalog used for recombination.
//!
//! Trees are stored as bracketed s-expressions:
//!
//! ```text
//! (ba S (NP "I") (fa S\NP ((S\NP)/NP "have") (fa NP (NP/N "a") (N "dog"))))
//! ```
//!
//! `fa`/`ba` nodes are forward/backward application and are type-checked; `gen`
//! nodes (binary or unary) carry any other combinator and are accepted as given.
//! A leaf may end with a half-open `start:end` span aligning it to the nodes of
//! the document's SBN.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at byte {position} of `{input}`")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
    pub input: String,
}

fn syntax(input: &str, position: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        position,
        message: message.into(),
        input: input.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slash {
    /// `/`: looks for its argument to the right.
    Forward,
    /// `\`: looks for its argument to the left.
    Backward,
}

impl Slash {
    fn symbol(self) -> char {
        match self {
            Slash::Forward => '/',
            Slash::Backward => '\\',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CcgCategory {
    Atomic(String),
    Functional {
        result: Box<CcgCategory>,
        slash: Slash,
        argument: Box<CcgCategory>,
    },
}

impl CcgCategory {
    pub fn atomic(name: &str) -> Self {
        CcgCategory::Atomic(name.to_string())
    }

    pub fn functional(result: CcgCategory, slash: Slash, argument: CcgCategory) -> Self {
        CcgCategory::Functional {
            result: Box::new(result),
            slash,
            argument: Box::new(argument),
        }
    }

    pub fn is_functional(&self) -> bool {
        matches!(self, CcgCategory::Functional { .. })
    }
}

impl fmt::Display for CcgCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn part(c: &CcgCategory, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if c.is_functional() {
                write!(f, "({c})")
            } else {
                write!(f, "{c}")
            }
        }
        match self {
            CcgCategory::Atomic(name) => f.write_str(name),
            CcgCategory::Functional {
                result,
                slash,
                argument,
            } => {
                part(result, f)?;
                write!(f, "{}", slash.symbol())?;
                part(argument, f)
            }
        }
    }
}

struct CategoryParser<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> CategoryParser<'a> {
    fn peek(&self) -> Option<char> {
        self.input[self.pos..].chars().next()
    }

    fn err(&self, message: &str) -> SyntaxError {
        syntax(self.input, self.pos, message)
    }

    fn category(&mut self) -> Result<CcgCategory, SyntaxError> {
        let mut cat = self.primary()?;
        while let Some(c) = self.peek() {
            let slash = match c {
                '/' => Slash::Forward,
                '\\' => Slash::Backward,
                _ => break,
            };
            self.pos += 1;
            let argument = self.primary()?;
            cat = CcgCategory::functional(cat, slash, argument);
        }
        Ok(cat)
    }

    fn primary(&mut self) -> Result<CcgCategory, SyntaxError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.category()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(_) => {
                let start = self.pos;
                let mut depth = 0usize;
                while let Some(c) = self.peek() {
                    match c {
                        '[' => depth += 1,
                        ']' if depth > 0 => depth -= 1,
                        '/' | '\\' | '(' | ')' if depth == 0 => break,
                        c if c.is_whitespace() => break,
                        _ => {}
                    }
                    self.pos += c.len_utf8();
                }
                if self.pos == start {
                    return Err(self.err("expected a category"));
                }
                Ok(CcgCategory::Atomic(self.input[start..self.pos].to_string()))
            }
            None => Err(self.err("unexpected end of category")),
        }
    }
}

/// Parses a category; slashes associate to the left, so `S\NP/NP` is `(S\NP)/NP`.
pub fn parse_category(s: &str) -> Result<CcgCategory, SyntaxError> {
    let mut p = CategoryParser { input: s, pos: 0 };
    let cat = p.category()?;
    if p.pos != s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(cat)
}

impl FromStr for CcgCategory {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_category(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    ForwardApp,
    BackwardApp,
    /// Combinator outside forward/backward application, kept as the corpus gives it.
    Given,
}

impl Rule {
    fn keyword(self) -> &'static str {
        match self {
            Rule::ForwardApp => "fa",
            Rule::BackwardApp => "ba",
            Rule::Given => "gen",
        }
    }

    fn from_keyword(s: &str) -> Option<Rule> {
        match s {
            "fa" => Some(Rule::ForwardApp),
            "ba" => Some(Rule::BackwardApp),
            "gen" => Some(Rule::Given),
            _ => None,
        }
    }
}

/// `(X/Y) Y => X` and `Y (X\Y) => X`.
pub fn check_application(left: &CcgCategory, right: &CcgCategory) -> Option<(CcgCategory, Rule)> {
    if let CcgCategory::Functional {
        result,
        slash: Slash::Forward,
        argument,
    } = left
    {
        if **argument == *right {
            return Some(((**result).clone(), Rule::ForwardApp));
        }
    }
    if let CcgCategory::Functional {
        result,
        slash: Slash::Backward,
        argument,
    } = right
    {
        if **argument == *left {
            return Some(((**result).clone(), Rule::BackwardApp));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CcgTree {
    Leaf {
        category: CcgCategory,
        token: String,
        /// Aligned node span in the owning document's SBN, if known.
        sem: Option<Range<usize>>,
    },
    /// Type-changing step, always [`Rule::Given`].
    Unary { category: CcgCategory, child: Box<CcgTree> },
    Binary {
        category: CcgCategory,
        rule: Rule,
        left: Box<CcgTree>,
        right: Box<CcgTree>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

/// Position of a node: the sequence of child choices from the root. The only
/// child of a unary node is `Left`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodePath(pub Vec<Side>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn child(&self, side: Side) -> Self {
        let mut v = self.0.clone();
        v.push(side);
        NodePath(v)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// True when one path is a prefix of the other (ancestor, descendant or equal).
    pub fn overlaps(&self, other: &NodePath) -> bool {
        let n = self.0.len().min(other.0.len());
        self.0[..n] == other.0[..n]
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("^");
        }
        for s in &self.0 {
            f.write_str(match s {
                Side::Left => "L",
                Side::Right => "R",
            })?;
        }
        Ok(())
    }
}

impl CcgTree {
    pub fn leaf(category: CcgCategory, token: &str) -> Self {
        CcgTree::Leaf {
            category,
            token: token.to_string(),
            sem: None,
        }
    }

    pub fn binary(category: CcgCategory, rule: Rule, left: CcgTree, right: CcgTree) -> Self {
        CcgTree::Binary {
            category,
            rule,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn category(&self) -> &CcgCategory {
        match self {
            CcgTree::Leaf { category, .. } | CcgTree::Unary { category, .. } | CcgTree::Binary { category, .. } => {
                category
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, CcgTree::Leaf { .. })
    }

    pub fn children(&self) -> Vec<(Side, &CcgTree)> {
        match self {
            CcgTree::Leaf { .. } => vec![],
            CcgTree::Unary { child, .. } => vec![(Side::Left, child)],
            CcgTree::Binary { left, right, .. } => vec![(Side::Left, left), (Side::Right, right)],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|(_, c)| c.node_count()).sum::<usize>()
    }

    /// Leaves in order.
    pub fn leaves(&self) -> Vec<&CcgTree> {
        let mut out = Vec::new();
        self.walk_leaves(&mut out);
        out
    }

    fn walk_leaves<'a>(&'a self, out: &mut Vec<&'a CcgTree>) {
        match self {
            CcgTree::Leaf { .. } => out.push(self),
            _ => self.children().into_iter().for_each(|(_, c)| c.walk_leaves(out)),
        }
    }

    /// The in-order token sequence.
    pub fn tokens(&self) -> Vec<&str> {
        self.leaves()
            .into_iter()
            .map(|l| match l {
                CcgTree::Leaf { token, .. } => token.as_str(),
                _ => unreachable!(),
            })
            .collect()
    }

    pub fn get(&self, path: &NodePath) -> Option<&CcgTree> {
        let mut node = self;
        for side in &path.0 {
            node = match (node, side) {
                (CcgTree::Unary { child, .. }, Side::Left) => child,
                (CcgTree::Binary { left, .. }, Side::Left) => left,
                (CcgTree::Binary { right, .. }, Side::Right) => right,
                _ => return None,
            };
        }
        Some(node)
    }

    pub fn get_mut(&mut self, path: &NodePath) -> Option<&mut CcgTree> {
        let mut node = self;
        for side in &path.0 {
            node = match (node, side) {
                (CcgTree::Unary { child, .. }, Side::Left) => child,
                (CcgTree::Binary { left, .. }, Side::Left) => left,
                (CcgTree::Binary { right, .. }, Side::Right) => right,
                _ => return None,
            };
        }
        Some(node)
    }

    /// Every node with its path, pre-order.
    pub fn nodes(&self) -> Vec<(NodePath, &CcgTree)> {
        let mut out = Vec::new();
        let mut stack = vec![(NodePath::root(), self)];
        while let Some((path, node)) = stack.pop() {
            for (side, child) in node.children().into_iter().rev() {
                stack.push((path.child(side), child));
            }
            out.push((path, node));
        }
        out
    }

    /// Token range covered by the node at `path`.
    pub fn yield_span(&self, path: &NodePath) -> Option<Range<usize>> {
        let target = self.get(path)?;
        let mut start = 0;
        let mut node = self;
        for side in &path.0 {
            if let (CcgTree::Binary { left, right, .. }, Side::Right) = (node, side) {
                start += left.leaves().len();
                node = right;
            } else {
                node = node.get(&NodePath(vec![*side]))?;
            }
        }
        Some(start..start + target.leaves().len())
    }

    /// Same tree with every leaf alignment removed.
    pub fn without_sem(&self) -> CcgTree {
        match self {
            CcgTree::Leaf { category, token, .. } => CcgTree::Leaf {
                category: category.clone(),
                token: token.clone(),
                sem: None,
            },
            CcgTree::Unary { category, child } => CcgTree::Unary {
                category: category.clone(),
                child: Box::new(child.without_sem()),
            },
            CcgTree::Binary {
                category,
                rule,
                left,
                right,
            } => CcgTree::binary(category.clone(), *rule, left.without_sem(), right.without_sem()),
        }
    }

    /// Canonical s-expression without alignments; equal keys mean equal structure.
    pub fn shape_key(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s, false);
        s
    }

    fn write_sexpr(&self, out: &mut String, with_sem: bool) {
        use std::fmt::Write;
        match self {
            CcgTree::Leaf { category, token, sem } => {
                let quoted = serde_json::to_string(token).expect("string serialization");
                let _ = write!(out, "({category} {quoted}");
                if let (true, Some(span)) = (with_sem, sem) {
                    let _ = write!(out, " {}:{}", span.start, span.end);
                }
                out.push(')');
            }
            CcgTree::Unary { category, child } => {
                let _ = write!(out, "(gen {category} ");
                child.write_sexpr(out, with_sem);
                out.push(')');
            }
            CcgTree::Binary {
                category,
                rule,
                left,
                right,
            } => {
                let _ = write!(out, "({} {category} ", rule.keyword());
                left.write_sexpr(out, with_sem);
                out.push(' ');
                right.write_sexpr(out, with_sem);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for CcgTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_sexpr(&mut s, true);
        f.write_str(&s)
    }
}

struct TreeParser<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> TreeParser<'a> {
    fn err(&self, message: &str) -> SyntaxError {
        syntax(self.input, self.pos, message)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.input[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.input[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), SyntaxError> {
        self.skip_ws();
        if self.peek() != Some(c) {
            return Err(self.err(&format!("expected `{c}`")));
        }
        self.pos += 1;
        Ok(())
    }

    /// A bare atom; parentheses inside it must balance, so `(S\NP)/NP` is one atom.
    fn atom(&mut self) -> Result<&'a str, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        let mut depth = 0usize;
        while let Some(c) = self.peek() {
            match c {
                '(' => depth += 1,
                ')' if depth == 0 => break,
                ')' => depth -= 1,
                '"' if depth == 0 => break,
                c if c.is_whitespace() && depth == 0 => break,
                _ => {}
            }
            self.pos += c.len_utf8();
        }
        if self.pos == start {
            return Err(self.err("expected an atom"));
        }
        Ok(&self.input[start..self.pos])
    }

    fn category(&mut self) -> Result<CcgCategory, SyntaxError> {
        let start = self.pos;
        let atom = self.atom()?;
        parse_category(atom).map_err(|e| syntax(self.input, start + e.position, e.message))
    }

    fn string(&mut self) -> Result<String, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() != Some('"') {
            return Err(self.err("expected a quoted token"));
        }
        let bytes = self.input.as_bytes();
        let mut i = self.pos + 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'"' => break,
                _ => i += 1,
            }
        }
        if i >= bytes.len() {
            return Err(self.err("unterminated token"));
        }
        self.pos = i + 1;
        serde_json::from_str(&self.input[start..self.pos]).map_err(|e| syntax(self.input, start, e.to_string()))
    }

    fn span(&mut self) -> Result<Range<usize>, SyntaxError> {
        let start = self.pos;
        let atom = self.atom()?;
        let bad = || syntax(self.input, start, "expected an alignment span `start:end`");
        let (a, b) = atom.split_once(':').ok_or_else(bad)?;
        let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        Ok(a..b)
    }

    fn tree(&mut self) -> Result<CcgTree, SyntaxError> {
        self.expect('(')?;
        let head_pos = self.pos;
        let head = self.atom()?;
        self.skip_ws();
        if let (Some(rule), false) = (Rule::from_keyword(head), self.peek() == Some('"')) {
            let category = self.category()?;
            let first = self.tree()?;
            self.skip_ws();
            if self.peek() == Some(')') {
                self.pos += 1;
                if rule != Rule::Given {
                    return Err(syntax(self.input, head_pos, "unary nodes must use `gen`"));
                }
                return Ok(CcgTree::Unary {
                    category,
                    child: Box::new(first),
                });
            }
            let second = self.tree()?;
            self.expect(')')?;
            return Ok(CcgTree::binary(category, rule, first, second));
        }
        let category = parse_category(head).map_err(|e| syntax(self.input, head_pos + e.position, e.message))?;
        let token = self.string()?;
        self.skip_ws();
        let sem = if self.peek() == Some(')') {
            None
        } else {
            Some(self.span()?)
        };
        self.expect(')')?;
        Ok(CcgTree::Leaf { category, token, sem })
    }
}

pub fn parse_tree(s: &str) -> Result<CcgTree, SyntaxError> {
    let mut p = TreeParser { input: s, pos: 0 };
    let tree = p.tree()?;
    p.skip_ws();
    if p.pos != s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(tree)
}

impl FromStr for CcgTree {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tree(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeFailure {
    pub path: NodePath,
    pub message: String,
}

/// Every `fa`/`ba` node whose categories do not satisfy its rule.
pub fn typecheck_failures(tree: &CcgTree) -> Vec<TypeFailure> {
    tree.nodes()
        .into_iter()
        .filter_map(|(path, node)| match node {
            CcgTree::Binary {
                category,
                rule: rule @ (Rule::ForwardApp | Rule::BackwardApp),
                left,
                right,
            } => {
                let expected = check_application(left.category(), right.category());
                match expected {
                    Some((ref result, r)) if r == *rule && result == category => None,
                    _ => Some(TypeFailure {
                        message: format!(
                            "{} {} {} does not yield {category} by {}",
                            left.category(),
                            right.category(),
                            rule.keyword(),
                            rule.keyword()
                        ),
                        path,
                    }),
                }
            }
            _ => None,
        })
        .collect()
}

pub fn typecheck_tree(tree: &CcgTree) -> bool {
    typecheck_failures(tree).is_empty()
}

/// Where the first occurrence of an indexed subtree came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeOrigin {
    pub tree: usize,
    pub path: NodePath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedSubtree {
    /// First occurrence, alignments included.
    pub tree: CcgTree,
    pub count: usize,
    pub origin: SubtreeOrigin,
}

/// A subtree rooted at C with one designated C-leaf that receives the extended leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    /// Index into `by_category[C]`.
    pub subtree: usize,
    /// Path of the slot leaf inside the subtree.
    pub slot: NodePath,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubtreeRef<'a> {
    pub category: &'a CcgCategory,
    pub index: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SubtreeIndex {
    by_category: BTreeMap<CcgCategory, Vec<IndexedSubtree>>,
    templates: BTreeMap<CcgCategory, Vec<Template>>,
    keys: BTreeMap<String, usize>,
    template_keys: BTreeMap<(String, NodePath), usize>,
}

impl SubtreeIndex {
    /// Number of distinct subtrees.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Number of subtree occurrences, duplicates included.
    pub fn total_count(&self) -> usize {
        self.by_category.values().flatten().map(|s| s.count).sum()
    }

    pub fn subtrees(&self, category: &CcgCategory) -> &[IndexedSubtree] {
        self.by_category.get(category).map_or(&[], Vec::as_slice)
    }

    pub fn templates(&self, category: &CcgCategory) -> &[Template] {
        self.templates.get(category).map_or(&[], Vec::as_slice)
    }

    pub fn categories(&self) -> impl Iterator<Item = &CcgCategory> {
        self.by_category.keys()
    }

    pub fn template_count(&self) -> usize {
        self.templates.values().map(Vec::len).sum()
    }

    pub fn contains_shape(&self, tree: &CcgTree) -> bool {
        self.keys.contains_key(&tree.shape_key())
    }

    /// Position of a structurally equal subtree within `subtrees(tree.category())`.
    pub fn position(&self, tree: &CcgTree) -> Option<usize> {
        self.keys.get(&tree.shape_key()).copied()
    }

    fn add(&mut self, tree_idx: usize, path: NodePath, node: &CcgTree) {
        let key = node.shape_key();
        let category = node.category().clone();
        let entries = self.by_category.entry(category.clone()).or_default();
        let slot = match self.keys.get(&key) {
            Some(&i) => {
                entries[i].count += 1;
                i
            }
            None => {
                entries.push(IndexedSubtree {
                    tree: node.clone(),
                    count: 1,
                    origin: SubtreeOrigin { tree: tree_idx, path },
                });
                self.keys.insert(key.clone(), entries.len() - 1);
                entries.len() - 1
            }
        };

        if node.is_leaf() {
            return;
        }
        for (leaf_path, leaf) in node.nodes() {
            if !leaf.is_leaf() || leaf.category() != &category {
                continue;
            }
            let tkey = (key.clone(), leaf_path.clone());
            let templates = self.templates.entry(category.clone()).or_default();
            match self.template_keys.get(&tkey) {
                Some(&i) => templates[i].count += 1,
                None => {
                    templates.push(Template {
                        subtree: slot,
                        slot: leaf_path,
                        count: 1,
                    });
                    self.template_keys.insert(tkey, templates.len() - 1);
                }
            }
        }
    }
}

/// Catalogs every subtree of every tree (leaves included) by root category, with
/// extension templates for subtrees that contain a leaf of their own root category.
pub fn extract_subtrees(trees: &[CcgTree]) -> SubtreeIndex {
    let per_tree: Vec<Vec<(NodePath, &CcgTree)>> = trees.par_iter().map(|t| t.nodes()).collect();
    let mut index = SubtreeIndex::default();
    for (tree_idx, nodes) in per_tree.into_iter().enumerate() {
        for (path, node) in nodes {
            index.add(tree_idx, path, node);
        }
    }
    index
}

/// Sibling lookup: `(parent, child) -> other child`, for binary nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChildMap {
    pub entries: BTreeMap<(NodePath, NodePath), NodePath>,
}

impl ChildMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sibling(&self, parent: &NodePath, child: &NodePath) -> Option<&NodePath> {
        self.entries.get(&(parent.clone(), child.clone()))
    }
}

pub fn build_child_map(tree: &CcgTree) -> ChildMap {
    let mut map = ChildMap::default();
    for (path, node) in tree.nodes() {
        if let CcgTree::Binary { .. } = node {
            let (l, r) = (path.child(Side::Left), path.child(Side::Right));
            map.entries.insert((path.clone(), l.clone()), r.clone());
            map.entries.insert((path, r), l);
        }
    }
    map
}

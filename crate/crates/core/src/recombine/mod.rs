//! Substitution and extension over CCG derivations, text realization, semantic
//! splicing and seeded candidate generation.

mod detok;
mod generate;
mod semantics;

use std::fmt;
use std::ops::Range;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::ccg::{
    parse_tree, typecheck_tree, CcgCategory, CcgTree, NodePath, SubtreeIndex, SubtreeOrigin, SyntaxError,
};
use crate::corpus::Document;
use crate::plausibility::PllScore;
use crate::sbn::{parse_sbn, serialize_sbn, SbnError, SbnGraph, SpliceError};

pub use detok::{starts_uppercase, Detokenizer, Faithfulness};
pub use generate::{generate_set, GenerationReport, IterationMix, RecombineConfig};
pub use semantics::splice_semantics;

#[derive(Debug, Error)]
pub enum RecombineError {
    #[error("no node has a distinct replacement of the same category")]
    NoCompatibleSubtree,
    #[error("no leaf category has an extension template")]
    NoTemplate,
    #[error("no SBN alignment for site {site}")]
    NoAlignment { site: String },
    #[error("source has no SBN to splice into")]
    NoSourceSemantics,
    #[error(transparent)]
    Splice(#[from] SpliceError),
    #[error("document {id}: bad CCG derivation: {source}")]
    Ccg {
        id: String,
        #[source]
        source: SyntaxError,
    },
    #[error("document {id}: bad SBN: {source}")]
    Sbn {
        id: String,
        #[source]
        source: SbnError,
    },
    #[error("document {id}: derivation does not typecheck")]
    IllTyped { id: String },
    #[error("invalid recombination config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Substitution,
    Extension,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpKind::Substitution => "substitution",
            OpKind::Extension => "extension",
        })
    }
}

/// One applied operation, with enough provenance to replay it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecombinationOp {
    pub kind: OpKind,
    /// Path of the replaced node in the tree the op was applied to.
    pub site: NodePath,
    /// Token span of the replaced node in that tree.
    pub site_span: Range<usize>,
    pub site_category: CcgCategory,
    pub replacement_category: CcgCategory,
    /// Index into `SubtreeIndex::subtrees` (substitution) or `templates` (extension).
    pub replacement: usize,
    /// Slot path inside the template, for extensions.
    pub slot: Option<NodePath>,
    /// Where the donor subtree or template was first seen.
    pub origin: SubtreeOrigin,
    pub removed_yield: Vec<String>,
    pub replacement_yield: Vec<String>,
}

impl RecombinationOp {
    pub fn to_json(&self) -> Value {
        json!({
            "kind": self.kind,
            "site": self.site.to_string(),
            "site_span": [self.site_span.start, self.site_span.end],
            "categories": format!("{} => {}", self.site_category, self.replacement_category),
            "removed": self.removed_yield.join(" "),
            "replacement": self.replacement_yield.join(" "),
            "donor": {"tree": self.origin.tree, "path": self.origin.path.to_string()},
        })
    }
}

/// A recombination source: one document's derivation and, when present, its SBN.
#[derive(Debug, Clone)]
pub struct SourceDoc {
    pub id: String,
    pub text: String,
    /// Derivation with leaf alignments into `sbn`.
    pub tree: CcgTree,
    pub sbn: Option<SbnGraph>,
}

impl SourceDoc {
    pub fn new(id: impl Into<String>, text: impl Into<String>, tree: CcgTree) -> Self {
        SourceDoc {
            id: id.into(),
            text: text.into(),
            tree,
            sbn: None,
        }
    }

    pub fn with_sbn(mut self, sbn: SbnGraph) -> Self {
        self.sbn = Some(sbn);
        self
    }

    /// Returns `Ok(None)` for documents without a CCG layer.
    pub fn from_document(doc: &Document) -> Result<Option<Self>, RecombineError> {
        let Some(ccg) = &doc.ccg else { return Ok(None) };
        let tree = parse_tree(ccg).map_err(|source| RecombineError::Ccg {
            id: doc.id.clone(),
            source,
        })?;
        if !typecheck_tree(&tree) {
            return Err(RecombineError::IllTyped { id: doc.id.clone() });
        }
        let sbn = match &doc.sbn {
            Some(s) => Some(parse_sbn(s).map_err(|source| RecombineError::Sbn {
                id: doc.id.clone(),
                source,
            })?),
            None => None,
        };
        Ok(Some(SourceDoc {
            id: doc.id.clone(),
            text: doc.text.clone(),
            tree,
            sbn,
        }))
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub source_id: String,
    pub tree: CcgTree,
    pub text: String,
    pub ops: Vec<RecombinationOp>,
    pub sbn: Option<SbnGraph>,
    /// Why semantic splicing failed, when it was attempted and did.
    pub sbn_error: Option<String>,
    pub pll: Option<PllScore>,
}

impl Candidate {
    /// Operation kind and iteration count, e.g. `substitution x2`.
    pub fn stratum(&self) -> String {
        let kind = self.ops.first().map_or("none".to_string(), |o| o.kind.to_string());
        format!("{kind} x{}", self.ops.len())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "source_id": self.source_id,
            "text": self.text,
            "tree": self.tree.to_string(),
            "ops": self.ops.iter().map(RecombinationOp::to_json).collect::<Vec<_>>(),
            "sbn": self.sbn.as_ref().map(serialize_sbn),
            "sbn_error": self.sbn_error,
            "pll": self.pll,
        })
    }
}

fn token_strings(tree: &CcgTree) -> Vec<String> {
    tree.tokens().into_iter().map(String::from).collect()
}

fn is_protected(path: &NodePath, protected: &[NodePath]) -> bool {
    protected.iter().any(|p| p.overlaps(path))
}

/// A node that can be substituted: every same-category subtree in the index except
/// the one structurally equal to the node itself is a replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionSite {
    pub path: NodePath,
    pub excluded: Option<usize>,
}

/// Nodes with at least one distinct same-category replacement. The root is never a site.
pub fn substitution_sites(tree: &CcgTree, index: &SubtreeIndex, protected: &[NodePath]) -> Vec<SubstitutionSite> {
    tree.nodes()
        .into_iter()
        .filter(|(path, _)| !path.is_root() && !is_protected(path, protected))
        .filter_map(|(path, node)| {
            let pool = index.subtrees(node.category()).len();
            let excluded = index.position(node);
            let options = pool - usize::from(excluded.is_some());
            (options > 0).then_some(SubstitutionSite { path, excluded })
        })
        .collect()
}

/// Leaves that some template can extend.
pub fn extension_sites(tree: &CcgTree, index: &SubtreeIndex, protected: &[NodePath]) -> Vec<NodePath> {
    tree.nodes()
        .into_iter()
        .filter(|(path, node)| {
            node.is_leaf() && !is_protected(path, protected) && !index.templates(node.category()).is_empty()
        })
        .map(|(path, _)| path)
        .collect()
}

/// Replaces the node at `site` with `index.subtrees(category)[choice]`.
pub fn substitute_at(
    tree: &CcgTree,
    site: &NodePath,
    index: &SubtreeIndex,
    choice: usize,
) -> Option<(CcgTree, RecombinationOp)> {
    let node = tree.get(site)?;
    let category = node.category().clone();
    let donor = index.subtrees(&category).get(choice)?;
    let replacement = donor.tree.without_sem();
    let op = RecombinationOp {
        kind: OpKind::Substitution,
        site: site.clone(),
        site_span: tree.yield_span(site)?,
        site_category: category.clone(),
        replacement_category: replacement.category().clone(),
        replacement: choice,
        slot: None,
        origin: donor.origin.clone(),
        removed_yield: token_strings(node),
        replacement_yield: token_strings(&replacement),
    };
    let mut out = tree.clone();
    *out.get_mut(site)? = replacement;
    Some((out, op))
}

/// Grows the leaf at `site` into `index.templates(category)[choice]`, with the
/// leaf placed in the template's slot.
pub fn extend_at(
    tree: &CcgTree,
    site: &NodePath,
    index: &SubtreeIndex,
    choice: usize,
) -> Option<(CcgTree, RecombinationOp)> {
    let leaf = tree.get(site)?;
    if !leaf.is_leaf() {
        return None;
    }
    let category = leaf.category().clone();
    let template = index.templates(&category).get(choice)?;
    let donor = &index.subtrees(&category)[template.subtree];
    let mut grown = donor.tree.without_sem();
    *grown.get_mut(&template.slot)? = leaf.without_sem();
    let op = RecombinationOp {
        kind: OpKind::Extension,
        site: site.clone(),
        site_span: tree.yield_span(site)?,
        site_category: category.clone(),
        replacement_category: grown.category().clone(),
        replacement: choice,
        slot: Some(template.slot.clone()),
        origin: donor.origin.clone(),
        removed_yield: token_strings(leaf),
        replacement_yield: token_strings(&grown),
    };
    let mut out = tree.clone();
    *out.get_mut(site)? = grown;
    Some((out, op))
}

/// Draws an index in proportion to `weights`; at least one weight must be positive.
fn weighted<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = usize>) -> usize {
    WeightedIndex::new(weights).expect("a positive weight").sample(rng)
}

fn substitute_guarded<R: Rng + ?Sized>(
    tree: &CcgTree,
    index: &SubtreeIndex,
    rng: &mut R,
    protected: &[NodePath],
) -> Result<(CcgTree, RecombinationOp), RecombineError> {
    let sites = substitution_sites(tree, index, protected);
    if sites.is_empty() {
        return Err(RecombineError::NoCompatibleSubtree);
    }
    let site = &sites[rng.gen_range(0..sites.len())];
    let category = tree.get(&site.path).expect("site exists").category();
    let pool = index.subtrees(category);
    let weights = pool
        .iter()
        .enumerate()
        .map(|(i, s)| if Some(i) == site.excluded { 0 } else { s.count });
    let pick = weighted(rng, weights);
    Ok(substitute_at(tree, &site.path, index, pick).expect("site and choice are valid"))
}

fn extend_guarded<R: Rng + ?Sized>(
    tree: &CcgTree,
    index: &SubtreeIndex,
    rng: &mut R,
    protected: &[NodePath],
) -> Result<(CcgTree, RecombinationOp), RecombineError> {
    let sites = extension_sites(tree, index, protected);
    if sites.is_empty() {
        return Err(RecombineError::NoTemplate);
    }
    let site = &sites[rng.gen_range(0..sites.len())];
    let templates = index.templates(tree.get(site).expect("site exists").category());
    let pick = weighted(rng, templates.iter().map(|t| t.count));
    Ok(extend_at(tree, site, index, pick).expect("site and choice are valid"))
}

/// Replaces one uniformly chosen node with a different indexed subtree of the same
/// category, drawn in proportion to its corpus frequency.
pub fn substitute<R: Rng + ?Sized>(
    tree: &CcgTree,
    index: &SubtreeIndex,
    rng: &mut R,
) -> Result<(CcgTree, RecombinationOp), RecombineError> {
    substitute_guarded(tree, index, rng, &[])
}

/// Extends one uniformly chosen leaf with a template drawn in proportion to its
/// corpus frequency.
pub fn extend<R: Rng + ?Sized>(
    tree: &CcgTree,
    index: &SubtreeIndex,
    rng: &mut R,
) -> Result<(CcgTree, RecombinationOp), RecombineError> {
    extend_guarded(tree, index, rng, &[])
}

/// Applies `n` operations of one kind. No site may lie inside, or contain, the
/// result of an earlier operation.
pub fn apply_ops<R: Rng + ?Sized>(
    tree: &CcgTree,
    index: &SubtreeIndex,
    rng: &mut R,
    kind: OpKind,
    n: usize,
) -> Result<(CcgTree, Vec<RecombinationOp>), RecombineError> {
    let mut current = tree.without_sem();
    let mut ops = Vec::with_capacity(n);
    let mut protected: Vec<NodePath> = Vec::new();
    for _ in 0..n {
        let (next, op) = match kind {
            OpKind::Substitution => substitute_guarded(&current, index, rng, &protected)?,
            OpKind::Extension => extend_guarded(&current, index, rng, &protected)?,
        };
        protected.push(op.site.clone());
        current = next;
        ops.push(op);
    }
    Ok((current, ops))
}

/// `n` operations on a source document, realized as a [`Candidate`].
pub fn apply_iterated<R: Rng + ?Sized>(
    source: &SourceDoc,
    index: &SubtreeIndex,
    rng: &mut R,
    kind: OpKind,
    n: usize,
    detok: &Detokenizer,
) -> Result<Candidate, RecombineError> {
    if n == 0 {
        return Err(RecombineError::Config("iteration count must be at least 1".into()));
    }
    let (tree, ops) = apply_ops(&source.tree, index, rng, kind, n)?;
    let text = realize_text(&tree, detok, starts_uppercase(&source.text));
    Ok(Candidate {
        source_id: source.id.clone(),
        tree,
        text,
        ops,
        sbn: None,
        sbn_error: None,
        pll: None,
    })
}

/// In-order leaf tokens joined by the detokenizer.
pub fn realize_text(tree: &CcgTree, detok: &Detokenizer, capitalize: bool) -> String {
    detok.realize(&tree.tokens(), capitalize)
}

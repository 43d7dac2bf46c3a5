use std::collections::BTreeSet;
use std::ops::Range;

use crate::ccg::{CcgTree, NodePath};
use crate::sbn::{splice_sbn, BoundaryEdge, Resolved, SbnFragment, SbnGraph, SbnNode, SpliceMode};

use super::{Candidate, OpKind, RecombinationOp, RecombineError, SourceDoc};

/// Smallest node range covering every aligned leaf under `tree`.
fn sem_span(tree: &CcgTree) -> Option<Range<usize>> {
    tree.leaves()
        .into_iter()
        .filter_map(|l| match l {
            CcgTree::Leaf { sem: Some(s), .. } if !s.is_empty() => Some(s.clone()),
            _ => None,
        })
        .reduce(|a, b| a.start.min(b.start)..a.end.max(b.end))
}

/// Rewrites every leaf alignment with `f`; alignments `f` rejects are dropped.
fn remap_sem(tree: &mut CcgTree, f: &dyn Fn(&Range<usize>) -> Option<Range<usize>>) {
    match tree {
        CcgTree::Leaf { sem, .. } => {
            if let Some(s) = sem {
                *sem = f(s);
            }
        }
        CcgTree::Unary { child, .. } => remap_sem(child, f),
        CcgTree::Binary { left, right, .. } => {
            remap_sem(left, f);
            remap_sem(right, f);
        }
    }
}

/// Maps a range through a position map defined on its first and last element.
fn map_range(r: &Range<usize>, pos: impl Fn(usize) -> Option<usize>) -> Option<Range<usize>> {
    if r.is_empty() {
        return None;
    }
    let start = pos(r.start)?;
    let last = pos(r.end - 1)?;
    (last >= start && last - start == r.end - 1 - r.start).then_some(start..last + 1)
}

/// Copies donor nodes `group` into a fragment. Edges between group nodes are kept,
/// edges into `anchor.0` become boundary edges to the matching node of
/// `anchor.1` in the host, and all other node or box edges are dropped.
fn fragment(graph: &SbnGraph, group: Range<usize>, anchor: Option<(&Range<usize>, &Range<usize>)>) -> SbnFragment {
    let mut nodes = Vec::with_capacity(group.len());
    let mut boundary = Vec::new();
    for i in group.clone() {
        let node = &graph.nodes()[i];
        let mut edges = Vec::new();
        for e in &node.edges {
            match graph.resolve(i, &e.target) {
                Resolved::Node(t) if group.contains(&t) => edges.push(e.clone()),
                Resolved::Node(t) => {
                    if let Some((slot, host)) = anchor {
                        if slot.contains(&t) {
                            let k = (t - slot.start).min(host.len() - 1);
                            boundary.push(BoundaryEdge {
                                from: i - group.start,
                                label: e.label.clone(),
                                host_target: host.start + k,
                            });
                        }
                    }
                }
                Resolved::Constant(_) => edges.push(e.clone()),
                Resolved::Context(_) => {}
            }
        }
        nodes.push(SbnNode::new(node.head.clone(), edges));
    }

    let group = &group;
    let targeted_from_outside: BTreeSet<usize> = (0..graph.len())
        .filter(|i| !group.contains(i))
        .flat_map(|i| {
            graph.nodes()[i]
                .edges
                .iter()
                .filter_map(move |e| match graph.resolve(i, &e.target) {
                    Resolved::Node(t) if group.contains(&t) => Some(t - group.start),
                    _ => None,
                })
        })
        .collect();
    let head = if targeted_from_outside.len() == 1 {
        targeted_from_outside.first().copied()
    } else {
        nodes.len().checked_sub(1)
    };
    SbnFragment { nodes, head, boundary }
}

fn unaligned(op: &RecombinationOp) -> RecombineError {
    RecombineError::NoAlignment {
        site: format!("{} `{}`", op.site, op.removed_yield.join(" ")),
    }
}

fn donor_part<'a>(
    op: &RecombinationOp,
    donors: &'a [SourceDoc],
) -> Result<(&'a CcgTree, Option<&'a SbnGraph>), RecombineError> {
    let donor = donors.get(op.origin.tree).ok_or_else(|| unaligned(op))?;
    let tree = donor.tree.get(&op.origin.path).ok_or_else(|| unaligned(op))?;
    Ok((tree, donor.sbn.as_ref()))
}

fn replay_substitution(
    tree: &mut CcgTree,
    graph: &mut SbnGraph,
    op: &RecombinationOp,
    donors: &[SourceDoc],
) -> Result<(), RecombineError> {
    let (donor_tree, donor_sbn) = donor_part(op, donors)?;
    let site = tree.get(&op.site).ok_or_else(|| unaligned(op))?;
    let mut replacement = donor_tree.clone();
    match (sem_span(site), sem_span(donor_tree)) {
        (None, None) => {}
        (Some(host), Some(d)) => {
            let donor_sbn = donor_sbn.ok_or_else(|| unaligned(op))?;
            let frag = fragment(donor_sbn, d.clone(), None);
            *graph = splice_sbn(graph, host.clone(), &frag, SpliceMode::Replace)?;
            let added = d.len();
            let outside = |p: usize| -> Option<usize> {
                if p < host.start {
                    Some(p)
                } else if p >= host.end {
                    Some(p + added - host.len())
                } else {
                    None
                }
            };
            remap_sem(tree, &|r| map_range(r, outside));
            remap_sem(&mut replacement, &|r| map_range(r, |p| Some(p - d.start + host.start)));
        }
        _ => return Err(unaligned(op)),
    }
    *tree.get_mut(&op.site).expect("site checked above") = replacement;
    Ok(())
}

fn replay_extension(
    tree: &mut CcgTree,
    graph: &mut SbnGraph,
    op: &RecombinationOp,
    donors: &[SourceDoc],
) -> Result<(), RecombineError> {
    let (template, donor_sbn) = donor_part(op, donors)?;
    let slot_path = op.slot.clone().unwrap_or_else(NodePath::root);
    let slot = template.get(&slot_path).ok_or_else(|| unaligned(op))?;
    let leaf = tree.get(&op.site).ok_or_else(|| unaligned(op))?.clone();

    let mut grown = template.clone();
    *grown.get_mut(&slot_path).expect("slot checked above") = CcgTree::leaf(slot.category().clone(), "");
    let extra = sem_span(&grown);
    let Some(d) = extra else {
        // Nothing in the template carries meaning of its own.
        *grown.get_mut(&slot_path).expect("slot") = leaf;
        *tree.get_mut(&op.site).expect("site") = grown;
        return Ok(());
    };
    let (Some(host), Some(s), Some(donor_sbn)) = (sem_span(&leaf), sem_span(slot), donor_sbn) else {
        return Err(unaligned(op));
    };
    let d = d.start.min(s.start)..d.end.max(s.end);
    let before = d.start..s.start;
    let after = s.end..d.end;

    let after_frag = fragment(donor_sbn, after.clone(), Some((&s, &host)));
    *graph = splice_sbn(graph, host.end..host.end, &after_frag, SpliceMode::Insert)?;
    let before_frag = fragment(donor_sbn, before.clone(), Some((&s, &host)));
    *graph = splice_sbn(graph, host.start..host.start, &before_frag, SpliceMode::Insert)?;

    let (lb, la) = (before.len(), after.len());
    let host_pos = |p: usize| -> Option<usize> {
        Some(if p < host.start {
            p
        } else if p < host.end {
            p + lb
        } else {
            p + lb + la
        })
    };
    remap_sem(tree, &|r| map_range(r, host_pos));
    let leaf = tree.get(&op.site).expect("site").clone();
    let template_pos = |p: usize| -> Option<usize> {
        if before.contains(&p) {
            Some(host.start + (p - before.start))
        } else if after.contains(&p) {
            Some(host.end + lb + (p - after.start))
        } else {
            None
        }
    };
    remap_sem(&mut grown, &|r| map_range(r, template_pos));
    *grown.get_mut(&slot_path).expect("slot") = leaf;
    *tree.get_mut(&op.site).expect("site") = grown;
    Ok(())
}

/// Replays a candidate's operations on its source SBN.
///
/// Donor material comes from `donors`, the documents the subtree index was
/// built from. A substituted node's aligned SBN span is replaced by the donor
/// subtree's span. An extension inserts the template's extra nodes around the
/// extended leaf's nodes, reconnecting edges that pointed at the template slot.
pub fn splice_semantics(
    cand: &Candidate,
    source: &SourceDoc,
    donors: &[SourceDoc],
) -> Result<SbnGraph, RecombineError> {
    let mut graph = source.sbn.clone().ok_or(RecombineError::NoSourceSemantics)?;
    let mut tree = source.tree.clone();
    for op in &cand.ops {
        match op.kind {
            OpKind::Substitution => replay_substitution(&mut tree, &mut graph, op, donors)?,
            OpKind::Extension => replay_extension(&mut tree, &mut graph, op, donors)?,
        }
    }
    debug_assert_eq!(tree.without_sem(), cand.tree.without_sem());
    Ok(graph)
}

/// Sets `cand.sbn` or records why splicing failed.
pub(crate) fn attach_semantics(cand: &mut Candidate, source: &SourceDoc, donors: &[SourceDoc]) {
    match splice_semantics(cand, source, donors) {
        Ok(g) => {
            cand.sbn = Some(g);
            cand.sbn_error = None;
        }
        Err(e) => {
            cand.sbn = None;
            cand.sbn_error = Some(e.to_string());
        }
    }
}

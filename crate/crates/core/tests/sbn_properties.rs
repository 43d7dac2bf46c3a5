use drskit::metrics::{smatch_f1, SmatchOptions};
use drskit::sbn::{
    parse_sbn, serialize_sbn, splice_sbn, to_triples, Resolved, SbnFragment, SbnGraph, SpliceError, SpliceMode,
};
use drskit::synth::{random_sbn, GraphSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Replaces every synset head with a unique `{prefix}{i}.n.01` so that node
/// identity survives any reindexing.
fn tag(graph: &SbnGraph, prefix: &str) -> SbnGraph {
    let text: Vec<String> = serialize_sbn(graph)
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            if head.chars().all(|c| c.is_ascii_uppercase() || c == '_' || c == '-') {
                line.to_string()
            } else if rest.is_empty() {
                format!("{prefix}{i}.n.01")
            } else {
                format!("{prefix}{i}.n.01 {rest}")
            }
        })
        .collect();
    parse_sbn(&text.join("\n")).unwrap()
}

fn head(graph: &SbnGraph, i: usize) -> String {
    graph.nodes()[i].head.to_string()
}

/// Edges of a node, described by label and what they reach. Node targets are
/// named by the tagged head of the target, boxes by context number.
fn described_edges(graph: &SbnGraph, i: usize) -> Vec<(String, String)> {
    graph.nodes()[i]
        .edges
        .iter()
        .map(|e| {
            let to = match graph.resolve(i, &e.target) {
                Resolved::Node(t) => head(graph, t),
                Resolved::Context(c) => format!("box{c}"),
                Resolved::Constant(c) => c.to_string(),
            };
            (e.label.clone(), to)
        })
        .collect()
}

fn relation_free(rng: &mut ChaCha8Rng, max_vars: usize) -> SbnGraph {
    loop {
        let g = random_sbn(rng, max_vars);
        if g.nodes().iter().all(|n| !n.head.is_relation()) {
            return g;
        }
    }
}

#[test]
fn five_hundred_random_splices_keep_non_crossing_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut spliced = 0;
    for _ in 0..500 {
        let host = tag(&random_sbn(&mut rng, 10), "h");
        let frag_graph = tag(&relation_free(&mut rng, 5), "f");
        let fragment = SbnFragment::from_graph(frag_graph.clone());
        let n = host.len();
        let start = rng.gen_range(0..=n);
        let (mode, end) = if rng.gen_bool(0.5) {
            (SpliceMode::Insert, start)
        } else {
            (SpliceMode::Replace, rng.gen_range(start..=n))
        };
        let in_span = |i: usize| (start..end).contains(&i);

        let result = splice_sbn(&host, start..end, &fragment, mode);
        let out = match result {
            Ok(g) => g,
            Err(SpliceError::ContextBoundary) => {
                assert!((start..end).any(|i| host.nodes()[i].head.is_relation()));
                continue;
            }
            Err(SpliceError::CrossingEdge { .. }) => {
                let enters = (0..n).filter(|&i| !in_span(i)).any(|i| {
                    host.nodes()[i]
                        .edges
                        .iter()
                        .any(|e| matches!(host.resolve(i, &e.target), Resolved::Node(t) if in_span(t)))
                });
                assert!(enters, "crossing edge reported without an edge into the span");
                continue;
            }
            Err(e) => panic!("unexpected splice failure: {e}"),
        };
        spliced += 1;
        assert_eq!(out.len(), n - (end - start) + fragment.len());

        // Every surviving node keeps its non-crossing edges, found by tag.
        let position = |name: &str| (0..out.len()).find(|&j| head(&out, j) == name);
        for i in (0..n).filter(|&i| !in_span(i)) {
            let name = head(&host, i);
            let j = if host.nodes()[i].head.is_relation() {
                // Relations are untagged; they keep their rank among relations.
                let rank = (0..i).filter(|&k| host.nodes()[k].head.is_relation()).count();
                (0..out.len())
                    .filter(|&k| out.nodes()[k].head.is_relation())
                    .nth(rank)
                    .unwrap()
            } else {
                position(&name).unwrap_or_else(|| panic!("{name} lost"))
            };
            let after = described_edges(&out, j);
            for (k, e) in host.nodes()[i].edges.iter().enumerate() {
                if matches!(host.resolve(i, &e.target), Resolved::Node(t) if in_span(t)) {
                    continue;
                }
                let before = &described_edges(&host, i)[k];
                assert!(after.contains(before), "edge {before:?} of {name} changed: {after:?}");
            }
        }
        for f in 0..frag_graph.len() {
            let name = head(&frag_graph, f);
            let j = position(&name).unwrap();
            assert_eq!(j, start + f);
            let after = described_edges(&out, j);
            for e in described_edges(&frag_graph, f) {
                if e.1.starts_with("box") {
                    continue;
                }
                assert!(after.contains(&e), "fragment edge {e:?} changed");
            }
        }
    }
    assert!(spliced >= 250, "only {spliced} splices succeeded");
}

fn permuted(spec: &GraphSpec, rng: &mut ChaCha8Rng) -> SbnGraph {
    // `mutate` may edit as well as reorder, so retry until only the order moved.
    let base = to_triples(&spec.to_graph());
    loop {
        let g = spec.mutate(rng).to_graph();
        let t = to_triples(&g);
        if t.len() == base.len() && t.variables.len() == base.variables.len() {
            let r = smatch_f1(&t, &base, &SmatchOptions::new(4, 0));
            if r.f1 == 1.0 {
                return g;
            }
        }
    }
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>(), max_vars in 2usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_sbn(&mut rng, max_vars);
        let text = serialize_sbn(&g);
        let back = parse_sbn(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_sbn(&back), text);
    }

    #[test]
    fn every_edge_resolves(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_sbn(&mut rng, 12);
        for i in 0..g.len() {
            for e in &g.nodes()[i].edges {
                match g.resolve(i, &e.target) {
                    Resolved::Node(t) => prop_assert!(t < g.len()),
                    Resolved::Context(c) => prop_assert!(c < g.context_count()),
                    Resolved::Constant(_) => {}
                }
            }
        }
    }

    #[test]
    fn triples_ignore_node_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = GraphSpec::random(&mut rng, 8);
        let a = to_triples(&spec.to_graph());
        let b = to_triples(&permuted(&spec, &mut rng));
        prop_assert_eq!(a.len(), b.len());
        let mut ra: Vec<String> = a.triples.iter().map(|t| t.relation.clone()).collect();
        let mut rb: Vec<String> = b.triples.iter().map(|t| t.relation.clone()).collect();
        ra.sort();
        rb.sort();
        prop_assert_eq!(ra, rb);
    }

    #[test]
    fn empty_insert_changes_nothing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_sbn(&mut rng, 10);
        let at = rng.gen_range(0..=g.len());
        let out = splice_sbn(&g, at..at, &SbnFragment::empty(), SpliceMode::Insert).unwrap();
        prop_assert_eq!(out, g);
    }
}

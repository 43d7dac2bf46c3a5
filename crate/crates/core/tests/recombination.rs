use drskit::ccg::{extract_subtrees, parse_tree, typecheck_tree, CcgTree};
use drskit::recombine::{
    apply_iterated, apply_ops, generate_set, splice_semantics, Detokenizer, OpKind, RecombineConfig, SourceDoc,
};
use drskit::sbn::{parse_sbn, serialize_sbn};
use drskit::synth::grammar_corpus;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree(s: &str) -> CcgTree {
    parse_tree(s).unwrap()
}

fn seed_sources(n: usize) -> Vec<SourceDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    grammar_corpus(&mut rng, n)
        .iter()
        .map(|d| SourceDoc::from_document(d).unwrap().unwrap())
        .collect()
}

fn index_of(docs: &[SourceDoc]) -> drskit::ccg::SubtreeIndex {
    extract_subtrees(&docs.iter().map(|d| d.tree.clone()).collect::<Vec<_>>())
}

#[test]
fn thousand_candidates_are_sound() {
    let sources = seed_sources(300);
    let index = index_of(&sources);
    let config = RecombineConfig {
        target: 1000,
        seed: 5,
        ..RecombineConfig::default()
    };
    let report = generate_set(&sources, &sources, &index, &config, &Detokenizer::default()).unwrap();
    assert_eq!(report.candidates.len(), 1000, "pool came up short");

    let by_id: std::collections::HashMap<&str, &SourceDoc> = sources.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut spliced = 0;
    for cand in &report.candidates {
        let source = by_id[cand.source_id.as_str()];
        assert!(typecheck_tree(&cand.tree), "ill-typed: {}", cand.tree);
        for op in &cand.ops {
            assert_eq!(op.site_category, op.replacement_category);
            // Disjoint sites leave each other's paths intact, so the category
            // is checked in both the source and the final tree.
            assert_eq!(source.tree.get(&op.site).unwrap().category(), &op.site_category);
            assert_eq!(cand.tree.get(&op.site).unwrap().category(), &op.site_category);
        }
        let before = source.tree.tokens().len();
        let after = cand.tree.tokens().len();
        match cand.ops[0].kind {
            OpKind::Extension => assert!(after > before, "{} -> {}", source.text, cand.text),
            OpKind::Substitution => {
                if cand
                    .ops
                    .iter()
                    .all(|o| o.removed_yield.len() == 1 && o.replacement_yield.len() == 1)
                {
                    assert_eq!(after, before);
                }
            }
        }
        if let Some(g) = &cand.sbn {
            spliced += 1;
            assert_eq!(&parse_sbn(&serialize_sbn(g)).unwrap(), g);
        }
    }
    assert!(spliced > 0);
}

#[test]
fn generation_is_reproducible() {
    let sources = seed_sources(80);
    let index = index_of(&sources);
    let config = RecombineConfig {
        target: 150,
        seed: 9,
        ..RecombineConfig::default()
    };
    let detok = Detokenizer::default();
    let a = generate_set(&sources, &sources, &index, &config, &detok).unwrap();
    let b = generate_set(&sources, &sources, &index, &config, &detok).unwrap();
    let texts =
        |r: &drskit::recombine::GenerationReport| r.candidates.iter().map(|c| c.text.clone()).collect::<Vec<_>>();
    assert_eq!(texts(&a), texts(&b));
    let json = |r: &drskit::recombine::GenerationReport| {
        r.candidates.iter().map(|c| c.to_json().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(json(&a), json(&b));
}

#[test]
fn zero_target_gives_nothing() {
    let sources = seed_sources(10);
    let index = index_of(&sources);
    let config = RecombineConfig {
        target: 0,
        ..RecombineConfig::default()
    };
    let report = generate_set(&sources, &sources, &index, &config, &Detokenizer::default()).unwrap();
    assert!(report.candidates.is_empty());
    assert!(!report.underfull);
}

const I_HAVE_A_DOG: &str = r#"(ba S (NP "I") (fa S\NP ((S\NP)/NP "have") (fa NP (NP/N "a") (N "dog"))))"#;

fn realized(source: &SourceDoc, index_trees: &[CcgTree], kind: OpKind, n: usize, seeds: u64) -> Vec<String> {
    let index = extract_subtrees(index_trees);
    let detok = Detokenizer::default();
    (0..seeds)
        .filter_map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            apply_iterated(source, &index, &mut rng, kind, n, &detok)
                .ok()
                .map(|c| c.text)
        })
        .collect()
}

#[test]
fn have_becomes_want() {
    let src = SourceDoc::new("fig", "I have a dog", tree(I_HAVE_A_DOG));
    let out = realized(&src, &[tree(r#"((S\NP)/NP "want")"#)], OpKind::Substitution, 1, 1);
    assert_eq!(out, vec!["I want a dog"]);
}

#[test]
fn dog_becomes_big_and_strong_dog() {
    let src = SourceDoc::new("fig", "I have a dog", tree(I_HAVE_A_DOG));
    let donor = tree(r#"(fa N (fa N/N ((N/N)/(N/N) "big") (fa N/N ((N/N)/(N/N) "and") (N/N "strong"))) (N "cat"))"#);
    let out = realized(&src, &[donor], OpKind::Extension, 1, 20);
    assert!(out.iter().any(|t| t == "I have a big and strong dog"), "{out:?}");
    assert!(out.iter().all(|t| t.split(' ').count() > 4));
}

#[test]
fn intruder_becomes_irishman_with_spliced_meaning() {
    let source_tree = tree(
        r#"(ba S (ba S (NP "Bill" 0:1) (fa S\NP ((S\NP)/(S\NP) "was") (ba S\NP (S\NP "killed" 1:3) (fa (S\NP)\(S\NP) (((S\NP)\(S\NP))/NP "by") (fa NP (NP/N "an") (N "intruder" 3:4)))))) (S\S "."))"#,
    );
    let sbn =
        parse_sbn("male.n.02 Name \"Bill\"\nkill.v.01 Patient -1 Time +1 Agent +2\ntime.n.08 TPR now\nintruder.n.01")
            .unwrap();
    let src = SourceDoc::new("t2", "Bill was killed by an intruder.", source_tree).with_sbn(sbn);
    let donors =
        vec![SourceDoc::new("d", "Irishman", tree(r#"(N "Irishman" 0:1)"#))
            .with_sbn(parse_sbn("irishman.n.01").unwrap())];
    let index = extract_subtrees(&[donors[0].tree.clone()]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cand = apply_iterated(&src, &index, &mut rng, OpKind::Substitution, 1, &Detokenizer::default()).unwrap();
    assert_eq!(cand.text, "Bill was killed by an Irishman.");
    let g = splice_semantics(&cand, &src, &donors).unwrap();
    assert_eq!(
        serialize_sbn(&g),
        "male.n.02 Name \"Bill\"\nkill.v.01 Patient -1 Time +1 Agent +2\ntime.n.08 TPR now\nirishman.n.01"
    );
}

#[test]
fn brother_becomes_bad_brother() {
    let src = SourceDoc::new(
        "t3",
        "My brother is rich.",
        tree(
            r#"(ba S (ba S (fa NP (NP/N "My") (N "brother")) (fa S\NP ((S\NP)/(S\NP) "is") (S\NP "rich"))) (S\S "."))"#,
        ),
    );
    let out = realized(
        &src,
        &[tree(r#"(fa N (N/N "bad") (N "man"))"#)],
        OpKind::Extension,
        1,
        5,
    );
    assert!(out.iter().all(|t| t == "My bad brother is rich."), "{out:?}");
    assert!(!out.is_empty());
}

#[test]
fn russia_fears_becomes_cuba_replaced() {
    let src = SourceDoc::new(
        "t4",
        "Russia fears the system.",
        tree(
            r#"(ba S (ba S (gen NP (N "Russia")) (fa S\NP ((S\NP)/NP "fears") (fa NP (NP/N "the") (N "system")))) (S\S "."))"#,
        ),
    );
    let donors = [tree(r#"(N "Cuba")"#), tree(r#"((S\NP)/NP "replaced")"#)];
    let out = realized(&src, &donors, OpKind::Substitution, 2, 200);
    assert!(out.iter().any(|t| t == "Cuba replaced the system."), "{out:?}");
}

#[test]
fn thirty_names_grow_three_times() {
    let src = SourceDoc::new(
        "t5",
        "There are thirty names on the list.",
        tree(
            r#"(ba S (ba S (NP "There") (fa S\NP (fa (S\NP)/PP (((S\NP)/PP)/NP "are") (gen NP (fa N (N/N "thirty") (N "names")))) (fa PP (PP/NP "on") (fa NP (NP/N "the") (N "list"))))) (S\S "."))"#,
        ),
    );
    let donors = [
        tree(r#"(fa N/N ((N/N)/(N/N) "about") (N/N "many"))"#),
        tree(r#"(fa N (N/N "new") (N "cars"))"#),
        tree(r#"(fa N (N/N "short") (N "road"))"#),
    ];
    let out = realized(&src, &donors, OpKind::Extension, 3, 200);
    assert!(
        out.iter()
            .any(|t| t == "There are about thirty new names on the short list."),
        "{out:?}"
    );
    let index = extract_subtrees(&donors);
    for s in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (grown, ops) = apply_ops(&src.tree, &index, &mut rng, OpKind::Extension, 3).unwrap();
        assert_eq!(ops.len(), 3);
        assert_eq!(grown.tokens().len(), src.tree.tokens().len() + 3);
        assert!(typecheck_tree(&grown));
    }
}

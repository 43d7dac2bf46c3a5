use std::collections::BTreeMap;
use std::io::Write;

use drskit::ccg::extract_subtrees;
use drskit::corpus::Document;
use drskit::plausibility::{filter_top, score_candidates, ExternalScorer, NgramScorer, Scorer, ScorerKind};
use drskit::recombine::{generate_set, Candidate, Detokenizer, SourceDoc};
use drskit::split::Split;
use serde_json::{json, Value};

use super::{load_assignment, load_docs};
use crate::config::RunConfig;
use crate::error::{CliResult, Context};
use crate::output::Artifacts;

fn build_scorer(config: &RunConfig, train: &[&Document]) -> CliResult<Box<dyn Scorer>> {
    let spec = config.scorer_spec()?;
    Ok(match spec.kind {
        ScorerKind::ReferenceNgram { order, alpha } => {
            Box::new(NgramScorer::train(train.iter().map(|d| &d.tokens), order, alpha)?)
        }
        ScorerKind::External { command } => Box::new(
            ExternalScorer::spawn(&command, config.scorer_timeout())
                .context("starting external scorer")?
                .with_batch_size(config.scorer.batch_size),
        ),
    })
}

fn write_jsonl(w: &mut dyn Write, header: &Value, cands: &[Candidate]) -> std::io::Result<()> {
    writeln!(w, "{header}")?;
    for (rank, c) in cands.iter().enumerate() {
        let mut record = c.to_json();
        record["rank"] = json!(rank);
        record["stratum"] = json!(c.stratum());
        writeln!(w, "{record}")?;
    }
    Ok(())
}

fn strata(cands: &[Candidate]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for c in cands {
        *m.entry(c.stratum()).or_insert(0) += 1;
    }
    m
}

/// Recombines training documents only, scores the pool and keeps the top fraction.
pub fn run(config: &RunConfig) -> CliResult<()> {
    let docs = load_docs(config)?;
    let splits = load_assignment(config, &docs)?;
    let train: Vec<&Document> = docs
        .iter()
        .zip(&splits)
        .filter(|(_, &s)| s == Split::Train)
        .map(|(d, _)| d)
        .collect();

    let mut sources = Vec::new();
    let mut without_ccg = 0usize;
    for doc in &train {
        match SourceDoc::from_document(doc).context(format!("document `{}`", doc.id))? {
            Some(s) => sources.push(s),
            None => without_ccg += 1,
        }
    }
    let trees: Vec<_> = sources.iter().map(|s| s.tree.clone()).collect();
    let index = extract_subtrees(&trees);
    let detok = Detokenizer::learn(train.iter().copied());

    let mut scorer = build_scorer(config, &train)?;
    let report = generate_set(&sources, &sources, &index, &config.recombine_config(), &detok)?;
    let mut pool = report.candidates;
    if !pool.is_empty() {
        score_candidates(&mut pool, scorer.as_mut())?;
    }
    let normalization = config.scorer.normalization;
    let filtered = filter_top(
        pool.clone(),
        config.recombine.fraction,
        normalization,
        config.recombine.cutoff,
    )?;

    let mut out = Artifacts::new(config, "recombine")?;
    let scorer_desc = scorer.describe();
    let mut header = out.provenance();
    header["scorer"] = json!(scorer_desc);
    let pool_header = json!({ "header": header.clone(), "file": "pool" });
    let filtered_header = json!({ "header": header, "file": "filtered" });
    out.write("candidates_pool.jsonl", |w| write_jsonl(w, &pool_header, &pool))?;
    out.write("candidates_filtered.jsonl", |w| {
        write_jsonl(w, &filtered_header, &filtered)
    })?;

    let mut summary = out.provenance();
    summary["scorer"] = json!(scorer_desc);
    summary["train_docs"] = json!(train.len());
    summary["sources"] = json!(sources.len());
    summary["train_docs_without_ccg"] = json!(without_ccg);
    summary["target"] = json!(config.recombine.target);
    summary["pool_size"] = json!(pool.len());
    summary["filtered_size"] = json!(filtered.len());
    summary["fraction"] = json!(config.recombine.fraction);
    summary["rounds"] = json!(report.rounds);
    summary["failed_attempts"] = json!(report.failed_attempts);
    summary["duplicates"] = json!(report.duplicates);
    summary["underfull"] = json!(report.underfull);
    summary["pool_strata"] = json!(strata(&pool));
    summary["filtered_strata"] = json!(strata(&filtered));
    summary["spliced_sbn"] = json!(pool.iter().filter(|c| c.sbn.is_some()).count());
    out.write_json("recombine_summary.json", &summary)?;

    println!(
        "{} sources, pool {} -> kept {} (scorer: {scorer_desc})",
        sources.len(),
        pool.len(),
        filtered.len()
    );
    if report.underfull {
        eprintln!(
            "warning: sources yielded only {} distinct candidates of the {} requested",
            pool.len(),
            config.recombine.target
        );
    }
    Ok(())
}

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::anyhow;
use drskit::metrics::{corpus_bleu, err_rate, smatch_f1, MatchResult, SmatchOptions};
use drskit::sbn::{parse_sbn, to_triples};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::list_ids;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{comment_header, Artifacts};
use crate::Task;

/// One line of a prediction or gold file.
#[derive(Debug, Clone)]
struct Record {
    id: String,
    sbn: Option<String>,
    text: Option<String>,
    tokens: Option<Vec<String>>,
}

impl Record {
    fn tokens(&self) -> Vec<String> {
        match (&self.tokens, &self.text) {
            (Some(t), _) => t.clone(),
            (None, Some(text)) => text.split_whitespace().map(String::from).collect(),
            (None, None) => Vec::new(),
        }
    }
}

fn read_records(path: &Path) -> CliResult<Vec<Record>> {
    let file = File::open(path).map_err(|e| CliError::data(anyhow!("cannot open {}: {e}", path.display())))?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(anyhow!("reading {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| CliError::data(anyhow!("{}:{}: {msg}", path.display(), idx + 1));
        let value: Value = serde_json::from_str(&line).map_err(|e| bad(&e.to_string()))?;
        let id = value
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field `id`"))?
            .to_string();
        let string = |field: &str| value.get(field).and_then(Value::as_str).map(String::from);
        let tokens = value
            .get("tokens")
            .and_then(Value::as_array)
            .map(|items| items.iter().filter_map(Value::as_str).map(String::from).collect());
        if !seen.insert(id.clone()) {
            return Err(bad(&format!("duplicate id `{id}`")));
        }
        records.push(Record {
            id,
            sbn: string("sbn"),
            text: string("text"),
            tokens,
        });
    }
    Ok(records)
}

/// Predictions reordered to follow the gold file. Both files must hold the same ids.
fn align(pred: Vec<Record>, gold: &[Record]) -> CliResult<Vec<Record>> {
    let mut by_id: HashMap<String, Record> = pred.into_iter().map(|r| (r.id.clone(), r)).collect();
    let missing: Vec<&str> = gold
        .iter()
        .map(|g| g.id.as_str())
        .filter(|id| !by_id.contains_key(*id))
        .collect();
    let gold_ids: HashSet<&str> = gold.iter().map(|g| g.id.as_str()).collect();
    let mut extra: Vec<&str> = by_id
        .keys()
        .map(String::as_str)
        .filter(|id| !gold_ids.contains(id))
        .collect();
    extra.sort_unstable();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CliError::data(anyhow!(
            "prediction and gold ids differ: {} missing from predictions [{}], {} not in gold [{}]",
            missing.len(),
            list_ids(&missing),
            extra.len(),
            list_ids(&extra),
        )));
    }
    Ok(gold
        .iter()
        .map(|g| by_id.remove(&g.id).expect("checked above"))
        .collect())
}

/// Restart seed for one document, independent of order and thread scheduling.
fn pair_seed(seed: u64, id: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(id.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn run(config: &RunConfig, task: Task, pred: &Path, gold: &Path) -> CliResult<()> {
    let gold = read_records(gold)?;
    let pred = align(read_records(pred)?, &gold)?;
    let mut out = Artifacts::new(config, "eval")?;
    match task {
        Task::Parse => eval_parse(config, &pred, &gold, &mut out),
        Task::Generate => eval_generate(config, &pred, &gold, &mut out),
    }
}

struct DocScore {
    well_formed: bool,
    result: MatchResult,
}

fn eval_parse(config: &RunConfig, pred: &[Record], gold: &[Record], out: &mut Artifacts) -> CliResult<()> {
    let gold_triples = gold
        .iter()
        .map(|g| {
            let text = g
                .sbn
                .as_deref()
                .ok_or_else(|| CliError::data(anyhow!("gold `{}` has no sbn", g.id)))?;
            parse_sbn(text)
                .map(|graph| to_triples(&graph))
                .map_err(|e| CliError::data(anyhow!("gold `{}` is not valid SBN: {e}", g.id)))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let restarts = config.metrics.restarts;
    let scores: Vec<DocScore> = pred
        .par_iter()
        .zip(gold_triples.par_iter())
        .map(|(p, g)| match p.sbn.as_deref().map(parse_sbn) {
            Some(Ok(graph)) => DocScore {
                well_formed: true,
                result: smatch_f1(
                    &to_triples(&graph),
                    g,
                    &SmatchOptions::new(restarts, pair_seed(config.seed, &p.id)),
                ),
            },
            _ => {
                let (precision, recall, f1) = MatchResult::from_counts(0, 0, g.len());
                DocScore {
                    well_formed: false,
                    result: MatchResult {
                        precision,
                        recall,
                        f1,
                        matched: 0,
                        pred_total: 0,
                        gold_total: g.len(),
                        mapping: Vec::new(),
                    },
                }
            }
        })
        .collect();

    let outputs: Vec<&str> = pred.iter().map(|p| p.sbn.as_deref().unwrap_or("")).collect();
    let err = err_rate(&outputs);
    let (matched, pred_total, gold_total) = scores.iter().fold((0, 0, 0), |(m, p, g), s| {
        (m + s.result.matched, p + s.result.pred_total, g + s.result.gold_total)
    });
    let (micro_p, micro_r, micro_f1) = MatchResult::from_counts(matched, pred_total, gold_total);
    let macro_f1 = if scores.is_empty() {
        0.0
    } else {
        scores.iter().map(|s| s.result.f1).sum::<f64>() / scores.len() as f64
    };

    let header = out.header();
    out.write("eval_parse.tsv", |w| {
        comment_header(w, &header)?;
        writeln!(
            w,
            "id\twell_formed\tmatched\tpred_triples\tgold_triples\tprecision\trecall\tf1"
        )?;
        for (p, s) in pred.iter().zip(&scores) {
            let r = &s.result;
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                p.id, s.well_formed, r.matched, r.pred_total, r.gold_total, r.precision, r.recall, r.f1
            )?;
        }
        Ok(())
    })?;
    let mut summary = out.provenance();
    summary["task"] = json!("parse");
    summary["docs"] = json!(pred.len());
    summary["ill_formed"] = json!(scores.iter().filter(|s| !s.well_formed).count());
    summary["err"] = json!(err);
    summary["matched"] = json!(matched);
    summary["pred_triples"] = json!(pred_total);
    summary["gold_triples"] = json!(gold_total);
    summary["micro"] = json!({ "precision": micro_p, "recall": micro_r, "f1": micro_f1 });
    summary["macro_f1"] = json!(macro_f1);
    summary["restarts"] = json!(restarts);
    out.write_json("eval_parse.json", &summary)?;

    println!(
        "docs {}  F1 {:.4} (macro {:.4})  ERR {:.2}%",
        pred.len(),
        micro_f1,
        macro_f1,
        err
    );
    Ok(())
}

fn eval_generate(config: &RunConfig, pred: &[Record], gold: &[Record], out: &mut Artifacts) -> CliResult<()> {
    let hyps: Vec<Vec<String>> = pred.iter().map(Record::tokens).collect();
    let refs: Vec<Vec<String>> = gold.iter().map(Record::tokens).collect();
    let report = corpus_bleu(&hyps, &refs, config.metrics.bleu_max_n, config.metrics.smoothing)
        .map_err(|e| CliError::data(anyhow!("BLEU: {e}")))?;
    let mut summary = out.provenance();
    summary["task"] = json!("generate");
    summary["docs"] = json!(pred.len());
    summary["bleu"] = json!(report);
    out.write_json("eval_generate.json", &summary)?;
    println!("docs {}  BLEU {:.4}", pred.len(), report.score);
    Ok(())
}

pub mod eval;
pub mod overlap;
pub mod recombine;
pub mod split;
pub mod stats;
pub mod synth;

use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::anyhow;
use drskit::corpus::{load_corpus, Document};
use drskit::split::{read_assignment, Split};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};

/// How many offending ids an error message lists before eliding the rest.
const LISTED_IDS: usize = 10;

pub fn corpus_path(config: &RunConfig) -> CliResult<PathBuf> {
    config
        .corpus
        .clone()
        .ok_or_else(|| CliError::usage(anyhow!("no corpus given (positional CORPUS or `corpus` in the config)")))
}

pub fn load_docs(config: &RunConfig) -> CliResult<Vec<Document>> {
    let path = corpus_path(config)?;
    load_corpus(&path).context(format!("loading corpus {}", path.display()))
}

pub fn assignment_path(config: &RunConfig) -> PathBuf {
    config
        .assignment
        .clone()
        .unwrap_or_else(|| config.out.join("assignment.tsv"))
}

/// Split of each document, in corpus order. Every corpus document must be assigned
/// and every assigned id must exist in the corpus.
pub fn load_assignment(config: &RunConfig, docs: &[Document]) -> CliResult<Vec<Split>> {
    let path = assignment_path(config);
    let file =
        File::open(&path).map_err(|e| CliError::data(anyhow!("cannot open assignment {}: {e}", path.display())))?;
    let (entries, _) = read_assignment(BufReader::new(file)).context(format!("reading {}", path.display()))?;

    let mut lookup = std::collections::HashMap::with_capacity(entries.len());
    for (id, split) in &entries {
        if lookup.insert(id.as_str(), *split).is_some() {
            return Err(CliError::data(anyhow!("{}: id `{id}` assigned twice", path.display())));
        }
    }
    let corpus_ids: HashSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    let unassigned: Vec<&str> = docs
        .iter()
        .map(|d| d.id.as_str())
        .filter(|id| !lookup.contains_key(id))
        .collect();
    let unknown: Vec<&str> = entries
        .iter()
        .map(|(id, _)| id.as_str())
        .filter(|id| !corpus_ids.contains(id))
        .collect();
    if !unassigned.is_empty() || !unknown.is_empty() {
        return Err(CliError::data(anyhow!(
            "assignment {} does not match the corpus: {} unassigned [{}], {} unknown [{}]",
            path.display(),
            unassigned.len(),
            list_ids(&unassigned),
            unknown.len(),
            list_ids(&unknown),
        )));
    }
    Ok(docs.iter().map(|d| lookup[d.id.as_str()]).collect())
}

pub fn list_ids(ids: &[&str]) -> String {
    let mut s = ids.iter().take(LISTED_IDS).copied().collect::<Vec<_>>().join(", ");
    if ids.len() > LISTED_IDS {
        s.push_str(&format!(", ... {} more", ids.len() - LISTED_IDS));
    }
    s
}

/// Integer with comma thousands separators.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

use std::collections::HashSet;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ccg::SubtreeIndex;

use super::semantics::attach_semantics;
use super::{apply_iterated, Candidate, Detokenizer, OpKind, RecombineError, SourceDoc};

/// Relative frequency of each iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationMix {
    pub count: usize,
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecombineConfig {
    pub substitution_weight: u32,
    pub extension_weight: u32,
    pub iterations: Vec<IterationMix>,
    /// Number of distinct candidates to produce.
    pub target: usize,
    pub seed: u64,
    /// Upper bound on passes over the source documents.
    pub max_rounds: usize,
    /// Consecutive passes without a new candidate after which generation stops.
    pub patience: usize,
    /// Replay operations on the source SBN when both sides carry alignments.
    pub splice: bool,
}

impl Default for RecombineConfig {
    fn default() -> Self {
        RecombineConfig {
            substitution_weight: 1,
            extension_weight: 1,
            iterations: vec![
                IterationMix { count: 1, weight: 2 },
                IterationMix { count: 2, weight: 1 },
                IterationMix { count: 3, weight: 1 },
            ],
            target: 1000,
            seed: 0,
            max_rounds: 1000,
            patience: 5,
            splice: true,
        }
    }
}

impl RecombineConfig {
    pub fn validate(&self) -> Result<(), RecombineError> {
        if self.substitution_weight == 0 && self.extension_weight == 0 {
            return Err(RecombineError::Config("both operation weights are zero".into()));
        }
        if self.iterations.iter().all(|m| m.weight == 0) {
            return Err(RecombineError::Config("iteration mix has no positive weight".into()));
        }
        if self.iterations.iter().any(|m| m.count == 0 && m.weight > 0) {
            return Err(RecombineError::Config("iteration counts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GenerationReport {
    pub candidates: Vec<Candidate>,
    pub rounds: usize,
    /// Operation attempts that failed (no site, no template).
    pub failed_attempts: usize,
    /// Attempts whose text repeated an earlier candidate or a source sentence.
    pub duplicates: usize,
    /// True when the sources could not supply `target` distinct candidates.
    pub underfull: bool,
}

/// Random stream for one document in one round, independent of scheduling.
fn doc_rng(seed: u64, id: &str, round: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((id.len() as u64).to_le_bytes());
    h.update(id.as_bytes());
    h.update((round as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Generates up to `config.target` candidates with distinct texts.
///
/// Each round draws one attempt per source document in parallel; attempts are
/// merged in source order, so the result depends only on the inputs and the seed.
/// `donors` are the documents `index` was built from.
pub fn generate_set(
    sources: &[SourceDoc],
    donors: &[SourceDoc],
    index: &SubtreeIndex,
    config: &RecombineConfig,
    detok: &Detokenizer,
) -> Result<GenerationReport, RecombineError> {
    config.validate()?;
    let mut report = GenerationReport {
        candidates: Vec::new(),
        rounds: 0,
        failed_attempts: 0,
        duplicates: 0,
        underfull: false,
    };
    if config.target == 0 {
        return Ok(report);
    }
    if sources.is_empty() {
        report.underfull = true;
        return Ok(report);
    }

    let kinds = [
        (OpKind::Substitution, config.substitution_weight),
        (OpKind::Extension, config.extension_weight),
    ];
    let kind_dist = WeightedIndex::new(kinds.iter().map(|k| k.1)).expect("validated");
    let iter_dist = WeightedIndex::new(config.iterations.iter().map(|m| m.weight)).expect("validated");

    let mut seen: HashSet<String> = sources.iter().map(|s| s.text.clone()).collect();
    let mut idle = 0;
    while report.candidates.len() < config.target && report.rounds < config.max_rounds {
        let round = report.rounds;
        let attempts: Vec<Result<Candidate, RecombineError>> = sources
            .par_iter()
            .map(|src| {
                let mut rng = doc_rng(config.seed, &src.id, round);
                let kind = kinds[kind_dist.sample(&mut rng)].0;
                let n = config.iterations[iter_dist.sample(&mut rng)].count;
                let mut cand = apply_iterated(src, index, &mut rng, kind, n, detok)?;
                if config.splice && src.sbn.is_some() {
                    attach_semantics(&mut cand, src, donors);
                }
                Ok(cand)
            })
            .collect();
        report.rounds += 1;

        let before = report.candidates.len();
        for attempt in attempts {
            match attempt {
                Err(_) => report.failed_attempts += 1,
                Ok(cand) => {
                    if report.candidates.len() >= config.target {
                        break;
                    }
                    if seen.insert(cand.text.clone()) {
                        report.candidates.push(cand);
                    } else {
                        report.duplicates += 1;
                    }
                }
            }
        }
        if report.candidates.len() == before {
            idle += 1;
            if idle >= config.patience {
                break;
            }
        } else {
            idle = 0;
        }
    }
    report.underfull = report.candidates.len() < config.target;
    Ok(report)
}

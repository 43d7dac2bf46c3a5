use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BleuError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("BLEU needs at least one sentence pair")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    None,
    /// Adds one to numerator and denominator of every order above unigrams.
    AddOne,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_length: usize,
    pub ref_length: usize,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with one reference per hypothesis, uniform weights up to `max_n`.
///
/// Orders for which no hypothesis has any n-gram are left out and the weights of
/// the remaining orders renormalized, so very short corpora still get a score.
pub fn corpus_bleu<S: AsRef<str>>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
    max_n: usize,
    smoothing: Smoothing,
) -> Result<BleuReport, BleuError> {
    if hypotheses.len() != references.len() {
        return Err(BleuError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(BleuError::Empty);
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut hyp_length, mut ref_length) = (0, 0);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_length += h.len();
        ref_length += r.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(r, n);
            for (gram, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(ref_counts.get(&gram).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }

    let precisions: Vec<f64> = (0..max_n)
        .map(|k| {
            let (m, t) = (matches[k] as f64, totals[k] as f64);
            match smoothing {
                Smoothing::AddOne if k > 0 => (m + 1.0) / (t + 1.0),
                _ if totals[k] == 0 => 0.0,
                _ => m / t,
            }
        })
        .collect();

    let brevity_penalty = if hyp_length == 0 {
        0.0
    } else if hyp_length >= ref_length {
        1.0
    } else {
        (1.0 - ref_length as f64 / hyp_length as f64).exp()
    };

    let used: Vec<usize> = (0..max_n).filter(|&k| totals[k] > 0).collect();
    let score = if used.is_empty() || used.iter().any(|&k| precisions[k] == 0.0) {
        0.0
    } else {
        let w = 1.0 / used.len() as f64;
        brevity_penalty * used.iter().map(|&k| w * precisions[k].ln()).sum::<f64>().exp()
    };
    Ok(BleuReport {
        score,
        precisions,
        brevity_penalty,
        hyp_length,
        ref_length,
    })
}

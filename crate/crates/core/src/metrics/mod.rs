//! Evaluation and leakage metrics.

mod bleu;
mod overlap;
mod smatch;

pub use bleu::{corpus_bleu, BleuError, BleuReport, Smoothing};
pub use overlap::{
    emit_histogram, overlap_report, word_overlap, write_per_doc, DocOverlap, OverlapReport, HISTOGRAM_BINS,
};
pub use smatch::{smatch_f1, MatchResult, SmatchOptions};

use crate::sbn::parse_sbn;

/// Percentage of outputs that fail to parse as SBN. An empty list scores 0.
pub fn err_rate<S: AsRef<str>>(outputs: &[S]) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    let failures = outputs.iter().filter(|s| parse_sbn(s.as_ref()).is_err()).count();
    100.0 * failures as f64 / outputs.len() as f64
}

use std::collections::HashMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Document;

pub const HISTOGRAM_BINS: usize = 20;

/// Jaccard similarity of the two token sets. Two empty inputs count as identical.
pub fn word_overlap<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let mut vocab = HashMap::new();
    let a = intern(a, &mut vocab);
    let b = intern(b, &mut vocab);
    let (inter, union) = set_counts(&a, &b);
    ratio(inter, union)
}

fn ratio(inter: usize, union: usize) -> f64 {
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Maps tokens to a sorted, deduplicated id list.
fn intern<'a, S: AsRef<str>>(tokens: &'a [S], vocab: &mut HashMap<&'a str, u32>) -> Vec<u32> {
    let mut ids: Vec<u32> = tokens
        .iter()
        .map(|t| {
            let next = vocab.len() as u32;
            *vocab.entry(t.as_ref()).or_insert(next)
        })
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Strict comparison of two (intersection, union) ratios without rounding.
fn exceeds(a: (usize, usize), b: (usize, usize)) -> bool {
    let norm = |(i, u): (usize, usize)| if u == 0 { (1, 1) } else { (i, u) };
    let ((ai, au), (bi, bu)) = (norm(a), norm(b));
    ai * bu > bi * au
}

/// (|a ∩ b|, |a ∪ b|) for sorted, deduplicated lists.
fn set_counts(a: &[u32], b: &[u32]) -> (usize, usize) {
    let (mut i, mut j, mut inter) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (inter, a.len() + b.len() - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocOverlap {
    pub id: String,
    pub max_overlap: f64,
    /// Earliest train document reaching the maximum; `None` when train is empty.
    pub nearest: Option<String>,
    #[serde(skip)]
    bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub per_doc: Vec<DocOverlap>,
    /// Counts for `[k/20, (k+1)/20)`; the last bin also holds 1.0.
    pub histogram: [usize; HISTOGRAM_BINS],
    pub mean: f64,
}

impl OverlapReport {
    pub fn bin_edges(k: usize) -> (f64, f64) {
        (k as f64 / HISTOGRAM_BINS as f64, (k + 1) as f64 / HISTOGRAM_BINS as f64)
    }
}

/// For every evaluation document, its highest word overlap with any train document.
///
/// Bins are computed from the exact integer ratio so that values such as 0.15 land
/// in the bin they name.
pub fn overlap_report(train: &[&Document], eval: &[&Document]) -> OverlapReport {
    let mut vocab = HashMap::new();
    let train_sets: Vec<Vec<u32>> = train.iter().map(|d| intern(&d.tokens, &mut vocab)).collect();
    let eval_sets: Vec<Vec<u32>> = eval.iter().map(|d| intern(&d.tokens, &mut vocab)).collect();

    let per_doc: Vec<DocOverlap> = eval_sets
        .par_iter()
        .zip(eval.par_iter())
        .map(|(set, doc)| {
            let mut best: Option<(usize, usize, usize)> = None;
            for (t, train_set) in train_sets.iter().enumerate() {
                let (inter, union) = set_counts(set, train_set);
                let better = match best {
                    None => true,
                    Some((_, bi, bu)) => exceeds((inter, union), (bi, bu)),
                };
                if better {
                    best = Some((t, inter, union));
                }
            }
            let (max_overlap, nearest, bin) = match best {
                None => (0.0, None, 0),
                Some((t, inter, union)) => {
                    let bin = (inter * HISTOGRAM_BINS)
                        .checked_div(union)
                        .map_or(HISTOGRAM_BINS - 1, |b| b.min(HISTOGRAM_BINS - 1));
                    (ratio(inter, union), Some(train[t].id.clone()), bin)
                }
            };
            DocOverlap {
                id: doc.id.clone(),
                max_overlap,
                nearest,
                bin,
            }
        })
        .collect();

    let mut histogram = [0; HISTOGRAM_BINS];
    for d in &per_doc {
        histogram[d.bin] += 1;
    }
    let mean = if per_doc.is_empty() {
        0.0
    } else {
        per_doc.iter().map(|d| d.max_overlap).sum::<f64>() / per_doc.len() as f64
    };
    OverlapReport {
        per_doc,
        histogram,
        mean,
    }
}

/// Writes `bin_start<TAB>bin_end<TAB>count` rows after any `#` header lines. An
/// empty report produces the column header alone.
pub fn emit_histogram<W: Write>(report: &OverlapReport, header: &[String], mut out: W) -> io::Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "bin_start\tbin_end\tcount")?;
    if !report.per_doc.is_empty() {
        for (k, count) in report.histogram.iter().enumerate() {
            let (lo, hi) = OverlapReport::bin_edges(k);
            writeln!(out, "{lo:.2}\t{hi:.2}\t{count}")?;
        }
    }
    out.flush()
}

/// Writes one `id<TAB>max_overlap<TAB>nearest` row per evaluation document.
pub fn write_per_doc<W: Write>(report: &OverlapReport, header: &[String], mut out: W) -> io::Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "id\tmax_overlap\tnearest_train")?;
    for d in &report.per_doc {
        writeln!(
            out,
            "{}\t{:.6}\t{}",
            d.id,
            d.max_overlap,
            d.nearest.as_deref().unwrap_or("-")
        )?;
    }
    out.flush()
}

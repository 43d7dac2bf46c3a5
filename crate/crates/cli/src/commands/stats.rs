use drskit::corpus::{corpus_stats, CorpusStats};
use drskit::split::Split;

use super::{assignment_path, load_assignment, load_docs, thousands};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{comment_header, Artifacts};

/// Whole-corpus statistics, plus one row per split when an assignment is present.
/// An explicitly configured assignment must exist; the default one is optional.
pub fn run(config: &RunConfig) -> CliResult<()> {
    let docs = load_docs(config)?;
    let mut rows: Vec<(String, CorpusStats)> = vec![("all".into(), corpus_stats(&docs))];
    if config.assignment.is_some() || assignment_path(config).exists() {
        let splits = load_assignment(config, &docs)?;
        for s in Split::ALL {
            let members = docs.iter().zip(&splits).filter(|(_, &d)| d == s).map(|(doc, _)| doc);
            rows.push((s.to_string(), corpus_stats(members)));
        }
    }

    let mut out = Artifacts::new(config, "stats")?;
    let header = out.header();
    out.write("stats.tsv", |w| {
        comment_header(w, &header)?;
        writeln!(w, "subset\tdocs\tavg_tokens\tavg_chars")?;
        for (name, st) in &rows {
            writeln!(
                w,
                "{name}\t{}\t{:.4}\t{:.4}",
                st.doc_count, st.avg_sentence_length, st.avg_char_length
            )?;
        }
        Ok(())
    })?;
    for (name, st) in &rows {
        println!(
            "{name:<5}  {} ({:.2} tokens, {:.2} chars)",
            thousands(st.doc_count),
            st.avg_sentence_length,
            st.avg_char_length
        );
    }
    Ok(())
}

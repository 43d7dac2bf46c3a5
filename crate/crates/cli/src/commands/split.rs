use drskit::corpus::corpus_stats;
use drskit::split::{split_with, Split};

use super::{load_docs, thousands};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{comment_header, Artifacts};

pub fn run(config: &RunConfig) -> CliResult<()> {
    let docs = load_docs(config)?;
    let assignment = split_with(&docs, &config.split_policy(), config.split.method)?;
    let mut out = Artifacts::new(config, "split")?;
    let header = out.header();

    out.write("assignment.tsv", |w| assignment.write_tsv(&header, w))?;

    let rows: Vec<(Split, drskit::corpus::CorpusStats)> = Split::ALL
        .iter()
        .map(|&s| (s, corpus_stats(assignment.select(&docs, s))))
        .collect();
    out.write("split_stats.tsv", |w| {
        comment_header(w, &header)?;
        writeln!(w, "split\tdocs\tavg_tokens\tavg_chars")?;
        for (s, st) in &rows {
            writeln!(
                w,
                "{s}\t{}\t{:.4}\t{:.4}",
                st.doc_count, st.avg_sentence_length, st.avg_char_length
            )?;
        }
        Ok(())
    })?;

    println!(
        "{} split of {} documents (ratio {}, group size {}, seed {})",
        config.split.method,
        thousands(docs.len()),
        config.split.ratio,
        config.split.group_size,
        config.seed
    );
    for (s, st) in &rows {
        println!(
            "{:<5}  {} ({:.2})",
            s.as_str(),
            thousands(st.doc_count),
            st.avg_sentence_length
        );
    }
    println!("config digest {}", out.digest());
    Ok(())
}

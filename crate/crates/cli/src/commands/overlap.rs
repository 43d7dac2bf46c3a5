use drskit::corpus::Document;
use drskit::metrics::{emit_histogram, overlap_report, write_per_doc, OverlapReport};
use drskit::split::{random_split, Split};

use super::{load_assignment, load_docs};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{comment_header, Artifacts};

fn reports(docs: &[Document], splits: &[Split]) -> (OverlapReport, OverlapReport) {
    let part = |s: Split| -> Vec<&Document> {
        docs.iter()
            .zip(splits)
            .filter(|(_, &d)| d == s)
            .map(|(doc, _)| doc)
            .collect()
    };
    let train = part(Split::Train);
    (
        overlap_report(&train, &part(Split::Dev)),
        overlap_report(&train, &part(Split::Test)),
    )
}

/// Max-overlap reports of dev and test against train for the given assignment,
/// and the same means under a seeded random split with the configured ratio.
pub fn run(config: &RunConfig) -> CliResult<()> {
    let docs = load_docs(config)?;
    let splits = load_assignment(config, &docs)?;
    let (dev, test) = reports(&docs, &splits);

    let baseline = random_split(&docs, config.split.ratio, config.seed)?;
    let lookup = baseline.lookup();
    let baseline_splits: Vec<Split> = docs.iter().map(|d| lookup[d.id.as_str()]).collect();
    let (base_dev, base_test) = reports(&docs, &baseline_splits);

    let mut out = Artifacts::new(config, "overlap")?;
    let header = out.header();
    out.write("overlap_dev.tsv", |w| write_per_doc(&dev, &header, w))?;
    out.write("overlap_test.tsv", |w| write_per_doc(&test, &header, w))?;
    out.write("histogram_dev.tsv", |w| emit_histogram(&dev, &header, w))?;
    out.write("histogram_test.tsv", |w| emit_histogram(&test, &header, w))?;

    let rows = [
        ("assignment", "dev", &dev),
        ("assignment", "test", &test),
        ("random_baseline", "dev", &base_dev),
        ("random_baseline", "test", &base_test),
    ];
    out.write("overlap_summary.tsv", |w| {
        comment_header(w, &header)?;
        writeln!(w, "split_source\teval_split\tdocs\tmean_max_overlap")?;
        for (source, split, r) in rows {
            writeln!(w, "{source}\t{split}\t{}\t{:.6}", r.per_doc.len(), r.mean)?;
        }
        Ok(())
    })?;

    println!("eval  docs   mean max-overlap  random baseline");
    for (name, r, b) in [("dev", &dev, &base_dev), ("test", &test, &base_test)] {
        println!("{name:<5} {:<6} {:<17.4} {:.4}", r.per_doc.len(), r.mean, b.mean);
    }
    Ok(())
}

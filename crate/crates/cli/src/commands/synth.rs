use drskit::corpus::write_corpus;
use drskit::synth::{grammar_corpus, near_duplicate_corpus, random_corpus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::Artifacts;
use crate::{SynthArgs, SynthKind};

/// Writes `corpus.jsonl`, a plain manifest without header so that other commands
/// can read it, and `synth_manifest.json` with the provenance.
pub fn run(config: &RunConfig, args: &SynthArgs) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let docs = match args.kind {
        SynthKind::Grammar => grammar_corpus(&mut rng, args.docs),
        SynthKind::NearDuplicate => near_duplicate_corpus(&mut rng, args.docs, args.clusters),
        SynthKind::Random => random_corpus(&mut rng, args.docs),
    };
    let mut out = Artifacts::new(config, "synth")?;
    let path = out.write("corpus.jsonl", |w| write_corpus(&docs, w))?;
    let kind = match args.kind {
        SynthKind::Grammar => "grammar",
        SynthKind::NearDuplicate => "near-duplicate",
        SynthKind::Random => "random",
    };
    let mut manifest = out.provenance();
    manifest["kind"] = json!(kind);
    manifest["docs"] = json!(docs.len());
    manifest["clusters"] = json!(args.clusters);
    out.write_json("synth_manifest.json", &manifest)?;
    println!("wrote {} {kind} documents to {}", docs.len(), path.display());
    Ok(())
}

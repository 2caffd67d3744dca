//! Ingest one dataset and print its split statistics.
//!
//!     cargo run --example corpus_stats -- [path/to/corpus.jsonl path/to/manifest.json]
//!
//! Without arguments the shipped IEMOCAP-shaped fixture is used.

use std::path::PathBuf;

use erc_kit::corpus::{self, DatasetManifest};

fn main() -> erc_kit::Result<()> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let (corpus_path, manifest_path) = match args.as_slice() {
        [c, m] => (c.clone(), m.clone()),
        _ => {
            let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/benchmarks");
            (dir.join("IEMOCAP.jsonl"), dir.join("IEMOCAP.manifest.json"))
        }
    };
    let manifest = DatasetManifest::load(&manifest_path)?;
    let corpus = corpus::ingest(&corpus_path, &manifest)?;
    print!("{}", corpus.stats());
    for w in corpus.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(())
}

//! Build the label-balanced domain base from MELD-shaped training data and
//! look up demonstrations for a few free-text queries.

use std::path::Path;

use erc_kit::corpus::{self, DatasetManifest, Split};
use erc_kit::embed::HashedNgram;
use erc_kit::retrieval::{build_domain_base, Pairing, Query};

fn main() -> erc_kit::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/benchmarks");
    let manifest = DatasetManifest::load(&dir.join("MELD.manifest.json"))?;
    let corpus = corpus::ingest(&dir.join("MELD.jsonl"), &manifest)?;
    let embedder = HashedNgram::default();
    let names = corpus.manifest().speaker_set.clone();
    let index = build_domain_base(&corpus.split(Split::Train), &embedder, 7, &names)?;
    println!("{} entries, {:?}", index.len(), index.label_counts());

    for (text, gold) in [
        ("Ross, I'm so happy you came", "joyful"),
        ("that smells really gross", "disgust"),
        ("did you see where I parked", "neutral"),
    ] {
        let query = Query::new(None, embedder.embed_text(text), Some(gold));
        let any = index.retrieve_top1(&query, Pairing::AllLabels)?;
        let same = index.retrieve_top1(&query, Pairing::SameLabel)?;
        println!(
            "{text:?}\n  all labels : {:?} [{}]\n  same label : {:?} [{}]",
            any.text, any.label, same.text, same.label
        );
        for (entry, score) in index.retrieve(&query, Pairing::AllLabels, 3)? {
            println!("    {score:.3} #{} {:?}", entry.id, entry.text);
        }
    }
    Ok(())
}

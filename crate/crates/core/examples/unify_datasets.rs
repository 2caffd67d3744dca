//! Merge the three mini fixtures into the unified 9-label corpus and show
//! how labels and speakers were renumbered.

use std::path::Path;

use erc_kit::corpus::{self, Corpus, DatasetManifest};
use erc_kit::unify::{build_registry, unify_corpus, LabelMapping};

fn main() -> erc_kit::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini");
    let corpora = ["IEMOCAP", "MELD", "EmoryNLP"]
        .iter()
        .map(|d| {
            let manifest = DatasetManifest::load(&dir.join(format!("{d}.manifest.json")))?;
            corpus::ingest(&dir.join(format!("{d}.jsonl")), &manifest)
        })
        .collect::<erc_kit::Result<Vec<Corpus>>>()?;

    let mapping = LabelMapping::reference();
    println!("mapping table sha256 {}", mapping.checksum());
    for (dataset, source, unified) in mapping.rows() {
        println!("  {dataset:<9} {source:<11} -> {unified}");
    }

    let manifests: Vec<&DatasetManifest> = corpora.iter().map(Corpus::manifest).collect();
    let registry = build_registry(&manifests)?;
    for r in registry.ranges() {
        println!("{} speakers -> ids {}..={}", r.dataset_id, r.start, r.start + r.len - 1);
    }

    let unified = unify_corpus(&corpora, &mapping, &registry)?;
    print!("{}", unified.stats());
    let (conv, u) = unified.utterances().nth(3).expect("non-empty");
    println!("sample: {} speaker {} {:?} [{}]", conv.address(u.index), u.speaker, u.text, u.emotion);
    Ok(())
}

//! Subset sizes of the data-scaling grid on the unified benchmark-sized corpus.

use std::path::Path;

use erc_kit::corpus::{self, Corpus, DatasetManifest, Split};
use erc_kit::mixing::{default_fractions, plan_grid, sample, Strategy};
use erc_kit::unify::{build_registry, unify_corpus, LabelMapping};

fn main() -> erc_kit::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/benchmarks");
    let corpora = ["IEMOCAP", "MELD", "EmoryNLP"]
        .iter()
        .map(|d| {
            let manifest = DatasetManifest::load(&dir.join(format!("{d}.manifest.json")))?;
            corpus::ingest(&dir.join(format!("{d}.jsonl")), &manifest)
        })
        .collect::<erc_kit::Result<Vec<Corpus>>>()?;
    let manifests: Vec<&DatasetManifest> = corpora.iter().map(Corpus::manifest).collect();
    let unified = unify_corpus(&corpora, &LabelMapping::reference(), &build_registry(&manifests)?)?;
    let train = unified.split(Split::Train);

    println!("{:<8} {:>9} {:>7} per dataset", "strategy", "fraction", "total");
    for plan in plan_grid(&default_fractions(), &[Strategy::Total, Strategy::Ratio], 42) {
        let s = sample(&train, &plan)?;
        println!(
            "{:<8} {:>9} {:>7} {:?}",
            plan.strategy.to_string(),
            plan.fraction.to_string(),
            s.len(),
            s.per_dataset
        );
    }
    Ok(())
}

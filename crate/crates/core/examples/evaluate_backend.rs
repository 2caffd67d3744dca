//! Score a backend on the unified test split of the mini fixtures.
//!
//!     cargo run --example evaluate_backend                      # both mock backends
//!     cargo run --example evaluate_backend -- http://host:port/  # a completion server
//!
//! The lexicon backend answers in the unified label space.

use std::path::Path;

use erc_kit::backend::{BackendConfig, BackendKind};
use erc_kit::corpus::{self, Corpus, DatasetManifest, Split};
use erc_kit::eval::{evaluate_run, RunOptions};
use erc_kit::export::inference_prompts;
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
    let manifests: Vec<&DatasetManifest> = corpora.iter().map(Corpus::manifest).collect();
    let unified = unify_corpus(&corpora, &LabelMapping::reference(), &build_registry(&manifests)?)?;
    let test = unified.split(Split::Test);
    let samples = inference_prompts(&test, 12, None)?;
    let labels = test.manifest().label_set.clone();

    let configs = match std::env::args().nth(1) {
        Some(endpoint) => vec![BackendConfig::http(endpoint)],
        None => vec![BackendConfig::mock(BackendKind::MockEcho), BackendConfig::mock(BackendKind::MockRule)],
    };
    for config in configs {
        let backend = config.build()?;
        let options = RunOptions { concurrency: config.concurrency, retries: config.retries, checkpoint: None };
        let outcome = evaluate_run(&samples, backend.as_ref(), &labels, &options)?;
        println!("== {:?}", config.kind);
        print!("{}", outcome.report);
    }
    Ok(())
}

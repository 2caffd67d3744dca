//! Every pipeline stage on the benchmark-sized fixtures, driven by a
//! `RunConfig`, with the lexicon backend standing in for a model.
//!
//!     cargo run --release --example full_pipeline -- [workspace-dir]

use std::path::{Path, PathBuf};

use erc_kit::backend::{BackendConfig, BackendKind};
use erc_kit::pipeline::{DatasetSource, RunConfig, SweepKind, Workspace};

fn main() -> erc_kit::Result<()> {
    let root = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("erc-pipeline"), PathBuf::from);
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/benchmarks");
    let datasets = ["IEMOCAP", "MELD", "EmoryNLP"]
        .iter()
        .map(|d| DatasetSource {
            id: d.to_string(),
            corpus: fixtures.join(format!("{d}.jsonl")),
            manifest: fixtures.join(format!("{d}.manifest.json")),
        })
        .collect();
    let mut config = RunConfig::new(2024, datasets, "UIME");
    config.backend = BackendConfig::mock(BackendKind::MockRule);
    let ws = Workspace::new(&root, config)?;
    println!("workspace {} (config {})", ws.out().display(), ws.config_hash());

    ws.ingest()?;
    let (unified, warnings) = ws.unify()?;
    for w in warnings {
        println!("warning: {w}");
    }
    print!("{}", unified.stats());
    let index = ws.build_index()?;
    println!("domain base: {} entries", index.len());
    println!("prompts: {}", ws.build_prompts()?.len());
    let (s1, s2) = ws.export_train()?;
    println!("training files: stage1 {s1}, stage2 {s2}");
    ws.infer()?;
    print!("{}", ws.eval()?);
    let rows = ws.scale_experiment(false)?;
    println!("scale grid: {} rows in {}", rows.len(), ws.path("scale/grid.txt").display());
    for row in ws.sweep(SweepKind::Alpha)? {
        println!("alpha {:<5} stage2 {} records", row.alpha, row.stage2_records);
    }
    Ok(())
}

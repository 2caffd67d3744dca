//! Generate benchmark-shaped synthetic corpora (JSONL + manifest) into a directory.
//!
//!     cargo run --example synthesize_fixtures -- <out-dir> [seed] [--mini]

use std::path::PathBuf;

use erc_kit::fixtures::{mini, write_benchmark, BENCHMARKS};

fn main() -> erc_kit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let small = args.iter().any(|a| a == "--mini");
    let positional: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();
    let out = positional.first().map_or_else(|| std::env::temp_dir().join("erc-fixtures"), PathBuf::from);
    let seed = positional.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    for spec in BENCHMARKS {
        let spec = if small { mini(&spec) } else { spec };
        let (corpus, manifest) = write_benchmark(&out, &spec, seed)?;
        println!(
            "{:<9} {:>6} utterances  {} / {}",
            spec.dataset_id,
            spec.utterances.iter().sum::<usize>(),
            corpus.display(),
            manifest.display()
        );
    }
    Ok(())
}

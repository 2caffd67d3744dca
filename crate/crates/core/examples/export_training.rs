//! Write the stage-1 (speaker identification) and stage-2 (emotion + impact)
//! training files for the mini MELD fixture into a directory.
//!
//!     cargo run --example export_training -- [out-dir]

use std::path::{Path, PathBuf};

use erc_kit::corpus::{self, DatasetManifest, Split};
use erc_kit::embed::HashedNgram;
use erc_kit::export::{export_stage1, export_stage2, write_samples, Demonstrations, Stage2Options};
use erc_kit::jsonl::Header;
use erc_kit::prompt::Task;
use erc_kit::retrieval::{build_domain_base, Pairing};

fn main() -> erc_kit::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("erc-export"), PathBuf::from);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini");
    let manifest = DatasetManifest::load(&dir.join("MELD.manifest.json"))?;
    let train = corpus::ingest(&dir.join("MELD.jsonl"), &manifest)?.split(Split::Train);

    let embedder = HashedNgram::default();
    let index = build_domain_base(&train, &embedder, 1, &train.manifest().speaker_set)?;
    let demos = Demonstrations { index: &index, embedder: &embedder, pairing: Pairing::SameLabel };

    let stage1 = export_stage1(&train, None, 1);
    let stage2 = export_stage2(&train, &Stage2Options { window: 12, alpha: 0.1, seed: 1 }, Some(demos), None)?;
    let header = |kind: &str| Header { kind: kind.into(), config_hash: "example".into() };
    write_samples(&out.join("stage1.jsonl"), Some(&header("stage1")), &stage1)?;
    write_samples(&out.join("stage2.jsonl"), Some(&header("stage2")), &stage2)?;

    let impact = stage2.iter().filter(|s| s.task == Task::EmotionImpact).count();
    println!("stage1: {} records", stage1.len());
    println!("stage2: {} main + {} impact records", stage2.len() - impact, impact);
    println!("written to {}", out.display());
    Ok(())
}

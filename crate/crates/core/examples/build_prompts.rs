//! Render the three prompt kinds for one utterance: the main emotion
//! prompt, the speaker-identification prompt and the emotion-impact prompt.

use std::path::Path;

use erc_kit::corpus::{self, DatasetManifest};
use erc_kit::prompt::{build_impact_prompt, build_main_prompt, build_speaker_prompt, Demonstration, WindowSpec};

fn main() -> erc_kit::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini");
    let manifest = DatasetManifest::load(&dir.join("EmoryNLP.manifest.json"))?;
    let corpus = corpus::ingest(&dir.join("EmoryNLP.jsonl"), &manifest)?;
    let conv = &corpus.conversations()[0];
    let labels = &corpus.manifest().label_set;
    let index = 4;

    let demo = Demonstration { text: "Let's just relax for a while.".into(), label: "peaceful".into() };
    let main = build_main_prompt(conv, index, &WindowSpec::main(3), Some(&demo), labels);
    println!("--- main (w=3, with demonstration) -> {}\n{}\n", main.target_text, main.input_text);

    let speaker = build_speaker_prompt(conv, index, &corpus.manifest().speaker_set);
    println!("--- speaker identification -> {}\n{}\n", speaker.target_text, speaker.input_text);

    if let Ok(impact) = build_impact_prompt(conv, index, &WindowSpec::impact(3), labels, 0.1) {
        println!("--- emotion impact (weight {}) -> {}\n{}", impact.loss_weight, impact.target_text, impact.input_text);
    }
    Ok(())
}

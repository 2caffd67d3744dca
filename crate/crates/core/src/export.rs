//! Two-stage training files and inference prompt sets.
//!
//! Stage 1 holds one speaker-identification sample per utterance. Stage 2
//! holds one main-task sample per utterance (weight 1.0) plus one emotion
//! impact sample per non-initial utterance (weight `alpha`), so a trainer
//! summing `weight * loss` over the file optimizes `L_main + alpha * L_e`.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Address, Corpus};
use crate::embed::Embedder;
use crate::error::Result;
use crate::jsonl::{self, Header};
use crate::prompt::{
    build_impact_prompt, build_main_prompt, build_speaker_prompt, Demonstration, PromptSample, WindowSpec,
};
use crate::retrieval::{Pairing, RetrievalIndex};

/// Default weight of the emotion impact loss.
pub const DEFAULT_ALPHA: f64 = 0.1;

/// Weights explored by the alpha sweep.
pub const ALPHA_SWEEP: [f64; 4] = [0.0, 0.05, 0.1, 0.2];

/// Retrieval context for main-task prompts; `None` disables demonstrations.
#[derive(Clone, Copy)]
pub struct Demonstrations<'a> {
    pub index: &'a RetrievalIndex,
    pub embedder: &'a dyn Embedder,
    pub pairing: Pairing,
}

impl Demonstrations<'_> {
    fn for_utterance(&self, address: &Address, text: &str, gold: &str) -> Result<Demonstration> {
        let query = self.index.query(self.embedder, address, text, Some(gold))?;
        let entry = self.index.retrieve_top1(&query, self.pairing)?;
        Ok(Demonstration { text: entry.text.clone(), label: entry.label.clone() })
    }
}

fn selected(selection: Option<&HashSet<Address>>, address: &Address) -> bool {
    selection.is_none_or(|s| s.contains(address))
}

fn shuffled(mut samples: Vec<PromptSample>, seed: u64) -> Vec<PromptSample> {
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    samples
}

/// Speaker identification samples, seeded-shuffled. Candidates come from the
/// corpus manifest's speaker set (global ids for unified corpora).
pub fn export_stage1(corpus: &Corpus, selection: Option<&HashSet<Address>>, seed: u64) -> Vec<PromptSample> {
    let speakers = &corpus.manifest().speaker_set;
    let samples = corpus
        .utterances()
        .filter(|(c, u)| selected(selection, &c.address(u.index)))
        .map(|(c, u)| build_speaker_prompt(c, u.index, speakers))
        .collect();
    shuffled(samples, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage2Options {
    pub window: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for Stage2Options {
    fn default() -> Self {
        Stage2Options { window: crate::prompt::DEFAULT_WINDOW, alpha: DEFAULT_ALPHA, seed: 0 }
    }
}

/// Main-task and emotion impact samples, interleaved by a seeded shuffle.
pub fn export_stage2(
    corpus: &Corpus,
    options: &Stage2Options,
    demos: Option<Demonstrations<'_>>,
    selection: Option<&HashSet<Address>>,
) -> Result<Vec<PromptSample>> {
    assert!(options.alpha >= 0.0, "alpha must be nonnegative");
    let labels = &corpus.manifest().label_set;
    let main_spec = WindowSpec::main(options.window);
    let impact_spec = WindowSpec::impact(options.window);
    let mut samples = Vec::new();
    for (conv, u) in corpus.utterances() {
        let address = conv.address(u.index);
        if !selected(selection, &address) {
            continue;
        }
        let demo = match &demos {
            Some(d) => Some(d.for_utterance(&address, &u.text, &u.emotion)?),
            None => None,
        };
        samples.push(build_main_prompt(conv, u.index, &main_spec, demo.as_ref(), labels));
        if let Ok(impact) = build_impact_prompt(conv, u.index, &impact_spec, labels, options.alpha) {
            samples.push(impact);
        }
    }
    Ok(shuffled(samples, options.seed))
}

/// Main-task prompts for evaluation, in corpus order.
pub fn inference_prompts(
    corpus: &Corpus,
    window: usize,
    demos: Option<Demonstrations<'_>>,
) -> Result<Vec<PromptSample>> {
    let labels = &corpus.manifest().label_set;
    let spec = WindowSpec::main(window);
    corpus
        .utterances()
        .map(|(conv, u)| {
            let demo = match &demos {
                Some(d) => Some(d.for_utterance(&conv.address(u.index), &u.text, &u.emotion)?),
                None => None,
            };
            Ok(build_main_prompt(conv, u.index, &spec, demo.as_ref(), labels))
        })
        .collect()
}

pub fn write_samples(path: &Path, header: Option<&Header>, samples: &[PromptSample]) -> Result<()> {
    jsonl::write(path, header, samples)
}

pub fn read_samples(path: &Path) -> Result<Vec<PromptSample>> {
    jsonl::read(path)
}

//! Synthetic stand-ins for the IEMOCAP, MELD and EmoryNLP benchmarks.
//!
//! The generated corpora carry no real dialogue. They replicate the published
//! shape of each benchmark (label inventory, conversation and utterance
//! counts per split, two-person vs multi-party) so the whole pipeline can run
//! offline at realistic scale. Generation is seeded and byte-stable.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DatasetManifest, Split, SplitSizes, UtteranceRecord};
use crate::error::Result;
use crate::jsonl;
use crate::unify::LabelMapping;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkSpec {
    pub dataset_id: &'static str,
    pub labels: &'static [&'static str],
    pub speakers: &'static [&'static str],
    /// Conversations per split (train, val, test).
    pub conversations: [usize; 3],
    /// Utterances per split (train, val, test).
    pub utterances: [usize; 3],
    /// Exactly two speakers per conversation.
    pub two_person: bool,
    /// Relative label frequencies, aligned with `labels`.
    pub label_weights: &'static [u32],
}

const IEMOCAP_SPEAKERS: &[&str] =
    &["Ses01_F", "Ses01_M", "Ses02_F", "Ses02_M", "Ses03_F", "Ses03_M", "Ses04_F", "Ses04_M", "Ses05_F", "Ses05_M"];

const FRIENDS_SPEAKERS: &[&str] = &[
    "Ross", "Rachel", "Monica", "Chandler", "Joey", "Phoebe", "Gunther", "Janice", "Mike", "Emily", "Carol", "Richard",
];

pub const IEMOCAP: BenchmarkSpec = BenchmarkSpec {
    dataset_id: "IEMOCAP",
    labels: &["happy", "sad", "neutral", "angry", "excited", "scared"],
    speakers: IEMOCAP_SPEAKERS,
    conversations: [108, 12, 31],
    utterances: [5163, 647, 1623],
    two_person: true,
    label_weights: &[9, 15, 23, 17, 14, 22],
};

pub const MELD: BenchmarkSpec = BenchmarkSpec {
    dataset_id: "MELD",
    labels: &["joyful", "sad", "neutral", "angry", "surprise", "fear", "disgust"],
    speakers: FRIENDS_SPEAKERS,
    conversations: [1038, 114, 280],
    utterances: [9989, 1109, 2610],
    two_person: false,
    label_weights: &[17, 7, 47, 11, 12, 3, 3],
};

pub const EMORYNLP: BenchmarkSpec = BenchmarkSpec {
    dataset_id: "EmoryNLP",
    labels: &["joyful", "sad", "neutral", "mad", "powerful", "frustrated", "peaceful"],
    speakers: FRIENDS_SPEAKERS,
    conversations: [713, 99, 85],
    utterances: [9934, 1344, 1328],
    two_person: false,
    label_weights: &[22, 7, 32, 11, 9, 11, 8],
};

pub const BENCHMARKS: [BenchmarkSpec; 3] = [IEMOCAP, MELD, EMORYNLP];

/// Small variant of a benchmark: 3 train, 1 val and 2 test conversations,
/// 20 test utterances.
pub fn mini(spec: &BenchmarkSpec) -> BenchmarkSpec {
    BenchmarkSpec { conversations: [3, 1, 2], utterances: [30, 5, 20], ..*spec }
}

impl BenchmarkSpec {
    pub fn manifest(&self) -> DatasetManifest {
        let mut m = DatasetManifest::new(self.dataset_id, self.labels, self.speakers);
        m.split_sizes =
            Some(SplitSizes { train: self.utterances[0], val: self.utterances[1], test: self.utterances[2] });
        m
    }
}

fn phrases(category: &str) -> &'static [&'static str] {
    match category {
        "joyful" => &[
            "I am so happy for you",
            "This is great news",
            "I love this place",
            "That was fun",
            "What a wonderful day",
            "You made my whole week",
        ],
        "sad" => &[
            "I miss her so much",
            "I'm sorry it ended like this",
            "We lost the house",
            "It makes me want to cry",
            "Nothing feels right anymore",
        ],
        "mad" => &[
            "I hate when you do that",
            "That was a stupid idea",
            "I'm furious with him",
            "Stop touching my stuff",
            "You never listen to me",
        ],
        "excited" => &[
            "We finally got the tickets",
            "I'm so excited about tomorrow",
            "I'm thrilled, really",
            "Guess what, I got the job",
        ],
        "powerful" => &[
            "Wow, look at that",
            "I'm proud of what we built",
            "Seriously? You did that?",
            "No way, that's incredible",
        ],
        "fear" => &[
            "I'm scared of what happens next",
            "I'm worried about the test",
            "Something is wrong here",
            "I'm nervous about the interview",
        ],
        "peaceful" => {
            &["Let's just relax for a while", "It's calm out here", "Everything is fine now", "This is nice and quiet"]
        }
        "disgust" => &["That smells gross", "Ugh, that's disgusting", "Yuck, who made this", "I can't eat that"],
        _ => &[
            "I'll be there at six",
            "Did you get the mail",
            "The meeting moved to Tuesday",
            "Okay, see you later",
            "Where did you park",
            "Can you pass me that",
        ],
    }
}

fn split_lengths(rng: &mut ChaCha8Rng, conversations: usize, utterances: usize) -> Vec<usize> {
    if conversations == 0 {
        return Vec::new();
    }
    let base = utterances / conversations;
    let extra = utterances % conversations;
    let mut lengths: Vec<usize> = (0..conversations).map(|i| base + usize::from(i < extra)).collect();
    // Move turns between random pairs, keeping every conversation at two turns or more.
    for _ in 0..conversations {
        let i = rng.gen_range(0..conversations);
        let j = rng.gen_range(0..conversations);
        if i != j && lengths[i] > 2 {
            let k = rng.gen_range(0..=(lengths[i] - 2) / 2);
            lengths[i] -= k;
            lengths[j] += k;
        }
    }
    lengths
}

/// Generates all records of a benchmark-shaped corpus.
pub fn synthesize(spec: &BenchmarkSpec, seed: u64) -> Vec<UtteranceRecord> {
    let mapping = LabelMapping::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_weight: u32 = spec.label_weights.iter().sum();
    let mut records = Vec::with_capacity(spec.utterances.iter().sum());
    for (s, split) in Split::ALL.iter().enumerate() {
        let lengths = split_lengths(&mut rng, spec.conversations[s], spec.utterances[s]);
        let mut emitted = 0usize;
        for (c, len) in lengths.into_iter().enumerate() {
            let cast: Vec<&str> = if spec.two_person {
                let session = rng.gen_range(0..spec.speakers.len() / 2);
                vec![spec.speakers[2 * session], spec.speakers[2 * session + 1]]
            } else {
                let n = rng.gen_range(2..=4.min(spec.speakers.len()));
                spec.speakers.choose_multiple(&mut rng, n).copied().collect()
            };
            for index in 0..len {
                // Cycle through every label first so small splits still cover the inventory.
                let label_idx = if emitted < 2 * spec.labels.len() {
                    emitted % spec.labels.len()
                } else {
                    let mut pick = rng.gen_range(0..total_weight);
                    spec.label_weights
                        .iter()
                        .position(|w| {
                            if pick < *w {
                                true
                            } else {
                                pick -= w;
                                false
                            }
                        })
                        .expect("weights cover range")
                };
                emitted += 1;
                let label = spec.labels[label_idx];
                let category = mapping.map_emotion(spec.dataset_id, label).unwrap_or("neutral");
                let speaker =
                    if spec.two_person { cast[index % 2] } else { *cast.choose(&mut rng).expect("non-empty cast") };
                let mut text = phrases(category).choose(&mut rng).expect("non-empty").to_string();
                if rng.gen_bool(0.15) {
                    let other = cast.iter().find(|n| **n != speaker).copied().unwrap_or(speaker);
                    text = format!("{other}, {}{}", text[..1].to_lowercase(), &text[1..]);
                }
                if text.ends_with(char::is_alphanumeric) {
                    text.push(['.', '.', '!'][rng.gen_range(0..3)]);
                }
                records.push(UtteranceRecord {
                    dataset: spec.dataset_id.to_string(),
                    conv_id: format!("{}_{}_{:04}", spec.dataset_id.to_lowercase(), split, c),
                    split: *split,
                    index,
                    speaker: speaker.to_string(),
                    text,
                    emotion: label.to_string(),
                });
            }
        }
    }
    records
}

/// Writes `<dataset>.jsonl` and `<dataset>.manifest.json` into `dir`.
pub fn write_benchmark(dir: &Path, spec: &BenchmarkSpec, seed: u64) -> Result<(PathBuf, PathBuf)> {
    let corpus_path = dir.join(format!("{}.jsonl", spec.dataset_id));
    let manifest_path = dir.join(format!("{}.manifest.json", spec.dataset_id));
    jsonl::write(&corpus_path, None, &synthesize(spec, seed))?;
    spec.manifest().save(&manifest_path)?;
    Ok((corpus_path, manifest_path))
}

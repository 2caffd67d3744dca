//! Prompt texts compared byte-for-byte against files in fixtures/golden.
//! Set `ERC_UPDATE_GOLDEN=1` to rewrite them after an intended format change.

mod common;

use erc_kit::corpus::{self, Corpus, DatasetManifest, Split};
use erc_kit::embed::HashedNgram;
use erc_kit::export::{inference_prompts, Demonstrations};
use erc_kit::prompt::{build_impact_prompt, build_speaker_prompt, WindowSpec, DEMONSTRATION_HEADER};
use erc_kit::retrieval::{build_domain_base, Pairing};
use erc_kit::unify::{self, LabelMapping};

use common::*;

fn check(name: &str, actual: &str) {
    let path = fixture_dir("golden").join(name);
    if std::env::var_os("ERC_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from golden file:\n{actual}");
}

fn meld() -> Corpus {
    let dir = fixture_dir("mini");
    let manifest = DatasetManifest::load(&dir.join("MELD.manifest.json")).unwrap();
    corpus::ingest(&dir.join("MELD.jsonl"), &manifest).unwrap()
}

fn unified() -> Corpus {
    let dir = fixture_dir("mini");
    let corpora: Vec<Corpus> = DATASETS
        .iter()
        .map(|d| {
            let m = DatasetManifest::load(&dir.join(format!("{d}.manifest.json"))).unwrap();
            corpus::ingest(&dir.join(format!("{d}.jsonl")), &m).unwrap()
        })
        .collect();
    let manifests: Vec<&DatasetManifest> = corpora.iter().map(Corpus::manifest).collect();
    let registry = unify::build_registry(&manifests).unwrap();
    unify::unify_corpus(&corpora, &LabelMapping::reference(), &registry).unwrap()
}

#[test]
fn main_prompt_with_demonstration() {
    let c = meld();
    let e = HashedNgram::default();
    let names = c.manifest().speaker_set.clone();
    let index = build_domain_base(&c.split(Split::Train), &e, 0, &names).unwrap();
    let demos = Demonstrations { index: &index, embedder: &e, pairing: Pairing::AllLabels };
    let prompts = inference_prompts(&c.split(Split::Test), 12, Some(demos)).unwrap();
    let s = &prompts[4];
    check("meld_test_main_w12_demo.txt", &s.input_text);
    let tail = s.input_text.rsplit(DEMONSTRATION_HEADER).next().unwrap();
    let mut lines = tail.trim_start_matches('\n').lines();
    let (text, label) = (lines.next().unwrap(), lines.next().unwrap());
    assert!(index.entries().iter().any(|x| x.text == text && x.label == label));
    assert_eq!(inference_prompts(&c.split(Split::Test), 12, Some(demos)).unwrap()[4], *s);
}

#[test]
fn main_prompt_window_one() {
    let c = meld();
    let prompts = inference_prompts(&c.split(Split::Test), 1, None).unwrap();
    let s = &prompts[3];
    check("meld_test_main_w1.txt", &s.input_text);
    assert_eq!(s.input_text.lines().filter(|l| l.starts_with("Speaker_")).count(), 1);
    let labels = c.manifest().label_set.join(", ");
    assert!(s.input_text.ends_with(&format!("from <{labels}>:")));
}

#[test]
fn unified_speaker_prompt() {
    let u = unified();
    let conv = &u.conversations()[0];
    let s = build_speaker_prompt(conv, 1, &u.manifest().speaker_set);
    check("uime_speaker.txt", &format!("{}\n=> {}\n", s.input_text, s.target_text));
}

#[test]
fn impact_prompt() {
    let c = meld();
    let conv = &c.conversations()[1];
    let s = build_impact_prompt(conv, 3, &WindowSpec::impact(12), &c.manifest().label_set, 0.1).unwrap();
    check("meld_impact_w12.txt", &format!("{}\n=> {} (weight {})\n", s.input_text, s.target_text, s.loss_weight));
}

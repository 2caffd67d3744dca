mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use erc_kit::corpus::{self, Address, Conversation, Corpus, DatasetManifest, Split, Utterance};
use erc_kit::embed::{cosine, Embedder, HashedNgram};
use erc_kit::eval::{parse_prediction, weighted_f1, Prediction};
use erc_kit::mixing::{self, Fraction, MixPlan, Strategy as Mix};
use erc_kit::prompt::{build_main_prompt, WindowSpec};
use erc_kit::retrieval::{strip_speaker_names, DomainEntry, Pairing, Query, RetrievalIndex};
use erc_kit::unify::{self, LabelMapping};

use common::*;

const LABELS: [&str; 3] = ["sad", "mad", "calm"];
const SPEAKERS: [&str; 3] = ["Ann", "Bob", "Cy"];
const WORDS: [&str; 8] = ["hello", "there", "sad", "day", "oh", "no", "fine", "ok"];

prop_compose! {
    fn utterance_text()(words in prop::collection::vec(prop::sample::select(&WORDS[..]), 1..6)) -> String {
        words.join(" ")
    }
}

prop_compose! {
    fn conversation(dataset: &'static str, c: usize)
        (turns in prop::collection::vec((0..3usize, 0..3usize, utterance_text()), 1..10),
         split in prop::sample::select(&Split::ALL[..])) -> Conversation {
        Conversation {
            id: format!("c{c}"),
            dataset_id: dataset.into(),
            split,
            utterances: turns
                .into_iter()
                .enumerate()
                .map(|(i, (s, l, text))| Utterance {
                    index: i,
                    speaker: SPEAKERS[s].into(),
                    text,
                    emotion: LABELS[l].into(),
                })
                .collect(),
        }
    }
}

fn corpus_strategy(dataset: &'static str) -> impl Strategy<Value = Corpus> {
    (1..8usize).prop_flat_map(move |n| (0..n).map(|c| conversation(dataset, c)).collect::<Vec<_>>()).prop_map(
        move |convs| Corpus::from_conversations(DatasetManifest::new(dataset, &LABELS, &SPEAKERS), convs).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_jsonl_round_trip(c in corpus_strategy("D")) {
        let text = c.to_jsonl().unwrap();
        let back = corpus::ingest_reader(text.as_bytes(), c.manifest()).unwrap();
        prop_assert_eq!(back.records(), c.records());
        prop_assert!(back.utterances().all(|(_, u)| c.manifest().has_label(&u.emotion)));
    }

    #[test]
    fn stats_recount(c in corpus_strategy("D")) {
        let stats = c.stats();
        for split in Split::ALL {
            let part = c.split(split);
            let s = stats.get(split);
            prop_assert_eq!(s.conversations, part.conversations().len());
            prop_assert_eq!(s.utterances, part.utterance_count());
            let labels: HashSet<_> = part.utterances().map(|(_, u)| u.emotion.clone()).collect();
            prop_assert_eq!(s.classes, labels.len());
        }
        let total: usize = Split::ALL.iter().map(|s| stats.get(*s).utterances).sum();
        prop_assert_eq!(total, c.utterance_count());
    }

    #[test]
    fn unify_keeps_every_utterance(a in corpus_strategy("IEMOCAP"), b in corpus_strategy("MELD")) {
        // Relabel into each dataset's own inventory first.
        let relabel = |c: &Corpus, labels: &[&str]| {
            let manifest = DatasetManifest::new(c.manifest().dataset_id.clone(), labels, &SPEAKERS);
            let convs = c.conversations().iter().cloned().map(|mut conv| {
                for u in &mut conv.utterances {
                    let k = LABELS.iter().position(|l| *l == u.emotion).unwrap();
                    u.emotion = labels[k].to_string();
                }
                conv
            }).collect();
            Corpus::from_conversations(manifest, convs).unwrap()
        };
        let a = relabel(&a, &["happy", "sad", "angry"]);
        let b = relabel(&b, &["surprise", "neutral", "disgust"]);
        let registry = unify::build_registry(&[a.manifest(), b.manifest()]).unwrap();
        let u = unify::unify_corpus(&[a.clone(), b.clone()], &LabelMapping::reference(), &registry).unwrap();
        prop_assert_eq!(u.utterance_count(), a.utterance_count() + b.utterance_count());
        prop_assert!(u.utterances().all(|(_, x)| u.manifest().has_label(&x.emotion)));
        let ids: HashSet<u32> = u.utterances().map(|(_, x)| x.speaker.parse().unwrap()).collect();
        prop_assert!(ids.iter().all(|id| (1..=6).contains(id)));
    }

    #[test]
    fn retrieval_ignores_entry_order(
        vectors in prop::collection::vec((prop::collection::vec(-2i32..=2, 8), 0..3usize), 1..30),
        query in prop::collection::vec(-2i32..=2, 8),
        seed in any::<u64>(),
    ) {
        let entries: Vec<DomainEntry> = vectors.iter().enumerate().map(|(i, (v, l))| {
            let mut v: Vec<f64> = v.iter().map(|x| f64::from(*x)).collect();
            if v.iter().all(|x| *x == 0.0) { v[0] = 1.0; }
            erc_kit::embed::normalize(&mut v);
            DomainEntry {
                id: i as u32,
                source: Address { dataset: "D".into(), conv_id: "c".into(), index: i },
                text: String::new(),
                label: LABELS[*l].into(),
                vector: v,
            }
        }).collect();
        let mut shuffled = entries.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let labels = strings(&LABELS);
        let a = RetrievalIndex::from_entries("t", 8, labels.clone(), entries).unwrap();
        let b = RetrievalIndex::from_entries("t", 8, labels, shuffled).unwrap();
        let q = Query::new(None, query.iter().map(|x| f64::from(*x)).collect(), Some("sad"));
        prop_assume!(q.vector.iter().any(|x| *x != 0.0));
        for pairing in [Pairing::SameLabel, Pairing::AllLabels] {
            let x = a.retrieve_top1(&q, pairing).ok().map(|e| e.id);
            let y = b.retrieve_top1(&q, pairing).ok().map(|e| e.id);
            prop_assert_eq!(x, y);
            if pairing == Pairing::SameLabel {
                if let Some(id) = x {
                    prop_assert_eq!(&a.entries()[id as usize].label, "sad");
                }
            }
        }
        let ranked = a.retrieve(&q, Pairing::AllLabels, 5).unwrap();
        prop_assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        prop_assert_eq!(ranked[0].0.id, a.retrieve_top1(&q, Pairing::AllLabels).unwrap().id);
    }

    #[test]
    fn stripping_removes_names_and_is_idempotent(text in "[A-Za-z ,.!]{0,40}", name in prop::sample::select(&["Ann", "Bob", "Mary Jane"][..])) {
        let names = vec![name.to_string()];
        let text = format!("{text} {name}, {} said {}", name.to_uppercase(), name.to_lowercase());
        let once = strip_speaker_names(&text, &names);
        prop_assert_eq!(strip_speaker_names(&once, &names), once.clone());
        let words: Vec<String> = once.split(|c: char| !c.is_alphanumeric()).map(str::to_lowercase).collect();
        let first = name.split(' ').next().unwrap().to_lowercase();
        prop_assert!(!words.contains(&first) || name.contains(' '), "{}", once);
    }

    #[test]
    fn hashed_embeddings_are_unit_and_bounded(a in "[a-z ]{0,30}", b in "[a-z ]{0,30}") {
        let signed = HashedNgram::default();
        let unsigned = HashedNgram { signed: false, ..HashedNgram::default() };
        for e in [&signed, &unsigned] {
            let x = e.embed("x", &a).unwrap();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-9);
        }
        let cu = cosine(&unsigned.embed_text(&a), &unsigned.embed_text(&b));
        prop_assert!((0.0..=1.0).contains(&cu), "{}", cu);
        let cs = cosine(&signed.embed_text(&a), &signed.embed_text(&b));
        prop_assert!((-1.0..=1.0).contains(&cs));
    }

    #[test]
    fn mixing_sizes_are_floors(
        sizes in prop::collection::vec(1..60usize, 1..4),
        den_pow in 0..7u32,
        seed in any::<u64>(),
    ) {
        let ids = ["A", "B", "C"];
        let corpora: Vec<Corpus> = sizes.iter().zip(ids).map(|(&n, id)| {
            let manifest = DatasetManifest::new(id, &["sad"], &["p", "q"]);
            let conv = Conversation {
                id: "c".into(),
                dataset_id: id.into(),
                split: Split::Train,
                utterances: (0..n).map(|i| Utterance {
                    index: i, speaker: ["p", "q"][i % 2].into(), text: "x".into(), emotion: "sad".into(),
                }).collect(),
            };
            Corpus::from_conversations(manifest, vec![conv]).unwrap()
        }).collect();
        let mut manifest = DatasetManifest::new("POOL", &["sad"], &["p", "q"]);
        manifest.member_datasets = ids[..sizes.len()].iter().map(|s| s.to_string()).collect();
        let convs = corpora.iter().flat_map(|c| c.conversations().to_vec()).collect();
        let pool = Corpus::from_conversations(manifest, convs).unwrap();
        let f = Fraction::new(1, 1 << den_pow).unwrap();
        let expected: usize = sizes.iter().map(|&n| n >> den_pow).sum();
        for strategy in [Mix::Total, Mix::Ratio] {
            let plan = MixPlan { strategy: strategy.clone(), fraction: f, seed };
            let s = mixing::sample(&pool, &plan).unwrap();
            prop_assert_eq!(s.len(), expected);
            prop_assert_eq!(s.addresses.iter().collect::<HashSet<_>>().len(), expected);
            prop_assert_eq!(&s, &mixing::sample(&pool, &plan).unwrap());
        }
    }

    #[test]
    fn weighted_f1_matches_oracle_and_permutations(
        pairs in prop::collection::vec((0..4usize, prop::option::weighted(0.85, 0..4usize)), 1..40),
        rotate in 0..40usize,
    ) {
        let labels = ["w", "x", "y", "z"];
        let gold: Vec<&str> = pairs.iter().map(|p| labels[p.0]).collect();
        let pred: Vec<Option<&str>> = pairs.iter().map(|p| p.1.map(|k| labels[k])).collect();
        let r = weighted_f1(&strings(&gold), &to_predictions(&pred), &strings(&labels)).unwrap();
        prop_assert!((r.weighted_f1 - oracle_weighted_f1(&gold, &pred, &labels)).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&r.weighted_f1));

        let k = rotate % gold.len();
        let (mut g2, mut p2) = (gold.clone(), pred.clone());
        g2.rotate_left(k);
        p2.rotate_left(k);
        let r2 = weighted_f1(&strings(&g2), &to_predictions(&p2), &strings(&labels)).unwrap();
        prop_assert!((r.weighted_f1 - r2.weighted_f1).abs() <= 1e-12);

        // Voiding a correct prediction never helps.
        if let Some(i) = (0..gold.len()).find(|&i| pred[i] == Some(gold[i])) {
            let mut p3 = pred.clone();
            p3[i] = None;
            let r3 = weighted_f1(&strings(&gold), &to_predictions(&p3), &strings(&labels)).unwrap();
            prop_assert!(r3.weighted_f1 <= r.weighted_f1 + 1e-12);
            prop_assert_eq!(r3.unparseable_count, r.unparseable_count + 1);
        }
    }

    #[test]
    fn decorated_labels_parse(label in prop::sample::select(&LABELS[..]), pre in "[ \t\"'<(]{0,3}", post in "[ .!\"'>)]{0,3}", upper in any::<bool>()) {
        let body = if upper { label.to_uppercase() } else { label.to_string() };
        let text = format!("{pre}{body}{post}\nsomething else");
        prop_assert_eq!(parse_prediction(&text, &strings(&LABELS)), Prediction::Label(label.to_string()));
    }

    #[test]
    fn history_lines_follow_window(c in corpus_strategy("D"), w in 1..15usize) {
        let conv = &c.conversations()[0];
        for u in &conv.utterances {
            let s = build_main_prompt(conv, u.index, &WindowSpec::main(w), None, &c.manifest().label_set);
            let lines = s.input_text.lines().filter(|l| l.starts_with("Speaker_")).count();
            prop_assert_eq!(lines, w.min(u.index + 1));
            prop_assert!(s.input_text.ends_with(":"));
            prop_assert_eq!(&s.target_text, &u.emotion);
        }
    }

    #[test]
    fn fraction_round_trip(num in 1..20u64, den in 1..70u64, n in 0..100_000usize) {
        prop_assume!(num <= den);
        let f = Fraction::new(num, den).unwrap();
        let back: Fraction = f.to_string().parse().unwrap();
        prop_assert_eq!(back.of(n), f.of(n));
        prop_assert_eq!(f.of(n), (n as u64 * num / den) as usize);
    }
}

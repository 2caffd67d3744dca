//! Unified label space across benchmarks and globally numbered speakers.
//!
//! The shipped mapping (`data/label_mapping.tsv`) folds the IEMOCAP, MELD and
//! EmoryNLP label inventories onto nine feeling-wheel categories. Speakers are
//! renumbered so that every dataset occupies its own contiguous id range.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::{Conversation, Corpus, DatasetManifest, Utterance};
use crate::error::{Error, Result};

/// Unified label inventory, in canonical order.
pub const UNIFIED_LABELS: [&str; 9] =
    ["joyful", "sad", "neutral", "mad", "excited", "powerful", "fear", "peaceful", "disgust"];

/// Dataset id given to merged corpora.
pub const UNIFIED_DATASET_ID: &str = "UIME";

const REFERENCE_TABLE: &str = include_str!("../data/label_mapping.tsv");

/// SHA-256 over the sorted, tab-joined rows of the reference table.
pub const REFERENCE_CHECKSUM: &str = "75d37022cd6ad05bcf987d62543d56bf12a1817fdea03478f1588c9537f7fef0";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    rows: BTreeMap<(String, String), String>,
    unified_set: Vec<String>,
}

impl LabelMapping {
    /// The built-in three-benchmark table, verified against its checksum.
    pub fn reference() -> Self {
        let mapping = Self::parse(REFERENCE_TABLE).expect("embedded mapping table parses");
        assert_eq!(mapping.checksum(), REFERENCE_CHECKSUM, "embedded mapping table was modified");
        mapping
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `dataset_id<TAB>source_label<TAB>unified_label` rows. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [dataset, source, unified] = fields[..] else {
                return Err(Error::MappingTable(format!("line {}: expected 3 tab-separated fields", i + 1)));
            };
            if !UNIFIED_LABELS.contains(&unified) {
                return Err(Error::MappingTable(format!("line {}: {unified:?} is not a unified label", i + 1)));
            }
            let key = (dataset.to_string(), source.to_string());
            if rows.insert(key, unified.to_string()).is_some() {
                return Err(Error::MappingTable(format!("line {}: duplicate row for {dataset}/{source}", i + 1)));
            }
        }
        Ok(LabelMapping { rows, unified_set: UNIFIED_LABELS.iter().map(|s| s.to_string()).collect() })
    }

    pub fn checksum(&self) -> String {
        let mut canonical = String::new();
        for ((dataset, source), unified) in &self.rows {
            let _ = writeln!(canonical, "{dataset}\t{source}\t{unified}");
        }
        hex(&Sha256::digest(canonical.as_bytes()))
    }

    pub fn unified_set(&self) -> &[String] {
        &self.unified_set
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.rows.iter().map(|((d, s), u)| (d.as_str(), s.as_str(), u.as_str()))
    }

    pub fn map_emotion(&self, dataset_id: &str, source_label: &str) -> Result<&str> {
        self.rows
            .get(&(dataset_id.to_string(), source_label.to_string()))
            .map(String::as_str)
            .ok_or_else(|| Error::UnknownLabel { dataset: dataset_id.to_string(), label: source_label.to_string() })
    }

    /// Warnings for manifest labels that have no row in the table.
    pub fn check_manifest(&self, manifest: &DatasetManifest) -> Vec<String> {
        manifest
            .label_set
            .iter()
            .filter(|l| self.map_emotion(&manifest.dataset_id, l).is_err())
            .map(|l| format!("{}: label {l:?} has no unified mapping", manifest.dataset_id))
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# dataset_id\tsource_label\tunified_label\n");
        for (d, s, u) in self.rows() {
            let _ = writeln!(out, "{d}\t{s}\t{u}");
        }
        out
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRange {
    pub dataset_id: String,
    /// First global id (1-based).
    pub start: u32,
    pub len: u32,
}

/// Global speaker numbering across datasets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerRegistry {
    ranges: Vec<DatasetRange>,
    ids: BTreeMap<(String, String), u32>,
}

impl SpeakerRegistry {
    pub fn ranges(&self) -> &[DatasetRange] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn global_id(&self, dataset_id: &str, speaker: &str) -> Result<u32> {
        self.ids
            .get(&(dataset_id.to_string(), speaker.to_string()))
            .copied()
            .ok_or_else(|| Error::UnknownSpeaker { dataset: dataset_id.to_string(), speaker: speaker.to_string() })
    }

    /// All `(dataset_id, speaker_name, global_id)` rows ordered by id.
    pub fn rows(&self) -> Vec<(&str, &str, u32)> {
        let mut rows: Vec<_> = self.ids.iter().map(|((d, s), id)| (d.as_str(), s.as_str(), *id)).collect();
        rows.sort_by_key(|r| r.2);
        rows
    }

    /// Original speaker names, for scrubbing them out of utterance text.
    pub fn speaker_names(&self) -> Vec<String> {
        self.ids.keys().map(|(_, s)| s.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# dataset_id\tspeaker_name\tglobal_id\n");
        for (d, s, id) in self.rows() {
            let _ = writeln!(out, "{d}\t{s}\t{id}");
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut ranges: Vec<DatasetRange> = Vec::new();
        let mut ids = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad =
                || Error::MalformedLine { line: i + 1, message: "expected dataset_id, speaker_name, global_id".into() };
            let fields: Vec<&str> = line.split('\t').collect();
            let [dataset, speaker, id] = fields[..] else {
                return Err(bad());
            };
            let id: u32 = id.trim().parse().map_err(|_| bad())?;
            match ranges.last_mut() {
                Some(r) if r.dataset_id == dataset && r.start + r.len == id => r.len += 1,
                _ => ranges.push(DatasetRange { dataset_id: dataset.to_string(), start: id, len: 1 }),
            }
            if ids.insert((dataset.to_string(), speaker.to_string()), id).is_some() {
                return Err(Error::DuplicateSpeaker { dataset: dataset.to_string(), speaker: speaker.to_string() });
            }
        }
        Ok(SpeakerRegistry { ranges, ids })
    }
}

/// Numbers speakers 1..n1 for the first dataset, n1+1..n1+n2 for the second, and so on,
/// following each manifest's speaker order.
pub fn build_registry(manifests: &[&DatasetManifest]) -> Result<SpeakerRegistry> {
    let mut ranges = Vec::with_capacity(manifests.len());
    let mut ids = BTreeMap::new();
    let mut next: u32 = 1;
    for m in manifests {
        if ranges.iter().any(|r: &DatasetRange| r.dataset_id == m.dataset_id) {
            return Err(Error::InvalidManifest(format!("dataset {} listed twice", m.dataset_id)));
        }
        let start = next;
        for speaker in &m.speaker_set {
            if ids.insert((m.dataset_id.clone(), speaker.clone()), next).is_some() {
                return Err(Error::DuplicateSpeaker { dataset: m.dataset_id.clone(), speaker: speaker.clone() });
            }
            next += 1;
        }
        ranges.push(DatasetRange { dataset_id: m.dataset_id.clone(), start, len: next - start });
    }
    Ok(SpeakerRegistry { ranges, ids })
}

/// Merges corpora into one unified-label corpus with global speaker ids.
///
/// Conversations keep their source `dataset_id`; text and ordering are untouched.
pub fn unify_corpus(corpora: &[Corpus], mapping: &LabelMapping, registry: &SpeakerRegistry) -> Result<Corpus> {
    let members: Vec<String> = corpora.iter().map(|c| c.manifest().dataset_id.clone()).collect();
    let manifest = DatasetManifest {
        dataset_id: UNIFIED_DATASET_ID.to_string(),
        label_set: mapping.unified_set().to_vec(),
        speaker_set: registry.rows().iter().map(|r| r.2.to_string()).collect(),
        member_datasets: members,
        split_sizes: None,
    };
    let mut conversations = Vec::with_capacity(corpora.iter().map(|c| c.conversations().len()).sum());
    for corpus in corpora {
        for conv in corpus.conversations() {
            let mut utterances = Vec::with_capacity(conv.len());
            for u in &conv.utterances {
                let at = |e| Error::at(&conv.address(u.index), e);
                let emotion = mapping.map_emotion(&conv.dataset_id, &u.emotion).map_err(at)?;
                let speaker = registry.global_id(&conv.dataset_id, &u.speaker).map_err(at)?;
                utterances.push(Utterance {
                    index: u.index,
                    speaker: speaker.to_string(),
                    text: u.text.clone(),
                    emotion: emotion.to_string(),
                });
            }
            conversations.push(Conversation {
                id: conv.id.clone(),
                dataset_id: conv.dataset_id.clone(),
                split: conv.split,
                utterances,
            });
        }
    }
    if conversations.is_empty() {
        return Ok(Corpus::empty(manifest));
    }
    Corpus::from_conversations(manifest, conversations)
}

//! Conversation datasets: ingestion, validation, addressing and split statistics.
//!
//! A corpus file holds one utterance per line:
//!
//! ```text
//! {"dataset":"MELD","conv_id":"d17","split":"train","index":0,"speaker":"Ross","text":"Hi.","emotion":"neutral"}
//! ```
//!
//! Lines of one conversation appear in `index` order starting at 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl::{self, Header};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "dev" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Globally unique location of an utterance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Address {
    pub dataset: String,
    pub conv_id: String,
    pub index: usize,
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.dataset, self.conv_id, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: usize,
    pub speaker: String,
    pub text: String,
    pub emotion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub dataset_id: String,
    pub split: Split,
    pub utterances: Vec<Utterance>,
}

impl Conversation {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn address(&self, index: usize) -> Address {
        Address { dataset: self.dataset_id.clone(), conv_id: self.id.clone(), index }
    }

    /// Number of distinct speakers.
    pub fn speaker_count(&self) -> usize {
        self.utterances.iter().map(|u| u.speaker.as_str()).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Declares a dataset's label and speaker inventories.
///
/// `member_datasets` is non-empty only for merged corpora, whose conversations
/// keep the id of the dataset they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub label_set: Vec<String>,
    #[serde(default)]
    pub speaker_set: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub member_datasets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_sizes: Option<SplitSizes>,
}

impl DatasetManifest {
    pub fn new(dataset_id: impl Into<String>, labels: &[&str], speakers: &[&str]) -> Self {
        DatasetManifest {
            dataset_id: dataset_id.into(),
            label_set: labels.iter().map(|s| s.to_string()).collect(),
            speaker_set: speakers.iter().map(|s| s.to_string()).collect(),
            member_datasets: Vec::new(),
            split_sizes: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_set.is_empty() {
            return Err(Error::InvalidManifest(format!("{}: empty label set", self.dataset_id)));
        }
        if let Some(dup) = first_duplicate(&self.label_set) {
            return Err(Error::InvalidManifest(format!("{}: duplicate label {dup:?}", self.dataset_id)));
        }
        if let Some(dup) = first_duplicate(&self.speaker_set) {
            return Err(Error::DuplicateSpeaker { dataset: self.dataset_id.clone(), speaker: dup.to_string() });
        }
        Ok(())
    }

    /// Number of emotion categories.
    pub fn label_count(&self) -> usize {
        self.label_set.len()
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.label_set.iter().any(|l| l == label)
    }

    fn admits_dataset(&self, dataset: &str) -> bool {
        dataset == self.dataset_id || self.member_datasets.iter().any(|d| d == dataset)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        write_file(path, &text)
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn first_duplicate(items: &[String]) -> Option<&str> {
    let mut seen = BTreeSet::new();
    items.iter().find(|item| !seen.insert(item.as_str())).map(String::as_str)
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub dataset: String,
    pub conv_id: String,
    pub split: Split,
    pub index: usize,
    pub speaker: String,
    pub text: String,
    pub emotion: String,
}

/// Validated, immutable set of conversations sharing one manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    manifest: DatasetManifest,
    conversations: Vec<Conversation>,
    warnings: Vec<String>,
}

impl Corpus {
    pub fn empty(manifest: DatasetManifest) -> Self {
        Corpus { manifest, conversations: Vec::new(), warnings: Vec::new() }
    }

    /// Builds a corpus from in-memory conversations, applying the same checks as ingestion.
    pub fn from_conversations(manifest: DatasetManifest, conversations: Vec<Conversation>) -> Result<Self> {
        let records: Vec<UtteranceRecord> = conversations.iter().flat_map(to_records).collect();
        build(manifest, records.into_iter().enumerate().map(|(i, r)| (i + 1, r)))
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn conversations(&self) -> &[Conversation] {
        &self.conversations
    }

    /// Non-fatal findings from ingestion, such as single-speaker conversations.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_empty(&self) -> bool {
        self.conversations.is_empty()
    }

    pub fn utterance_count(&self) -> usize {
        self.conversations.iter().map(Conversation::len).sum()
    }

    /// Iterates over every utterance together with its conversation.
    pub fn utterances(&self) -> impl Iterator<Item = (&Conversation, &Utterance)> {
        self.conversations.iter().flat_map(|c| c.utterances.iter().map(move |u| (c, u)))
    }

    /// Restricts the corpus to one split.
    pub fn split(&self, split: Split) -> Corpus {
        self.filter(|c| c.split == split)
    }

    /// Restricts the corpus to conversations originating from one dataset.
    pub fn source(&self, dataset: &str) -> Corpus {
        self.filter(|c| c.dataset_id == dataset)
    }

    fn filter(&self, keep: impl Fn(&Conversation) -> bool) -> Corpus {
        Corpus {
            manifest: self.manifest.clone(),
            conversations: self.conversations.iter().filter(|c| keep(c)).cloned().collect(),
            warnings: Vec::new(),
        }
    }

    /// Source dataset ids in order of first appearance.
    pub fn source_datasets(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.conversations {
            if !out.contains(&c.dataset_id) {
                out.push(c.dataset_id.clone());
            }
        }
        out
    }

    pub fn conversation(&self, dataset: &str, conv_id: &str) -> Option<&Conversation> {
        self.conversations.iter().find(|c| c.dataset_id == dataset && c.id == conv_id)
    }

    /// Lookup table from (dataset, conversation id) to conversation.
    pub fn conversation_index(&self) -> HashMap<(&str, &str), &Conversation> {
        self.conversations.iter().map(|c| ((c.dataset_id.as_str(), c.id.as_str()), c)).collect()
    }

    pub fn records(&self) -> Vec<UtteranceRecord> {
        self.conversations.iter().flat_map(to_records).collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        jsonl::to_string(None, &self.records())
    }

    pub fn save(&self, path: &Path, header: Option<&Header>) -> Result<()> {
        jsonl::write(path, header, &self.records())
    }

    pub fn stats(&self) -> CorpusStats {
        stats(self)
    }
}

fn to_records(c: &Conversation) -> Vec<UtteranceRecord> {
    c.utterances
        .iter()
        .map(|u| UtteranceRecord {
            dataset: c.dataset_id.clone(),
            conv_id: c.id.clone(),
            split: c.split,
            index: u.index,
            speaker: u.speaker.clone(),
            text: u.text.clone(),
            emotion: u.emotion.clone(),
        })
        .collect()
}

/// Reads and validates a corpus file against its manifest.
pub fn ingest(path: &Path, manifest: &DatasetManifest) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(std::io::BufReader::new(file), manifest)
}

pub fn ingest_reader(reader: impl BufRead, manifest: &DatasetManifest) -> Result<Corpus> {
    let (_, records) = jsonl::parse_numbered::<UtteranceRecord>(reader)?;
    build(manifest.clone(), records.into_iter())
}

fn build(mut manifest: DatasetManifest, records: impl Iterator<Item = (usize, UtteranceRecord)>) -> Result<Corpus> {
    manifest.validate()?;
    let derive_speakers = manifest.speaker_set.is_empty();
    let known_speakers: BTreeSet<String> = manifest.speaker_set.iter().cloned().collect();
    let mut derived_speakers: Vec<String> = Vec::new();

    let mut conversations: Vec<Conversation> = Vec::new();
    let mut slot: HashMap<(String, String), usize> = HashMap::new();

    for (line, r) in records {
        if !manifest.admits_dataset(&r.dataset) {
            return Err(Error::MalformedLine {
                line,
                message: format!("dataset {:?} does not match manifest {:?}", r.dataset, manifest.dataset_id),
            });
        }
        if r.text.trim().is_empty() {
            return Err(Error::MalformedLine { line, message: format!("empty text for {}#{}", r.conv_id, r.index) });
        }
        if !manifest.has_label(&r.emotion) {
            return Err(Error::LabelOutsideManifest { line, dataset: manifest.dataset_id.clone(), label: r.emotion });
        }
        if derive_speakers {
            if !derived_speakers.contains(&r.speaker) {
                derived_speakers.push(r.speaker.clone());
            }
        } else if !known_speakers.contains(&r.speaker) {
            return Err(Error::UnknownSpeaker { dataset: manifest.dataset_id.clone(), speaker: r.speaker });
        }

        let key = (r.dataset.clone(), r.conv_id.clone());
        let pos = *slot.entry(key).or_insert_with(|| {
            conversations.push(Conversation {
                id: r.conv_id.clone(),
                dataset_id: r.dataset.clone(),
                split: r.split,
                utterances: Vec::new(),
            });
            conversations.len() - 1
        });
        let conv = &mut conversations[pos];
        if conv.split != r.split {
            return Err(Error::MalformedLine {
                line,
                message: format!("conversation {} appears in splits {} and {}", r.conv_id, conv.split, r.split),
            });
        }
        if r.index < conv.utterances.len() {
            return Err(Error::DuplicateUtterance { conv_id: r.conv_id, index: r.index });
        }
        if r.index != conv.utterances.len() {
            return Err(Error::MalformedLine {
                line,
                message: format!(
                    "conversation {} expects index {}, found {}",
                    r.conv_id,
                    conv.utterances.len(),
                    r.index
                ),
            });
        }
        conv.utterances.push(Utterance { index: r.index, speaker: r.speaker, text: r.text, emotion: r.emotion });
    }

    if derive_speakers {
        manifest.speaker_set = derived_speakers;
    }
    let warnings = conversations
        .iter()
        .filter(|c| c.speaker_count() < 2)
        .map(|c| format!("{}/{}: single-speaker conversation", c.dataset_id, c.id))
        .collect();
    Ok(Corpus { manifest, conversations, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split: Split,
    pub conversations: usize,
    pub utterances: usize,
    /// Distinct emotion labels observed.
    pub classes: usize,
    /// Utterances per conversation, rounded to two decimals.
    pub avg_utt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dataset_id: String,
    pub label_count: usize,
    pub splits: Vec<SplitStats>,
}

impl CorpusStats {
    pub fn get(&self, split: Split) -> &SplitStats {
        self.splits.iter().find(|s| s.split == split).expect("every split is reported")
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({} classes)", self.dataset_id, self.label_count)?;
        writeln!(f, "{:<6} {:>8} {:>10} {:>8} {:>8}", "split", "convs", "utts", "classes", "avg_utt")?;
        for s in &self.splits {
            writeln!(
                f,
                "{:<6} {:>8} {:>10} {:>8} {:>8.2}",
                s.split.as_str(),
                s.conversations,
                s.utterances,
                s.classes,
                s.avg_utt
            )?;
        }
        Ok(())
    }
}

pub fn stats(corpus: &Corpus) -> CorpusStats {
    let mut per: BTreeMap<Split, (usize, usize, BTreeSet<&str>)> =
        Split::ALL.iter().map(|s| (*s, (0, 0, BTreeSet::new()))).collect();
    for c in corpus.conversations() {
        let entry = per.get_mut(&c.split).expect("all splits present");
        entry.0 += 1;
        entry.1 += c.len();
        entry.2.extend(c.utterances.iter().map(|u| u.emotion.as_str()));
    }
    CorpusStats {
        dataset_id: corpus.manifest().dataset_id.clone(),
        label_count: corpus.manifest().label_count(),
        splits: per
            .into_iter()
            .map(|(split, (convs, utts, classes))| SplitStats {
                split,
                conversations: convs,
                utterances: utts,
                classes: classes.len(),
                avg_utt: if convs == 0 { 0.0 } else { (utts as f64 / convs as f64 * 100.0).round() / 100.0 },
            })
            .collect(),
    }
}

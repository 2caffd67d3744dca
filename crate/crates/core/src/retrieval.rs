//! Demonstration retrieval over a label-balanced, speaker-stripped domain base.
//!
//! The index is an exhaustive scan: scores are cosine similarities and ties go
//! to the lowest entry id, so results do not depend on entry order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_file, Address, Corpus, Split};
use crate::embed::Embedder;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub id: u32,
    pub source: Address,
    pub text: String,
    pub label: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Candidates restricted to the query's gold label.
    #[default]
    SameLabel,
    /// No restriction.
    AllLabels,
}

/// A retrieval request. `source` excludes the query's own entry from the candidates.
///
/// Scores are dot products, so `vector` must be unit length; [`Query::new`]
/// normalizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub source: Option<Address>,
    pub vector: Vec<f64>,
    pub gold: Option<String>,
}

impl Query {
    pub fn new(source: Option<Address>, mut vector: Vec<f64>, gold: Option<&str>) -> Self {
        crate::embed::normalize(&mut vector);
        Query { source, vector, gold: gold.map(str::to_string) }
    }

    /// Cosine scorer against unit-norm entries. Only the query's non-zero
    /// coordinates are visited, in ascending order, which gives the same sum
    /// as a dense dot product.
    fn scorer(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        let nonzero: Vec<(usize, f64)> = self.vector.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        move |v: &[f64]| nonzero.iter().map(|&(i, x)| x * v[i]).sum::<f64>().clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    dim: usize,
    embedder_id: String,
    label_set: Vec<String>,
    entries: Vec<DomainEntry>,
}

impl RetrievalIndex {
    /// Assembles an index from prepared entries, checking dimensions and norms.
    pub fn from_entries(
        embedder_id: impl Into<String>,
        dim: usize,
        label_set: Vec<String>,
        mut entries: Vec<DomainEntry>,
    ) -> Result<Self> {
        for e in &entries {
            if e.vector.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: e.vector.len() });
            }
            let norm = e.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() >= 1e-6 {
                return Err(Error::Config(format!("entry {} is not unit norm ({norm})", e.id)));
            }
        }
        entries.sort_by_key(|e| e.id);
        if entries.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::Config("duplicate entry id".into()));
        }
        Ok(RetrievalIndex { dim, embedder_id: embedder_id.into(), label_set, entries })
    }

    pub fn entries(&self) -> &[DomainEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry count per label, in label-set order.
    pub fn label_counts(&self) -> Vec<(String, usize)> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(&e.label).or_default() += 1;
        }
        self.label_set.iter().map(|l| (l.clone(), counts.get(l.as_str()).copied().unwrap_or(0))).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str::<RetrievalIndex>(&text)?.validated()
    }

    /// Re-checks a deserialized index.
    pub fn validated(self) -> Result<Self> {
        Self::from_entries(self.embedder_id, self.dim, self.label_set, self.entries)
    }

    /// Embeds the bare utterance text of `source` as a query.
    pub fn query(&self, embedder: &dyn Embedder, source: &Address, text: &str, gold: Option<&str>) -> Result<Query> {
        let vector = embedder.embed(&source.to_string(), text)?;
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: vector.len() });
        }
        Ok(Query::new(Some(source.clone()), vector, gold))
    }

    /// The `k` best admissible entries, best first.
    pub fn retrieve(&self, query: &Query, pairing: Pairing, k: usize) -> Result<Vec<(&DomainEntry, f64)>> {
        let restrict = match pairing {
            Pairing::SameLabel => Some(
                query
                    .gold
                    .as_deref()
                    .ok_or_else(|| Error::EmptyAdmissibleSet("same-label pairing without a gold label".into()))?,
            ),
            Pairing::AllLabels => None,
        };
        let score = query.scorer();
        let mut scored: Vec<(&DomainEntry, f64)> = self
            .entries
            .iter()
            .filter(|e| restrict.is_none_or(|l| e.label == l))
            .filter(|e| query.source.as_ref() != Some(&e.source))
            .map(|e| (e, score(&e.vector)))
            .collect();
        if scored.is_empty() {
            return Err(empty_admissible(query, restrict));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.id.cmp(&b.0.id)));
        scored.truncate(k.max(1));
        Ok(scored)
    }

    /// The single most similar admissible entry.
    pub fn retrieve_top1(&self, query: &Query, pairing: Pairing) -> Result<&DomainEntry> {
        let mut best: Option<(&DomainEntry, f64)> = None;
        let restrict = match pairing {
            Pairing::SameLabel => Some(
                query
                    .gold
                    .as_deref()
                    .ok_or_else(|| Error::EmptyAdmissibleSet("same-label pairing without a gold label".into()))?,
            ),
            Pairing::AllLabels => None,
        };
        let scorer = query.scorer();
        for e in &self.entries {
            if restrict.is_some_and(|l| e.label != l) || query.source.as_ref() == Some(&e.source) {
                continue;
            }
            let score = scorer(&e.vector);
            let better = match best {
                None => true,
                Some((b, s)) => score > s || (score == s && e.id < b.id),
            };
            if better {
                best = Some((e, score));
            }
        }
        best.map(|(e, _)| e).ok_or_else(|| empty_admissible(query, restrict))
    }
}

fn empty_admissible(query: &Query, restrict: Option<&str>) -> Error {
    let what = match (&query.source, restrict) {
        (Some(a), Some(l)) => format!("{a} (label {l})"),
        (Some(a), None) => a.to_string(),
        (None, Some(l)) => format!("label {l}"),
        (None, None) => "query".to_string(),
    };
    Error::EmptyAdmissibleSet(what)
}

/// Removes whole-word, case-insensitive occurrences of any name and collapses whitespace.
pub fn strip_speaker_names(text: &str, names: &[String]) -> String {
    let name_tokens: Vec<Vec<String>> =
        names.iter().map(|n| crate::embed::tokenize(n)).filter(|t| !t.is_empty()).collect();
    if name_tokens.is_empty() {
        return tidy(text);
    }

    // Alternating word / separator segments.
    let mut segments: Vec<(bool, &str)> = Vec::new();
    let mut start = 0;
    let mut in_word = None;
    for (i, c) in text.char_indices() {
        let w = c.is_alphanumeric();
        if in_word != Some(w) {
            if let Some(prev) = in_word {
                segments.push((prev, &text[start..i]));
            }
            start = i;
            in_word = Some(w);
        }
    }
    if let Some(prev) = in_word {
        segments.push((prev, &text[start..]));
    }

    let words: Vec<usize> = (0..segments.len()).filter(|&i| segments[i].0).collect();
    let lowered: Vec<String> = words.iter().map(|&i| segments[i].1.to_lowercase()).collect();
    let mut removed = vec![false; segments.len()];
    let mut w = 0;
    while w < words.len() {
        let hit = name_tokens
            .iter()
            .filter(|n| w + n.len() <= words.len() && lowered[w..w + n.len()] == n[..])
            .map(Vec::len)
            .max();
        match hit {
            Some(len) => {
                removed[words[w]..=words[w + len - 1]].fill(true);
                w += len;
            }
            None => w += 1,
        }
    }
    let mut kept = String::with_capacity(text.len());
    for (i, (_, seg)) in segments.iter().enumerate() {
        if removed[i] {
            continue;
        }
        // A vocative comma goes with the removed name.
        if i > 0 && removed[i - 1] {
            kept.push_str(seg.strip_prefix(',').unwrap_or(seg));
        } else {
            kept.push_str(seg);
        }
    }
    tidy(&kept)
}

/// Collapses whitespace and drops spaces left in front of punctuation.
fn tidy(text: &str) -> String {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = String::with_capacity(joined.len());
    let mut chars = joined.chars().peekable();
    while let Some(c) = chars.next() {
        if c == ' ' && chars.peek().is_some_and(|n| matches!(n, ',' | '.' | '!' | '?' | ';' | ':')) {
            continue;
        }
        if matches!(c, ',' | '.' | '!' | '?' | ';' | ':') && out.ends_with(',') {
            out.pop();
        }
        out.push(c);
    }
    out.trim_start_matches([',', ';', ':', ' ']).to_string()
}

/// Builds the domain base from the training split.
///
/// Every label of the manifest is downsampled (seeded, uniformly, without
/// replacement) to the smallest class count. Entry ids follow corpus order.
pub fn build_domain_base(
    corpus: &Corpus,
    embedder: &dyn Embedder,
    seed: u64,
    strip_names: &[String],
) -> Result<RetrievalIndex> {
    let label_set = corpus.manifest().label_set.clone();
    let mut by_label: BTreeMap<&str, Vec<Address>> = label_set.iter().map(|l| (l.as_str(), Vec::new())).collect();
    for (conv, u) in corpus.utterances().filter(|(c, _)| c.split == Split::Train) {
        if let Some(list) = by_label.get_mut(u.emotion.as_str()) {
            list.push(conv.address(u.index));
        }
    }
    if let Some(empty) = label_set.iter().find(|l| by_label[l.as_str()].is_empty()) {
        return Err(Error::EmptyClass(empty.clone()));
    }
    let quota = by_label.values().map(Vec::len).min().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: BTreeSet<Address> = BTreeSet::new();
    for label in &label_set {
        let pool = &by_label[label.as_str()];
        let picks = rand::seq::index::sample(&mut rng, pool.len(), quota);
        chosen.extend(picks.into_iter().map(|i| pool[i].clone()));
    }

    let mut entries = Vec::with_capacity(chosen.len());
    for (conv, u) in corpus.utterances().filter(|(c, _)| c.split == Split::Train) {
        let source = conv.address(u.index);
        if !chosen.contains(&source) {
            continue;
        }
        let text = strip_speaker_names(&u.text, strip_names);
        let vector = embedder.embed(&source.to_string(), &text)?;
        if vector.len() != embedder.dim() {
            return Err(Error::DimensionMismatch { expected: embedder.dim(), actual: vector.len() });
        }
        entries.push(DomainEntry { id: entries.len() as u32, source, text, label: u.emotion.clone(), vector });
    }
    RetrievalIndex::from_entries(embedder.id(), embedder.dim(), label_set, entries)
}

//! Sentence embedders behind one contract.
//!
//! * [`HashedNgram`]: feature-hashed unigram and bigram counts, fully offline.
//! * [`VectorFile`]: precomputed vectors looked up by key.
//! * [`HttpEmbedder`]: a remote service returning one vector per text.
//!
//! Every embedder returns L2-normalized vectors. A text with no features maps
//! to the first basis direction.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 256;

pub trait Embedder: Send + Sync {
    fn id(&self) -> String;

    fn dim(&self) -> usize;

    /// Embeds `text`. `key` identifies the text for lookup-based embedders
    /// and is ignored by the others.
    fn embed(&self, key: &str, text: &str) -> Result<Vec<f64>>;
}

/// L2-normalizes in place; the zero vector becomes the first basis direction.
pub fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        v.iter_mut().for_each(|x| *x = 0.0);
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Unigram and space-joined bigram features of a text.
pub fn ngram_features(text: &str) -> Vec<String> {
    let tokens = tokenize(text);
    let mut features = tokens.clone();
    features.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    features
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedNgram {
    pub dim: usize,
    /// Use the top hash bit as a feature sign.
    pub signed: bool,
}

impl Default for HashedNgram {
    fn default() -> Self {
        HashedNgram { dim: DEFAULT_DIM, signed: true }
    }
}

impl HashedNgram {
    pub fn bucket(&self, feature: &str) -> (usize, f64) {
        let h = fnv1a(feature.as_bytes());
        let sign = if self.signed && h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % self.dim as u64) as usize, sign)
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for f in ngram_features(text) {
            let (i, sign) = self.bucket(&f);
            v[i] += sign;
        }
        normalize(&mut v);
        v
    }
}

impl Embedder for HashedNgram {
    fn id(&self) -> String {
        format!("hashed-ngram-{}{}", self.dim, if self.signed { "" } else { "-unsigned" })
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _key: &str, text: &str) -> Result<Vec<f64>> {
        Ok(self.embed_text(text))
    }
}

/// Precomputed vectors.
///
/// File layout: a header line `<dim> <embedder_id>`, then one row per vector:
/// `<id> <x_1> ... <x_dim>`, whitespace-separated.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    dim: usize,
    embedder_id: String,
    vectors: HashMap<String, Vec<f64>>,
}

impl VectorFile {
    pub fn new(dim: usize, embedder_id: impl Into<String>) -> Self {
        VectorFile { dim, embedder_id: embedder_id.into(), vectors: HashMap::new() }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: vector.len() });
        }
        self.vectors.insert(id.into(), vector);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::MalformedLine { line: 1, message: "missing vector file header".into() })?;
        let mut head = header.split_whitespace();
        let dim: usize = head
            .next()
            .and_then(|d| d.parse().ok())
            .filter(|d| *d > 0)
            .ok_or_else(|| Error::MalformedLine { line: 1, message: "header must start with dim".into() })?;
        let embedder_id = head.next().unwrap_or("vector-file").to_string();
        let mut file = VectorFile::new(dim, embedder_id);
        for (i, line) in lines {
            let mut fields = line.split_whitespace();
            let id = fields.next().expect("non-empty line");
            let vector = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedLine { line: i + 1, message: e.to_string() })?;
            if vector.len() != dim {
                return Err(Error::MalformedLine {
                    line: i + 1,
                    message: format!("expected {dim} values, found {}", vector.len()),
                });
            }
            file.vectors.insert(id.to_string(), vector);
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Serializes with rows sorted by id.
    pub fn to_text(&self) -> String {
        let mut ids: Vec<&String> = self.vectors.keys().collect();
        ids.sort();
        let mut out = format!("{} {}\n", self.dim, self.embedder_id);
        for id in ids {
            out.push_str(id);
            for x in &self.vectors[id] {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }
}

impl Embedder for VectorFile {
    fn id(&self) -> String {
        self.embedder_id.clone()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, key: &str, _text: &str) -> Result<Vec<f64>> {
        let mut v = self.vectors.get(key).cloned().ok_or_else(|| Error::MissingVector(key.to_string()))?;
        normalize(&mut v);
        Ok(v)
    }
}

/// Remote embedding service.
///
/// Request: `POST <endpoint>` with `{"text": "..."}`.
/// Response: `{"embedding": [f, ...]}` with exactly `dim` values.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: String,
    dim: usize,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize, timeout: Duration) -> Self {
        HttpEmbedder { endpoint: endpoint.into(), dim, agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _key: &str, text: &str) -> Result<Vec<f64>> {
        let response = self
            .agent
            .post(&self.endpoint)
            .send_json(EmbedRequest { text })
            .map_err(|e| Error::Transport(e.to_string()))?;
        let body: EmbedResponse =
            response.into_json().map_err(|e| Error::Transport(format!("bad embedding response: {e}")))?;
        if body.embedding.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: body.embedding.len() });
        }
        let mut v = body.embedding;
        normalize(&mut v);
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    HashedNgram {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "yes")]
        signed: bool,
    },
    VectorFile {
        path: PathBuf,
    },
    Http {
        endpoint: String,
        dim: usize,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn yes() -> bool {
    true
}

fn default_timeout_ms() -> u64 {
    30_000
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::HashedNgram { dim: DEFAULT_DIM, signed: true }
    }
}

impl EmbedderConfig {
    /// Instantiates the embedder; relative vector-file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Box<dyn Embedder>> {
        Ok(match self {
            EmbedderConfig::HashedNgram { dim, signed } => {
                if *dim == 0 {
                    return Err(Error::Config("embedding dim must be positive".into()));
                }
                Box::new(HashedNgram { dim: *dim, signed: *signed })
            }
            EmbedderConfig::VectorFile { path } => Box::new(VectorFile::load(&base.join(path))?),
            EmbedderConfig::Http { endpoint, dim, timeout_ms } => {
                Box::new(HttpEmbedder::new(endpoint.clone(), *dim, Duration::from_millis(*timeout_ms)))
            }
        })
    }
}

//! Completion backends.
//!
//! The HTTP wire contract is a single POST endpoint:
//!
//! ```text
//! request:  {"prompt": "...", "max_new_tokens": 16, "temperature": 0.0}
//! response: {"text": "..."}
//! ```
//!
//! Decoding is always greedy (temperature 0). The mocks never touch the network.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::embed::tokenize;
use crate::error::{Error, Result};
use crate::prompt::PromptSample;

pub trait Backend: Send + Sync {
    fn generate(&self, sample: &PromptSample) -> Result<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    MockEcho,
    MockRule,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: usize,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding { temperature: 0.0, max_new_tokens: default_max_new_tokens() }
    }
}

fn default_max_new_tokens() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub decoding: Decoding,
    /// Maximum in-flight requests.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts after a transport failure.
    #[serde(default)]
    pub retries: usize,
}

fn default_concurrency() -> usize {
    4
}

fn default_timeout_ms() -> u64 {
    60_000
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::mock(BackendKind::MockEcho)
    }
}

impl BackendConfig {
    pub fn mock(kind: BackendKind) -> Self {
        BackendConfig {
            kind,
            endpoint: None,
            decoding: Decoding::default(),
            concurrency: default_concurrency(),
            timeout_ms: default_timeout_ms(),
            retries: 0,
        }
    }

    pub fn http(endpoint: impl Into<String>) -> Self {
        BackendConfig { endpoint: Some(endpoint.into()), ..BackendConfig::mock(BackendKind::Http) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.decoding.temperature != 0.0 {
            return Err(Error::Config("only greedy decoding (temperature 0) is supported".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("backend concurrency must be at least 1".into()));
        }
        if self.kind == BackendKind::Http && self.endpoint.is_none() {
            return Err(Error::Config("http backend requires an endpoint".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Backend>> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::MockEcho => Box::new(MockEcho),
            BackendKind::MockRule => Box::new(MockRule::default()),
            BackendKind::Http => Box::new(HttpBackend::new(
                self.endpoint.clone().expect("validated"),
                self.decoding.clone(),
                Duration::from_millis(self.timeout_ms),
            )),
        })
    }
}

/// Answers with the sample's gold label.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockEcho;

impl Backend for MockEcho {
    fn generate(&self, sample: &PromptSample) -> Result<String> {
        Ok(sample.meta.gold.clone())
    }
}

/// Keyword lexicon used by [`MockRule`]; labels are from the unified set.
pub const RULE_LEXICON: &[(&str, &str)] = &[
    ("happy", "joyful"),
    ("glad", "joyful"),
    ("great", "joyful"),
    ("love", "joyful"),
    ("wonderful", "joyful"),
    ("fun", "joyful"),
    ("sad", "sad"),
    ("sorry", "sad"),
    ("miss", "sad"),
    ("cry", "sad"),
    ("lost", "sad"),
    ("angry", "mad"),
    ("hate", "mad"),
    ("furious", "mad"),
    ("stupid", "mad"),
    ("excited", "excited"),
    ("thrilled", "excited"),
    ("finally", "excited"),
    ("wow", "powerful"),
    ("proud", "powerful"),
    ("seriously", "powerful"),
    ("scared", "fear"),
    ("afraid", "fear"),
    ("worried", "fear"),
    ("nervous", "fear"),
    ("calm", "peaceful"),
    ("relax", "peaceful"),
    ("peace", "peaceful"),
    ("gross", "disgust"),
    ("disgusting", "disgust"),
    ("yuck", "disgust"),
];

/// Fallback answer when no keyword matches.
pub const RULE_DEFAULT: &str = "neutral";

/// Scans the tokens of the utterance under recognition (or the whole prompt
/// when the sample carries none) and answers with the label of the first
/// token found in the lexicon.
#[derive(Debug, Clone)]
pub struct MockRule {
    lexicon: Vec<(String, String)>,
    default: String,
}

impl Default for MockRule {
    fn default() -> Self {
        MockRule {
            lexicon: RULE_LEXICON.iter().map(|(k, l)| (k.to_string(), l.to_string())).collect(),
            default: RULE_DEFAULT.to_string(),
        }
    }
}

impl MockRule {
    pub fn classify(&self, text: &str) -> &str {
        tokenize(text)
            .iter()
            .find_map(|t| self.lexicon.iter().find(|(k, _)| k == t).map(|(_, l)| l.as_str()))
            .unwrap_or(&self.default)
    }
}

impl Backend for MockRule {
    fn generate(&self, sample: &PromptSample) -> Result<String> {
        let text = if sample.meta.utterance.is_empty() { &sample.input_text } else { &sample.meta.utterance };
        Ok(self.classify(text).to_string())
    }
}

#[derive(Debug, Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_new_tokens: usize,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    text: String,
}

pub struct HttpBackend {
    endpoint: String,
    decoding: Decoding,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: String, decoding: Decoding, timeout: Duration) -> Self {
        HttpBackend { endpoint, decoding, agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }
}

impl Backend for HttpBackend {
    fn generate(&self, sample: &PromptSample) -> Result<String> {
        let request = CompletionRequest {
            prompt: &sample.input_text,
            max_new_tokens: self.decoding.max_new_tokens,
            temperature: 0.0,
        };
        let transport = |msg: String| Error::at(&sample.address(), Error::Transport(msg));
        let response = match self.agent.post(&self.endpoint).send_json(&request) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) => return Err(transport(format!("status {code}"))),
            Err(e) => return Err(transport(e.to_string())),
        };
        let body: CompletionResponse =
            response.into_json().map_err(|e| transport(format!("bad response body: {e}")))?;
        Ok(body.text)
    }
}

fn is_transport(e: &Error) -> bool {
    match e {
        Error::Transport(_) => true,
        Error::AtUtterance { source, .. } => is_transport(source),
        _ => false,
    }
}

/// Generates completions for every sample with at most `concurrency` in flight.
///
/// Results line up with `samples`. Transport failures are retried `retries` times.
pub fn generate_all(
    backend: &dyn Backend,
    samples: &[PromptSample],
    concurrency: usize,
    retries: usize,
) -> Vec<Result<String>> {
    let slots: Mutex<Vec<Option<Result<String>>>> = Mutex::new((0..samples.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = concurrency.clamp(1, samples.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= samples.len() {
                    break;
                }
                let mut result = backend.generate(&samples[i]);
                let mut attempt = 0;
                while attempt < retries && result.as_ref().is_err_and(is_transport) {
                    result = backend.generate(&samples[i]);
                    attempt += 1;
                }
                slots.lock().expect("no poisoned workers")[i] = Some(result);
            });
        }
    });
    slots.into_inner().expect("no poisoned workers").into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{SampleMeta, Task};

    fn sample(gold: &str, utterance: &str) -> PromptSample {
        PromptSample {
            task: Task::Main,
            input_text: "prompt".into(),
            target_text: gold.into(),
            loss_weight: 1.0,
            meta: SampleMeta {
                dataset: "d".into(),
                conv_id: "c".into(),
                index: 0,
                gold: gold.into(),
                utterance: utterance.into(),
            },
        }
    }

    #[test]
    fn echo_returns_gold() {
        assert_eq!(MockEcho.generate(&sample("fear", "x")).unwrap(), "fear");
    }

    #[test]
    fn rule_lexicon() {
        let r = MockRule::default();
        assert_eq!(r.classify("I am so happy today"), "joyful");
        assert_eq!(r.classify("I'm scared, not happy"), "fear");
        assert_eq!(r.classify("The weather report"), "neutral");
        assert_eq!(r.generate(&sample("sad", "WOW!")).unwrap(), "powerful");
        assert_eq!(r.generate(&sample("sad", "x")).unwrap(), r.generate(&sample("sad", "x")).unwrap());
    }

    #[test]
    fn lexicon_labels_are_unified() {
        for (_, label) in RULE_LEXICON {
            assert!(crate::unify::UNIFIED_LABELS.contains(label));
        }
    }

    #[test]
    fn generate_all_keeps_order() {
        let samples: Vec<_> = (0..50).map(|i| sample(&format!("l{i}"), "")).collect();
        let out = generate_all(&MockEcho, &samples, 7, 0);
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.as_ref().unwrap(), &format!("l{i}"));
        }
        assert!(generate_all(&MockEcho, &[], 4, 0).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(BackendConfig::mock(BackendKind::MockRule).validate().is_ok());
        let mut c = BackendConfig::mock(BackendKind::Http);
        assert!(c.validate().is_err());
        c.endpoint = Some("http://127.0.0.1:1/x".into());
        assert!(c.validate().is_ok());
        c.decoding.temperature = 0.7;
        assert!(c.validate().is_err());
    }
}

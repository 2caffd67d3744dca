//! Prompt assembly for the main recognition task and the two auxiliary tasks.
//!
//! A main-task prompt is the plain concatenation of four parts: instruction,
//! history, label statement and (optionally) a retrieved demonstration.
//! History lines render as `Speaker_<speaker>: "<text>"`, oldest first.

use serde::{Deserialize, Serialize};

use crate::corpus::{Conversation, Utterance};

pub const INSTRUCTION: &str = "Now you are an expert of sentiment and emotional analysis. \
The following conversation noted between '### ###' involves several speakers.";

pub const SPEAKER_INSTRUCTION_PREFIX: &str = "Now you are an expert of sentiment and emotional analysis. \
Please select the Speaker label of the utterance";

pub const DEMONSTRATION_HEADER: &str = "Here is a similar example:";

/// Default history window.
pub const DEFAULT_WINDOW: usize = 12;

/// Window sizes explored by the history-window sweep.
pub const WINDOW_SWEEP: [usize; 4] = [1, 5, 12, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub w: usize,
    pub include_current: bool,
}

impl WindowSpec {
    /// Window for the main task; includes the utterance being classified.
    pub fn main(w: usize) -> Self {
        assert!(w >= 1, "history window must be at least 1");
        WindowSpec { w, include_current: true }
    }

    /// Window for emotion impact prediction; stops before the current utterance.
    pub fn impact(w: usize) -> Self {
        assert!(w >= 1, "history window must be at least 1");
        WindowSpec { w, include_current: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Main,
    SpeakerId,
    EmotionImpact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub dataset: String,
    pub conv_id: String,
    pub index: usize,
    /// Expected answer; equal to the sample's target.
    pub gold: String,
    /// Text of the utterance the sample asks about (empty for impact prediction).
    #[serde(default)]
    pub utterance: String,
}

/// One generative record: prompt, expected output and loss weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSample {
    pub task: Task,
    #[serde(rename = "input")]
    pub input_text: String,
    #[serde(rename = "output")]
    pub target_text: String,
    #[serde(rename = "weight")]
    pub loss_weight: f64,
    pub meta: SampleMeta,
}

impl PromptSample {
    pub fn address(&self) -> crate::corpus::Address {
        crate::corpus::Address {
            dataset: self.meta.dataset.clone(),
            conv_id: self.meta.conv_id.clone(),
            index: self.meta.index,
        }
    }
}

/// Text and label of a retrieved example, as rendered in the demonstration block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demonstration {
    pub text: String,
    pub label: String,
}

/// The four parts of a main-task prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MainPromptParts {
    pub instruction: String,
    pub history: String,
    pub label_statement: String,
    pub demonstration: String,
}

impl MainPromptParts {
    pub fn concat(&self) -> String {
        [self.instruction.as_str(), self.history.as_str(), self.label_statement.as_str(), self.demonstration.as_str()]
            .concat()
    }
}

/// Utterances in the history window ending at `index`.
pub fn extract_history<'a>(conversation: &'a Conversation, index: usize, spec: &WindowSpec) -> &'a [Utterance] {
    assert!(index < conversation.len(), "utterance index out of range");
    let end = if spec.include_current { index + 1 } else { index };
    let start = end.saturating_sub(spec.w);
    &conversation.utterances[start..end]
}

pub fn speaker_tag(speaker: &str) -> String {
    format!("Speaker_{speaker}")
}

fn history_line(u: &Utterance) -> String {
    format!("{}: \"{}\"", speaker_tag(&u.speaker), u.text)
}

fn history_block(history: &[Utterance]) -> String {
    let mut out = String::from("\n###\n");
    for u in history {
        out.push_str(&history_line(u));
        out.push('\n');
    }
    out.push_str("###\n");
    out
}

fn label_list(labels: &[String]) -> String {
    labels.join(", ")
}

pub fn main_prompt_parts(
    conversation: &Conversation,
    index: usize,
    spec: &WindowSpec,
    demo: Option<&Demonstration>,
    label_set: &[String],
) -> MainPromptParts {
    let history = extract_history(conversation, index, spec);
    let current = &conversation.utterances[index];
    let label_statement =
        format!("Please select the emotional label of <{}> from <{}>:", history_line(current), label_list(label_set));
    let demonstration = match demo {
        Some(d) => format!("\n{DEMONSTRATION_HEADER}\n{}\n{}", d.text, d.label),
        None => String::new(),
    };
    MainPromptParts {
        instruction: INSTRUCTION.to_string(),
        history: history_block(history),
        label_statement,
        demonstration,
    }
}

/// Main recognition prompt for utterance `index`.
pub fn build_main_prompt(
    conversation: &Conversation,
    index: usize,
    spec: &WindowSpec,
    demo: Option<&Demonstration>,
    label_set: &[String],
) -> PromptSample {
    debug_assert!(!label_set.is_empty());
    let parts = main_prompt_parts(conversation, index, spec, demo, label_set);
    let current = &conversation.utterances[index];
    PromptSample {
        task: Task::Main,
        input_text: parts.concat(),
        target_text: current.emotion.clone(),
        loss_weight: 1.0,
        meta: meta(conversation, current, current.emotion.clone(), current.text.clone()),
    }
}

/// Context-free speaker identification prompt.
pub fn build_speaker_prompt(conversation: &Conversation, index: usize, speaker_set: &[String]) -> PromptSample {
    let u = &conversation.utterances[index];
    let input_text =
        format!("{SPEAKER_INSTRUCTION_PREFIX} <Speaker: \"{}\"> from <{}>", u.text, label_list(speaker_set));
    PromptSample {
        task: Task::SpeakerId,
        input_text,
        target_text: u.speaker.clone(),
        loss_weight: 1.0,
        meta: meta(conversation, u, u.speaker.clone(), u.text.clone()),
    }
}

/// The first turn of a conversation has no history to predict from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkippedFirstTurn;

/// Emotion impact prediction prompt: history before `index`, asking for the
/// emotion the next speaker will show.
pub fn build_impact_prompt(
    conversation: &Conversation,
    index: usize,
    spec: &WindowSpec,
    label_set: &[String],
    alpha: f64,
) -> Result<PromptSample, SkippedFirstTurn> {
    if index == 0 {
        return Err(SkippedFirstTurn);
    }
    let spec = WindowSpec { include_current: false, ..*spec };
    let history = extract_history(conversation, index, &spec);
    let current = &conversation.utterances[index];
    let speaker = speaker_tag(&current.speaker);
    let input_text = format!(
        "{INSTRUCTION}{}Based on the above historical utterances, the next utterance is spoken by <{speaker}>, \
please predict the emotion states of <{speaker}> from <{}>:",
        history_block(history),
        label_list(label_set)
    );
    Ok(PromptSample {
        task: Task::EmotionImpact,
        input_text,
        target_text: current.emotion.clone(),
        loss_weight: alpha,
        meta: meta(conversation, current, current.emotion.clone(), String::new()),
    })
}

fn meta(conversation: &Conversation, u: &Utterance, gold: String, utterance: String) -> SampleMeta {
    SampleMeta {
        dataset: conversation.dataset_id.clone(),
        conv_id: conversation.id.clone(),
        index: u.index,
        gold,
        utterance,
    }
}

//! Constrained parsing of completions and weighted-F1 scoring.
//!
//! A completion that names no label (or names several equally well) is
//! `Unparseable`. It is scored as a prediction of a void class: a false
//! negative for the gold class and a false positive for no real class.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{generate_all, Backend};
use crate::corpus::{write_file, Address};
use crate::error::{Error, Result};
use crate::jsonl::{self, Header};
use crate::prompt::PromptSample;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Label(String),
    Unparseable,
}

impl Prediction {
    pub fn label(&self) -> Option<&str> {
        match self {
            Prediction::Label(l) => Some(l),
            Prediction::Unparseable => None,
        }
    }
}

fn normalize(text: &str) -> String {
    let first = text.trim().lines().next().unwrap_or("").trim().to_lowercase();
    first.trim_matches(|c: char| !c.is_alphanumeric()).to_string()
}

/// Maps free text onto the label set: exact match after normalization, else
/// the unique longest label occurring as a substring, else `Unparseable`.
pub fn parse_prediction(text: &str, label_set: &[String]) -> Prediction {
    let norm = normalize(text);
    if let Some(l) = label_set.iter().find(|l| l.to_lowercase() == norm) {
        return Prediction::Label(l.clone());
    }
    let hits: Vec<&String> = label_set.iter().filter(|l| !l.is_empty() && norm.contains(&l.to_lowercase())).collect();
    let Some(longest) = hits.iter().map(|l| l.chars().count()).max() else {
        return Prediction::Unparseable;
    };
    let mut best = hits.into_iter().filter(|l| l.chars().count() == longest);
    match (best.next(), best.next()) {
        (Some(l), None) => Prediction::Label(l.clone()),
        _ => Prediction::Unparseable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassScore>,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub total: usize,
    pub unparseable_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_dataset: Vec<(String, EvalReport)>,
}

impl EvalReport {
    pub fn unparseable_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.unparseable_count as f64 / self.total as f64
        }
    }

    pub fn dataset(&self, id: &str) -> Option<&EvalReport> {
        self.per_dataset.iter().find(|(d, _)| d == id).map(|(_, r)| r)
    }

    /// Per-class and summary rows for machine consumption.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        push_rows(&mut rows, None, self);
        for (d, r) in &self.per_dataset {
            push_rows(&mut rows, Some(d), r);
        }
        rows
    }

    pub fn save(&self, dir: &Path, header: &Header) -> Result<()> {
        #[derive(Serialize)]
        struct Stamped<'a> {
            config_hash: &'a str,
            #[serde(flatten)]
            report: &'a EvalReport,
        }
        let json = serde_json::to_string_pretty(&Stamped { config_hash: &header.config_hash, report: self })?;
        write_file(&dir.join("report.json"), &(json + "\n"))?;
        jsonl::write(&dir.join("report_rows.jsonl"), Some(header), &self.rows())?;
        write_file(&dir.join("report.txt"), &self.to_string())
    }
}

fn push_rows(rows: &mut Vec<ReportRow>, dataset: Option<&str>, r: &EvalReport) {
    for c in &r.classes {
        rows.push(ReportRow {
            scope: "class".into(),
            dataset: dataset.map(str::to_string),
            label: Some(c.label.clone()),
            precision: Some(c.precision),
            recall: Some(c.recall),
            f1: c.f1,
            support: c.support,
            unparseable: None,
        });
    }
    rows.push(ReportRow {
        scope: "summary".into(),
        dataset: dataset.map(str::to_string),
        label: None,
        precision: None,
        recall: None,
        f1: r.weighted_f1,
        support: r.total,
        unparseable: Some(r.unparseable_count),
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scope: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    pub f1: f64,
    pub support: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unparseable: Option<usize>,
}

fn write_table(f: &mut fmt::Formatter<'_>, title: &str, r: &EvalReport) -> fmt::Result {
    writeln!(f, "{title}")?;
    writeln!(f, "{:<12} {:>9} {:>9} {:>9} {:>8}", "label", "precision", "recall", "f1", "support")?;
    for c in &r.classes {
        writeln!(f, "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>8}", c.label, c.precision, c.recall, c.f1, c.support)?;
    }
    writeln!(
        f,
        "{:<12} {:>29.4} {:>8}   (W-F1 {:.2}%, unparseable {})",
        "weighted",
        r.weighted_f1,
        r.total,
        r.weighted_f1 * 100.0,
        r.unparseable_count
    )
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_table(f, "overall", self)?;
        for (d, r) in &self.per_dataset {
            writeln!(f)?;
            write_table(f, d, r)?;
        }
        Ok(())
    }
}

/// Support-weighted F1 over `label_set`.
pub fn weighted_f1(gold: &[String], pred: &[Prediction], label_set: &[String]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch { gold: gold.len(), pred: pred.len() });
    }
    let position: HashMap<&str, usize> = label_set.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let k = label_set.len();
    let (mut tp, mut fp, mut support) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    let mut unparseable = 0;
    let mut correct = 0;
    for (g, p) in gold.iter().zip(pred) {
        let gi = *position
            .get(g.as_str())
            .ok_or_else(|| Error::UnknownLabel { dataset: "gold".into(), label: g.clone() })?;
        support[gi] += 1;
        match p.label().and_then(|l| position.get(l)) {
            Some(&pi) if pi == gi => {
                tp[gi] += 1;
                correct += 1;
            }
            Some(&pi) => fp[pi] += 1,
            None => unparseable += 1,
        }
    }
    let n = gold.len();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let classes: Vec<ClassScore> = (0..k)
        .map(|i| {
            let precision = ratio(tp[i], tp[i] + fp[i]);
            let recall = ratio(tp[i], support[i]);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            ClassScore { label: label_set[i].clone(), precision, recall, f1, support: support[i] }
        })
        .collect();
    let weighted = classes.iter().map(|c| c.support as f64 * c.f1).sum::<f64>();
    Ok(EvalReport {
        classes,
        weighted_f1: if n == 0 { 0.0 } else { weighted / n as f64 },
        accuracy: ratio(correct, n),
        total: n,
        unparseable_count: unparseable,
        per_dataset: Vec::new(),
    })
}

/// One scored generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub dataset: String,
    pub conv_id: String,
    pub index: usize,
    pub gold: String,
    pub completion: String,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointRecord {
    position: usize,
    address: Address,
    completion: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub concurrency: usize,
    pub retries: usize,
    /// Completions are persisted here and reused on rerun.
    pub checkpoint: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub predictions: Vec<PredictionRecord>,
}

/// Scores already-generated completions, adding per-dataset breakdowns when
/// the samples come from more than one source dataset.
pub fn score(samples: &[PromptSample], completions: &[String], label_set: &[String]) -> Result<RunOutcome> {
    if samples.len() != completions.len() {
        return Err(Error::LengthMismatch { gold: samples.len(), pred: completions.len() });
    }
    let predictions: Vec<PredictionRecord> = samples
        .iter()
        .zip(completions)
        .map(|(s, c)| PredictionRecord {
            dataset: s.meta.dataset.clone(),
            conv_id: s.meta.conv_id.clone(),
            index: s.meta.index,
            gold: s.meta.gold.clone(),
            completion: c.clone(),
            prediction: parse_prediction(c, label_set),
        })
        .collect();
    let report = score_predictions(&predictions, label_set)?;
    Ok(RunOutcome { report, predictions })
}

pub fn score_predictions(predictions: &[PredictionRecord], label_set: &[String]) -> Result<EvalReport> {
    let split = |recs: &[&PredictionRecord]| {
        let gold: Vec<String> = recs.iter().map(|r| r.gold.clone()).collect();
        let pred: Vec<Prediction> = recs.iter().map(|r| r.prediction.clone()).collect();
        weighted_f1(&gold, &pred, label_set)
    };
    let all: Vec<&PredictionRecord> = predictions.iter().collect();
    let mut report = split(&all)?;
    let mut datasets: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for p in predictions {
        if !datasets.contains_key(p.dataset.as_str()) {
            order.push(&p.dataset);
        }
        datasets.entry(&p.dataset).or_default().push(p);
    }
    if order.len() > 1 {
        for d in order {
            report.per_dataset.push((d.to_string(), split(&datasets[d])?));
        }
    }
    Ok(report)
}

/// Generates, parses and scores every sample.
///
/// On transport failure the successful completions are written to the
/// checkpoint (when configured) and the run aborts.
pub fn evaluate_run(
    samples: &[PromptSample],
    backend: &dyn Backend,
    label_set: &[String],
    options: &RunOptions<'_>,
) -> Result<RunOutcome> {
    let mut done: Vec<Option<String>> = vec![None; samples.len()];
    if let Some(path) = options.checkpoint.filter(|p| p.exists()) {
        for rec in jsonl::read::<CheckpointRecord>(path)? {
            if samples.get(rec.position).is_some_and(|s| s.address() == rec.address) {
                done[rec.position] = Some(rec.completion);
            }
        }
    }
    let pending: Vec<usize> = (0..samples.len()).filter(|&i| done[i].is_none()).collect();
    let batch: Vec<PromptSample> = pending.iter().map(|&i| samples[i].clone()).collect();
    let results = generate_all(backend, &batch, options.concurrency.max(1), options.retries);
    let mut first_error = None;
    for (i, r) in pending.into_iter().zip(results) {
        match r {
            Ok(text) => done[i] = Some(text),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(path) = options.checkpoint {
        let records: Vec<CheckpointRecord> = done
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                c.as_ref().map(|c| CheckpointRecord {
                    position: i,
                    address: samples[i].address(),
                    completion: c.clone(),
                })
            })
            .collect();
        jsonl::write(path, None, &records)?;
    }
    if let Some(e) = first_error {
        return Err(Error::Aborted {
            completed: done.iter().filter(|c| c.is_some()).count(),
            total: samples.len(),
            source: Box::new(e),
        });
    }
    let completions: Vec<String> = done.into_iter().map(|c| c.expect("all generated")).collect();
    score(samples, &completions, label_set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn preds(names: &[&str]) -> Vec<Prediction> {
        names.iter().map(|s| Prediction::Label(s.to_string())).collect()
    }

    #[test]
    fn parse_examples() {
        let set: Vec<String> = crate::unify::UNIFIED_LABELS.iter().map(|s| s.to_string()).collect();
        assert_eq!(parse_prediction(" Joyful.\n", &set), Prediction::Label("joyful".into()));
        assert_eq!(parse_prediction("the emotion is sad here", &set), Prediction::Label("sad".into()));
        assert_eq!(parse_prediction("sad or mad", &set), Prediction::Unparseable);
        assert_eq!(parse_prediction("", &set), Prediction::Unparseable);
        assert_eq!(parse_prediction("no idea\nsad", &set), Prediction::Unparseable);
    }

    #[test]
    fn longest_substring_wins() {
        let set = labels(&["joy", "joyful"]);
        assert_eq!(parse_prediction("very joyful!", &set), Prediction::Label("joyful".into()));
    }

    #[test]
    fn hand_confusion_matrix() {
        let set = labels(&["a", "b"]);
        let r = weighted_f1(&labels(&["a", "a", "b"]), &preds(&["a", "b", "b"]), &set).unwrap();
        assert!((r.classes[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.classes[1].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.weighted_f1 - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn perfect_is_one() {
        let set = labels(&["a", "b", "c"]);
        let g = labels(&["a", "c", "b", "c"]);
        let r = weighted_f1(&g, &preds(&["a", "c", "b", "c"]), &set).unwrap();
        assert_eq!(r.weighted_f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn unparseable_hurts_recall_only() {
        let set = labels(&["a", "b"]);
        let r = weighted_f1(
            &labels(&["a", "a", "b"]),
            &[Prediction::Label("a".into()), Prediction::Unparseable, Prediction::Label("b".into())],
            &set,
        )
        .unwrap();
        assert_eq!(r.classes[0].precision, 1.0);
        assert_eq!(r.classes[0].recall, 0.5);
        assert_eq!(r.classes[1].f1, 1.0);
        assert_eq!(r.unparseable_count, 1);
    }

    #[test]
    fn errors() {
        let set = labels(&["a"]);
        assert!(matches!(weighted_f1(&labels(&["a"]), &[], &set), Err(Error::LengthMismatch { .. })));
        assert!(matches!(weighted_f1(&labels(&["z"]), &preds(&["a"]), &set), Err(Error::UnknownLabel { .. })));
    }

    #[test]
    fn empty_input_scores_zero() {
        let r = weighted_f1(&[], &[], &labels(&["a"])).unwrap();
        assert_eq!(r.weighted_f1, 0.0);
        assert_eq!(r.total, 0);
    }

    #[test]
    fn rows_include_summary() {
        let set = labels(&["a", "b"]);
        let r = weighted_f1(&labels(&["a", "b"]), &preds(&["a", "a"]), &set).unwrap();
        let rows = r.rows();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].scope, "summary");
        assert!(r.to_string().contains("weighted"));
    }
}

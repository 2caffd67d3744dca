//! Config-driven pipeline stages over a workspace directory.
//!
//! Every stage reads its inputs from, and writes its outputs to, the run's
//! output directory, writes a `config.json` snapshot, and stamps every output
//! with the hash of the configuration that produced it. Given identical
//! configuration (seed included) every stage produces byte-identical files.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::BackendConfig;
use crate::corpus::{self, write_file, Address, Corpus, CorpusStats, DatasetManifest, Split};
use crate::embed::{Embedder, EmbedderConfig};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, PredictionRecord, RunOptions};
use crate::export::{self, Demonstrations, Stage2Options, ALPHA_SWEEP, DEFAULT_ALPHA};
use crate::jsonl::{self, Header};
use crate::mixing::{self, default_fractions, Fraction, MixPlan, Strategy};
use crate::prompt::{PromptSample, DEFAULT_WINDOW, WINDOW_SWEEP};
use crate::retrieval::{build_domain_base, Pairing, RetrievalIndex};
use crate::unify::{self, LabelMapping, SpeakerRegistry, UNIFIED_DATASET_ID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub id: String,
    pub corpus: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    pub strategy: Strategy,
    pub fraction: Fraction,
}

/// Everything that determines a run. `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub datasets: Vec<DatasetSource>,
    /// A dataset id, or `UIME` for the unified corpus.
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "yes")]
    pub demonstrations: bool,
    #[serde(default = "same_label")]
    pub train_pairing: Pairing,
    #[serde(default = "all_labels")]
    pub infer_pairing: Pairing,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<MixConfig>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "test_split")]
    pub eval_split: Split,
    /// `eval` fails when the unparseable fraction exceeds this.
    #[serde(default = "default_max_unparseable")]
    pub max_unparseable_fraction: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn yes() -> bool {
    true
}
fn same_label() -> Pairing {
    Pairing::SameLabel
}
fn all_labels() -> Pairing {
    Pairing::AllLabels
}
fn test_split() -> Split {
    Split::Test
}
fn default_max_unparseable() -> f64 {
    0.05
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// A config with defaults for everything except the inputs.
    pub fn new(seed: u64, datasets: Vec<DatasetSource>, target: impl Into<String>) -> Self {
        RunConfig {
            seed,
            datasets,
            target: target.into(),
            mapping: None,
            window: DEFAULT_WINDOW,
            alpha: DEFAULT_ALPHA,
            demonstrations: true,
            train_pairing: Pairing::SameLabel,
            infer_pairing: Pairing::AllLabels,
            embedder: EmbedderConfig::default(),
            mix: None,
            backend: BackendConfig::default(),
            eval_split: Split::Test,
            max_unparseable_fraction: default_max_unparseable(),
            output_dir: default_output(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be a nonnegative number, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.max_unparseable_fraction) {
            return Err(Error::Config("max_unparseable_fraction must lie in [0, 1]".into()));
        }
        let mut ids = HashSet::new();
        for d in &self.datasets {
            if !ids.insert(d.id.as_str()) {
                return Err(Error::Config(format!("dataset {} listed twice", d.id)));
            }
        }
        if self.target != UNIFIED_DATASET_ID && !ids.contains(self.target.as_str()) {
            return Err(Error::Config(format!("target {} is not a configured dataset", self.target)));
        }
        self.backend.validate()
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        unify::hex(&Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// A run configuration bound to a workspace root.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    config: RunConfig,
    hash: String,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Workspace { root: root.into(), config, hash })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn out(&self) -> PathBuf {
        self.root.join(&self.config.output_dir)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out().join(rel)
    }

    fn header(&self, kind: &str) -> Header {
        Header { kind: kind.to_string(), config_hash: self.hash.clone() }
    }

    fn snapshot(&self) -> Result<()> {
        write_file(&self.path("config.json"), &self.config.to_json())
    }

    fn require(&self, path: &Path, produced_by: &str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::Config(format!("missing {}; run `{produced_by}` first", path.display())))
        }
    }

    fn mapping(&self) -> Result<LabelMapping> {
        match &self.config.mapping {
            Some(p) => LabelMapping::load(&self.root.join(p)),
            None => Ok(LabelMapping::reference()),
        }
    }

    fn embedder(&self) -> Result<Box<dyn Embedder>> {
        self.config.embedder.build(&self.root)
    }

    fn ingested_paths(&self, id: &str) -> (PathBuf, PathBuf) {
        (self.path(&format!("corpus/{id}.jsonl")), self.path(&format!("corpus/{id}.manifest.json")))
    }

    fn unified_paths(&self) -> (PathBuf, PathBuf, PathBuf) {
        (self.path("uime/corpus.jsonl"), self.path("uime/manifest.json"), self.path("uime/registry.tsv"))
    }

    /// Validates every configured dataset and writes normalized copies plus statistics.
    pub fn ingest(&self) -> Result<Vec<(CorpusStats, Vec<String>)>> {
        self.snapshot()?;
        let mut all = Vec::new();
        for source in &self.config.datasets {
            let manifest = DatasetManifest::load(&self.root.join(&source.manifest))?;
            if manifest.dataset_id != source.id {
                return Err(Error::Config(format!(
                    "manifest for {} declares dataset {}",
                    source.id, manifest.dataset_id
                )));
            }
            let corpus = corpus::ingest(&self.root.join(&source.corpus), &manifest)?;
            let (corpus_path, manifest_path) = self.ingested_paths(&source.id);
            corpus.save(&corpus_path, Some(&self.header("corpus")))?;
            corpus.manifest().save(&manifest_path)?;
            all.push((corpus.stats(), corpus.warnings().to_vec()));
        }
        let stats: Vec<&CorpusStats> = all.iter().map(|(s, _)| s).collect();
        write_file(&self.path("corpus/stats.json"), &(serde_json::to_string_pretty(&stats)? + "\n"))?;
        Ok(all)
    }

    fn load_ingested(&self, id: &str) -> Result<Corpus> {
        let (corpus_path, manifest_path) = self.ingested_paths(id);
        self.require(&corpus_path, "ingest")?;
        corpus::ingest(&corpus_path, &DatasetManifest::load(&manifest_path)?)
    }

    /// Merges all ingested datasets into the unified corpus. Returns it with
    /// any manifest/mapping mismatch warnings.
    pub fn unify(&self) -> Result<(Corpus, Vec<String>)> {
        self.snapshot()?;
        let mapping = self.mapping()?;
        let corpora: Vec<Corpus> =
            self.config.datasets.iter().map(|d| self.load_ingested(&d.id)).collect::<Result<_>>()?;
        let warnings: Vec<String> = corpora.iter().flat_map(|c| mapping.check_manifest(c.manifest())).collect();
        let manifests: Vec<&DatasetManifest> = corpora.iter().map(Corpus::manifest).collect();
        let registry = unify::build_registry(&manifests)?;
        let unified = unify::unify_corpus(&corpora, &mapping, &registry)?;
        let (corpus_path, manifest_path, registry_path) = self.unified_paths();
        unified.save(&corpus_path, Some(&self.header("corpus")))?;
        unified.manifest().save(&manifest_path)?;
        write_file(&registry_path, &registry.to_tsv())?;
        write_file(&self.path("uime/mapping.tsv"), &mapping.to_tsv())?;
        Ok((unified, warnings))
    }

    /// The corpus selected by `target`.
    pub fn load_target(&self) -> Result<Corpus> {
        if self.config.target == UNIFIED_DATASET_ID {
            let (corpus_path, manifest_path, _) = self.unified_paths();
            self.require(&corpus_path, "unify")?;
            corpus::ingest(&corpus_path, &DatasetManifest::load(&manifest_path)?)
        } else {
            self.load_ingested(&self.config.target)
        }
    }

    /// Original speaker names to scrub from demonstration texts.
    fn speaker_names(&self, corpus: &Corpus) -> Result<Vec<String>> {
        if self.config.target == UNIFIED_DATASET_ID {
            let (_, _, registry_path) = self.unified_paths();
            let text = std::fs::read_to_string(&registry_path).map_err(|e| Error::io(&registry_path, e))?;
            Ok(SpeakerRegistry::parse_tsv(&text)?.speaker_names())
        } else {
            Ok(corpus.manifest().speaker_set.clone())
        }
    }

    pub fn build_index(&self) -> Result<RetrievalIndex> {
        self.snapshot()?;
        let corpus = self.load_target()?;
        let embedder = self.embedder()?;
        let names = self.speaker_names(&corpus)?;
        let index = build_domain_base(&corpus.split(Split::Train), embedder.as_ref(), self.config.seed, &names)?;
        #[derive(Serialize)]
        struct Stamped<'a> {
            config_hash: &'a str,
            index: &'a RetrievalIndex,
        }
        let json = serde_json::to_string(&Stamped { config_hash: &self.hash, index: &index })?;
        write_file(&self.path("index.json"), &(json + "\n"))?;
        Ok(index)
    }

    pub fn load_index(&self) -> Result<RetrievalIndex> {
        #[derive(Deserialize)]
        struct Stamped {
            index: RetrievalIndex,
        }
        let path = self.path("index.json");
        self.require(&path, "build-index")?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str::<Stamped>(&text)?.index.validated()
    }

    fn prompts_path(&self) -> PathBuf {
        self.path(&format!("prompts/{}.jsonl", self.config.eval_split))
    }

    /// Main-task prompts for the evaluation split.
    pub fn build_prompts(&self) -> Result<Vec<PromptSample>> {
        self.snapshot()?;
        let samples = self.inference_samples(self.config.window, self.config.infer_pairing)?;
        export::write_samples(&self.prompts_path(), Some(&self.header("prompts")), &samples)?;
        Ok(samples)
    }

    fn inference_samples(&self, window: usize, pairing: Pairing) -> Result<Vec<PromptSample>> {
        let corpus = self.load_target()?.split(self.config.eval_split);
        let embedder = self.embedder()?;
        let index = if self.config.demonstrations { Some(self.load_index()?) } else { None };
        let demos = index.as_ref().map(|index| Demonstrations { index, embedder: embedder.as_ref(), pairing });
        export::inference_prompts(&corpus, window, demos)
    }

    fn mix_selection(&self, train: &Corpus) -> Result<Option<(HashSet<Address>, mixing::MixSample)>> {
        let Some(mix) = &self.config.mix else { return Ok(None) };
        let plan = MixPlan { strategy: mix.strategy.clone(), fraction: mix.fraction, seed: self.config.seed };
        let sample = mixing::sample(train, &plan)?;
        Ok(Some((sample.addresses.iter().cloned().collect(), sample)))
    }

    /// Stage 1 and stage 2 training files for the train split (or the configured mix subset).
    pub fn export_train(&self) -> Result<(usize, usize)> {
        self.snapshot()?;
        let train = self.load_target()?.split(Split::Train);
        let selection = self.mix_selection(&train)?;
        if let Some((_, sample)) = &selection {
            sample.manifest(&self.hash).save(&self.path("train/subset.json"))?;
        }
        let chosen = selection.as_ref().map(|(s, _)| s);
        let stage1 = export::export_stage1(&train, chosen, self.config.seed);
        export::write_samples(&self.path("train/stage1.jsonl"), Some(&self.header("stage1")), &stage1)?;
        let stage2 = self.stage2(&train, self.config.window, self.config.alpha, self.config.train_pairing, chosen)?;
        export::write_samples(&self.path("train/stage2.jsonl"), Some(&self.header("stage2")), &stage2)?;
        Ok((stage1.len(), stage2.len()))
    }

    fn stage2(
        &self,
        train: &Corpus,
        window: usize,
        alpha: f64,
        pairing: Pairing,
        selection: Option<&HashSet<Address>>,
    ) -> Result<Vec<PromptSample>> {
        let embedder = self.embedder()?;
        let index = if self.config.demonstrations { Some(self.load_index()?) } else { None };
        let demos = index.as_ref().map(|index| Demonstrations { index, embedder: embedder.as_ref(), pairing });
        let options = Stage2Options { window, alpha, seed: self.config.seed };
        export::export_stage2(train, &options, demos, selection)
    }

    /// Runs the backend over the prompt file, checkpointing completions.
    pub fn infer(&self) -> Result<Vec<PredictionRecord>> {
        self.snapshot()?;
        let prompts_path = self.prompts_path();
        self.require(&prompts_path, "build-prompts")?;
        let samples = export::read_samples(&prompts_path)?;
        let outcome = self.run_backend(&samples, Some(&self.path("infer/checkpoint.jsonl")))?;
        jsonl::write(&self.path("infer/predictions.jsonl"), Some(&self.header("predictions")), &outcome.predictions)?;
        Ok(outcome.predictions)
    }

    fn run_backend(&self, samples: &[PromptSample], checkpoint: Option<&Path>) -> Result<eval::RunOutcome> {
        let backend = self.config.backend.build()?;
        let labels = self.load_target()?.manifest().label_set.clone();
        let options = RunOptions {
            concurrency: self.config.backend.concurrency,
            retries: self.config.backend.retries,
            checkpoint,
        };
        eval::evaluate_run(samples, backend.as_ref(), &labels, &options)
    }

    /// Scores the stored predictions and writes the reports.
    pub fn eval(&self) -> Result<EvalReport> {
        self.snapshot()?;
        let path = self.path("infer/predictions.jsonl");
        self.require(&path, "infer")?;
        let labels = self.load_target()?.manifest().label_set.clone();
        let mut predictions: Vec<PredictionRecord> = jsonl::read(&path)?;
        for p in &mut predictions {
            p.prediction = eval::parse_prediction(&p.completion, &labels);
        }
        let report = eval::score_predictions(&predictions, &labels)?;
        report.save(&self.path("eval"), &self.header("report"))?;
        Ok(report)
    }

    /// Data-scaling grid: total and ratio mixing at every default fraction,
    /// plus single-dataset rows. Writes one subset manifest per row.
    pub fn scale_experiment(&self, evaluate: bool) -> Result<Vec<ScaleRow>> {
        self.snapshot()?;
        let corpus = self.load_target()?;
        let train = corpus.split(Split::Train);
        let datasets = train.source_datasets();
        let fractions = default_fractions();
        let mut plans = mixing::plan_grid(&fractions, &[Strategy::Total, Strategy::Ratio], self.config.seed);
        let singles: Vec<Strategy> = datasets.iter().map(|d| Strategy::Single(d.clone())).collect();
        plans.extend(mixing::plan_grid(&fractions, &singles, self.config.seed));

        let test_report = if evaluate {
            let samples = self.inference_samples(self.config.window, self.config.infer_pairing)?;
            Some(self.run_backend(&samples, None)?.report)
        } else {
            None
        };

        let mut rows = Vec::with_capacity(plans.len());
        for plan in plans {
            let sample = mixing::sample(&train, &plan)?;
            let name = format!("{}_{}", plan.strategy, plan.fraction).replace(['/', ':'], "-");
            sample.manifest(&self.hash).save(&self.path(&format!("scale/subsets/{name}.json")))?;
            let w_f1 = datasets
                .iter()
                .map(|d| {
                    let score = test_report.as_ref().and_then(|r| {
                        if datasets.len() > 1 {
                            r.dataset(d).map(|x| x.weighted_f1)
                        } else {
                            Some(r.weighted_f1)
                        }
                    });
                    let scored = match &plan.strategy {
                        Strategy::Single(only) => only == d,
                        _ => true,
                    };
                    (d.clone(), score.filter(|_| scored))
                })
                .collect();
            rows.push(ScaleRow {
                strategy: plan.strategy.to_string(),
                fraction: plan.fraction,
                total: sample.len(),
                per_dataset: sample.per_dataset.clone(),
                weighted_f1: w_f1,
                warnings: sample.warnings.clone(),
            });
        }
        write_file(
            &self.path("scale/grid.json"),
            &(serde_json::to_string_pretty(&StampedRows { config_hash: &self.hash, rows: &rows })? + "\n"),
        )?;
        write_file(&self.path("scale/grid.txt"), &scale_table(&rows))?;
        Ok(rows)
    }

    /// Exports stage-2 files and evaluates the configured backend for every
    /// value of one hyperparameter.
    pub fn sweep(&self, kind: SweepKind) -> Result<Vec<SweepRow>> {
        self.snapshot()?;
        let train = self.load_target()?.split(Split::Train);
        let c = &self.config;
        let points: Vec<(String, usize, f64, Pairing, Pairing)> = match kind {
            SweepKind::Window => {
                WINDOW_SWEEP.iter().map(|&w| (format!("w{w}"), w, c.alpha, c.train_pairing, c.infer_pairing)).collect()
            }
            SweepKind::Alpha => ALPHA_SWEEP
                .iter()
                .map(|&a| (format!("alpha{a}"), c.window, a, c.train_pairing, c.infer_pairing))
                .collect(),
            SweepKind::Pairing => [Pairing::SameLabel, Pairing::AllLabels]
                .iter()
                .flat_map(|&t| [Pairing::SameLabel, Pairing::AllLabels].map(move |i| (t, i)))
                .map(|(t, i)| (format!("train-{}_infer-{}", pairing_name(t), pairing_name(i)), c.window, c.alpha, t, i))
                .collect(),
        };
        let mut rows = Vec::new();
        for (name, window, alpha, train_pairing, infer_pairing) in points {
            let dir = format!("sweep/{}/{name}", kind.as_str());
            let stage2 = self.stage2(&train, window, alpha, train_pairing, None)?;
            export::write_samples(&self.path(&format!("{dir}/stage2.jsonl")), Some(&self.header("stage2")), &stage2)?;
            let samples = self.inference_samples(window, infer_pairing)?;
            let report = self.run_backend(&samples, None)?.report;
            report.save(&self.path(&dir), &self.header("report"))?;
            rows.push(SweepRow {
                point: name,
                window,
                alpha,
                train_pairing,
                infer_pairing,
                stage2_records: stage2.len(),
                weighted_f1: report.weighted_f1,
            });
        }
        let mut table = format!("{:<36} {:>6} {:>6} {:>10} {:>8}\n", "point", "window", "alpha", "stage2", "W-F1");
        for r in &rows {
            let _ = writeln!(
                table,
                "{:<36} {:>6} {:>6} {:>10} {:>8.4}",
                r.point, r.window, r.alpha, r.stage2_records, r.weighted_f1
            );
        }
        write_file(&self.path(&format!("sweep/{}/summary.txt", kind.as_str())), &table)?;
        write_file(
            &self.path(&format!("sweep/{}/summary.json", kind.as_str())),
            &(serde_json::to_string_pretty(&rows)? + "\n"),
        )?;
        Ok(rows)
    }
}

fn pairing_name(p: Pairing) -> &'static str {
    match p {
        Pairing::SameLabel => "same",
        Pairing::AllLabels => "all",
    }
}

#[derive(Serialize)]
struct StampedRows<'a> {
    config_hash: &'a str,
    rows: &'a [ScaleRow],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub strategy: String,
    pub fraction: Fraction,
    pub total: usize,
    pub per_dataset: Vec<(String, usize)>,
    /// Per-dataset test W-F1 of the configured backend, when evaluated.
    pub weighted_f1: Vec<(String, Option<f64>)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn scale_table(rows: &[ScaleRow]) -> String {
    let datasets: Vec<&str> =
        rows.first().map(|r| r.per_dataset.iter().map(|(d, _)| d.as_str()).collect()).unwrap_or_default();
    let mut out = format!("{:<18} {:>8} {:>8}", "strategy", "fraction", "total");
    for d in &datasets {
        let _ = write!(out, " {:>10} {:>8}", format!("n:{d}"), "W-F1");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<18} {:>8} {:>8}", r.strategy, r.fraction.to_string(), r.total);
        for d in &datasets {
            let n = r.per_dataset.iter().find(|(x, _)| x == d).map_or(0, |(_, n)| *n);
            let f = r
                .weighted_f1
                .iter()
                .find(|(x, _)| x == d)
                .and_then(|(_, f)| *f)
                .map_or_else(|| "-".to_string(), |f| format!("{:.2}", f * 100.0));
            let _ = write!(out, " {n:>10} {f:>8}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Window,
    Alpha,
    Pairing,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Window => "window",
            SweepKind::Alpha => "alpha",
            SweepKind::Pairing => "pairing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: String,
    pub window: usize,
    pub alpha: f64,
    pub train_pairing: Pairing,
    pub infer_pairing: Pairing,
    pub stage2_records: usize,
    pub weighted_f1: f64,
}
